"""Command-line front end: a thin client over the analysis service.

Without --server the service app is driven in-process (no socket); with
--server URL the same requests go over HTTP.  Exit codes: 0 flat, 2 not
flat, 3 undecided, 1 input error.
"""

from __future__ import annotations

import json
import sys

import click
import httpx

from .report import render_text_report

EXIT_INPUT_ERROR = 1


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

        from .service.app import app

        return TestClient(app)


def _read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise click.ClickException(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise click.ClickException(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}"
        )


def _fail_input(message: str) -> None:
    click.echo(f"input error: {message}", err=True)
    sys.exit(EXIT_INPUT_ERROR)


@click.group()
def main() -> None:
    """Flatness analysis for discrete-time nonlinear systems."""


@main.command()
@click.argument("path", type=click.Path())
@click.option(
    "--method",
    type=click.Choice(["simple", "advanced", "both"]),
    default="both",
    show_default=True,
    help="Which flatness test to run.",
)
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for randomized checks.")
@click.option("--max-iter", type=int, default=None, help="Iteration cap (default: state count).")
@click.option(
    "--emit-parametrization",
    "emit_path",
    type=click.Path(),
    default=None,
    help="Write the flat parametrization to this file.",
)
@click.option("--out", type=click.Path(), default=None, help="Write the structured report here.")
@click.option("--json", "as_json", is_flag=True, help="Print the structured report to stdout.")
@click.option("--server", default=None, help="Analysis service URL (default: in-process).")
def analyze(path, method, seed, max_iter, emit_path, out, as_json, server):
    """Analyze the system defined in PATH for flatness."""
    try:
        definition = _read_json(path)
    except click.ClickException as exc:
        _fail_input(exc.message)
    body = {
        "system": definition,
        "method": method,
        "seed": seed,
        "max_iter": max_iter,
        "emit_parametrization": emit_path is not None,
    }
    with _client(server) as client:
        resp = client.post("/analyze", json=body)
    if resp.status_code != 200:
        _fail_input(_detail(resp))
    payload = resp.json()
    report = payload["report"]
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if as_json:
        click.echo(json.dumps(report, indent=2, sort_keys=True))
    else:
        click.echo(render_text_report(report))
    if emit_path:
        if payload.get("parametrization"):
            with open(emit_path, "w", encoding="utf-8") as fh:
                json.dump(payload["parametrization"], fh, indent=2, sort_keys=True)
                fh.write("\n")
        else:
            click.echo("no parametrization available to emit", err=True)
    sys.exit(payload["exit_code"])


@main.command()
@click.argument("system_path", type=click.Path())
@click.argument("parametrization_path", type=click.Path())
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--server", default=None, help="Analysis service URL (default: in-process).")
def verify(system_path, parametrization_path, seed, server):
    """Verify a flat parametrization against the system equations."""
    try:
        system = _read_json(system_path)
        parametrization = _read_json(parametrization_path)
    except click.ClickException as exc:
        _fail_input(exc.message)
    body = {"system": system, "parametrization": parametrization, "seed": seed}
    with _client(server) as client:
        resp = client.post("/verify", json=body)
    if resp.status_code != 200:
        _fail_input(_detail(resp))
    result = resp.json()
    if result["ok"]:
        click.echo("parametrization verified: all residuals vanish identically")
        sys.exit(0)
    click.echo("parametrization INVALID")
    for i in result["failed_components"]:
        click.echo(f"  residual[{i}] = {result['residuals'][i]}")
    if not result["submersion_ok"]:
        click.echo("  the parametrization is not a submersion")
    sys.exit(2)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8321, show_default=True)
def serve(host, port):
    """Run the analysis service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


def _detail(resp: httpx.Response) -> str:
    try:
        data = resp.json()
        return str(data.get("detail", data))
    except Exception:
        return resp.text


if __name__ == "__main__":
    main()
