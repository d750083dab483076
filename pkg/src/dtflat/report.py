"""System-definition files, report serialization and text rendering.

The structured format is a self-describing JSON tree with every expression
carried as a grammar string, so reports diff cleanly and reload losslessly.
"""

from __future__ import annotations

import json
from typing import Any

from .analysis import AnalysisOutcome
from .exceptions import DtflatError, ExpressionSyntaxError, UnknownIdentifierError
from .expr_core import Expression, parse, render
from .flatness import FlatnessReport, FlatParametrization, VerificationReport
from .system import DiscreteSystem, TrivialInputRecord

__all__ = [
    "InputFileError",
    "system_from_definition",
    "system_to_definition",
    "load_system_file",
    "parametrization_to_dict",
    "parametrization_from_dict",
    "load_parametrization_file",
    "outcome_to_dict",
    "render_text_report",
]

FORMAT_VERSION = 1


class InputFileError(DtflatError):
    """Malformed system-definition or parametrization payload."""


def system_from_definition(data: dict) -> tuple[DiscreteSystem, dict]:
    """Build a system from the definition schema, with precise diagnostics."""
    if not isinstance(data, dict):
        raise InputFileError("definition must be a JSON object")
    version = data.get("version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise InputFileError(f"unsupported format version {version!r}")
    for key in ("states", "inputs", "dynamics"):
        if key not in data:
            raise InputFileError(f"missing field '{key}'")
        if not isinstance(data[key], list) or not all(isinstance(s, str) for s in data[key]):
            raise InputFileError(f"field '{key}' must be a list of strings")
    states, inputs, dynamics = data["states"], data["inputs"], data["dynamics"]
    if len(dynamics) != len(states):
        raise InputFileError(
            f"{len(states)} states but {len(dynamics)} dynamics components"
        )
    declared = states + inputs
    if len(set(declared)) != len(declared):
        raise InputFileError("state and input names must be distinct")
    exprs = []
    for k, text in enumerate(dynamics):
        try:
            exprs.append(parse(text, declared))
        except (ExpressionSyntaxError, UnknownIdentifierError) as exc:
            raise InputFileError(f"dynamics[{k}]: {exc}") from exc
    meta = data.get("meta") or {}
    if not isinstance(meta, dict):
        raise InputFileError("field 'meta' must be an object")
    try:
        system = DiscreteSystem(tuple(states), tuple(inputs), tuple(exprs))
    except (ValueError, DtflatError) as exc:
        raise InputFileError(str(exc)) from exc
    return system, meta


def system_to_definition(S: DiscreteSystem, meta: dict | None = None) -> dict:
    return {
        "version": FORMAT_VERSION,
        "states": list(S.states),
        "inputs": list(S.inputs),
        "dynamics": [render(d) for d in S.dynamics],
        "meta": meta or {},
    }


def load_system_file(path: str) -> tuple[DiscreteSystem, dict]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise InputFileError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputFileError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc
    return system_from_definition(data)


# ---------------------------------------------------------------------------
# parametrization payloads
# ---------------------------------------------------------------------------


def parametrization_to_dict(F: FlatParametrization) -> dict:
    return {
        "version": FORMAT_VERSION,
        "states": list(F.states),
        "inputs": list(F.inputs),
        "shifts": list(F.shifts),
        "f_x": [render(e) for e in F.f_x],
        "f_u": [render(e) for e in F.f_u],
    }


def parametrization_from_dict(data: dict) -> FlatParametrization:
    if not isinstance(data, dict):
        raise InputFileError("parametrization must be a JSON object")
    for key in ("states", "inputs", "shifts", "f_x", "f_u"):
        if key not in data:
            raise InputFileError(f"missing field '{key}'")
    shifts = data["shifts"]
    if not all(isinstance(r, int) and r >= 0 for r in shifts):
        raise InputFileError("shifts must be non-negative integers")
    from .flatness import y_name

    allowed = [y_name(i + 1, j) for i, r in enumerate(shifts) for j in range(r + 1)]
    def _parse_all(texts, label):
        out = []
        for k, t in enumerate(texts):
            try:
                out.append(parse(t, allowed))
            except (ExpressionSyntaxError, UnknownIdentifierError) as exc:
                raise InputFileError(f"{label}[{k}]: {exc}") from exc
        return out

    f_x = _parse_all(data["f_x"], "f_x")
    f_u = _parse_all(data["f_u"], "f_u")
    if len(f_x) != len(data["states"]) or len(f_u) != len(data["inputs"]):
        raise InputFileError("f_x/f_u lengths must match states/inputs")
    return FlatParametrization(
        tuple(data["states"]), tuple(data["inputs"]), tuple(shifts), tuple(f_x), tuple(f_u)
    )


def load_parametrization_file(path: str) -> FlatParametrization:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise InputFileError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputFileError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc
    return parametrization_from_dict(data)


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------


def _trivial_to_dict(rec: TrivialInputRecord | None) -> dict | None:
    if rec is None:
        return None
    return {
        "identity": rec.identity,
        "original_inputs": list(rec.original_inputs),
        "effective_inputs": list(rec.effective_inputs),
        "dropped": list(rec.dropped),
        "transform": [[n, render(e)] for n, e in rec.transform],
        "inverse": [[n, render(e)] for n, e in rec.inverse],
    }


def _verification_to_dict(v: VerificationReport | None) -> dict | None:
    if v is None:
        return None
    return {
        "ok": v.ok,
        "failed_components": list(v.failed_components),
        "residuals": [render(r) for r in v.residuals],
        "submersion_ok": v.submersion_ok,
        "rank_dy0_fx": v.rank_dy0_fx,
        "y0_independent": v.y0_independent,
    }


def _simple_report_to_dict(rep: FlatnessReport) -> dict:
    iterations = []
    for it in rep.iterations:
        iterations.append(
            {
                "index": it.index,
                "map_functions": [render(g) for g in it.map_functions],
                "rounds": [
                    {
                        "normalization_columns": list(r.normalization_columns),
                        "lambda_basis": [[render(x) for x in v] for v in r.lambda_basis],
                    }
                    for r in it.result.rounds
                ],
                "W": [str(f) for f in it.W.basis],
                "V": [str(f) for f in it.V.basis],
                "trivial_directions": [str(f) for f in it.trivial_directions],
                "dim_P_next": it.P_next.dimension,
                "P_next": [str(f) for f in it.P_next.basis],
            }
        )
    return {
        "verdict": rep.verdict,
        "reason": rep.reason,
        "detail": rep.detail,
        "iterations": iterations,
        "W_bar": [str(f) for f in rep.W_bar.basis] if rep.W_bar is not None else None,
        "flat_outputs": [render(y) for y in rep.flat_outputs] if rep.flat_outputs else None,
        "output_pdes": rep.output_pdes,
    }


def _advanced_report_to_dict(rep: FlatnessReport) -> dict:
    steps = []
    for k, st in enumerate(rep.steps):
        rec = rep.step_trivial_records[k] if k < len(rep.step_trivial_records) else None
        steps.append(
            {
                "index": k,
                "system": system_to_definition(st.system),
                "m_w": st.m_w,
                "m_v": st.m_v,
                "rounds": [
                    {
                        "normalization_columns": list(r.normalization_columns),
                        "lambda_basis": [[render(x) for x in v] for v in r.lambda_basis],
                    }
                    for r in st.input_split.result.rounds
                ],
                "W": [str(f) for f in st.input_split.W.basis],
                "V": [str(f) for f in st.input_split.V.basis],
                "dim_P1": st.P1.dimension,
                "P1": [str(f) for f in st.P1.basis],
                "g": [render(g) for g in st.g],
                "q": [[n, render(e)] for n, e in st.q],
                "q_inverse": [[n, render(e)] for n, e in sorted(st.q_inverse.items())],
                "p": [[n, render(e)] for n, e in st.p],
                "h": [render(h) for h in st.h],
                "transformed": [render(t) for t in st.transformed],
                "shift_states": list(st.shift_state_names),
                "renaming": [list(pair) for pair in st.renaming],
                "remaining": system_to_definition(st.remaining) if st.remaining else None,
                "trivial_after": _trivial_to_dict(rec),
            }
        )
    return {
        "verdict": rep.verdict,
        "reason": rep.reason,
        "detail": rep.detail,
        "steps": steps,
        "shifts": rep.shifts,
    }


def outcome_to_dict(outcome: AnalysisOutcome) -> dict:
    simple = outcome.simple
    advanced = outcome.advanced
    flat_outputs = simple.flat_outputs if simple and simple.flat_outputs else None
    parametrization = advanced.parametrization if advanced else None
    verification = advanced.verification if advanced else None
    data: dict[str, Any] = {
        "version": FORMAT_VERSION,
        "tool": "dtflat",
        "seed": outcome.seed,
        "method": outcome.method,
        "max_iter": outcome.max_iter,
        "elapsed_ms": outcome.elapsed_ms,
        "system": system_to_definition(outcome.system, outcome.meta),
        "verdict": outcome.verdict,
        "agreement": outcome.agreement,
        "trivial_inputs": _trivial_to_dict(
            (simple or advanced).trivial_record if (simple or advanced) else None
        ),
        "simple": _simple_report_to_dict(simple) if simple else None,
        "advanced": _advanced_report_to_dict(advanced) if advanced else None,
        "flat_outputs": [render(y) for y in flat_outputs] if flat_outputs else None,
        "output_pdes": simple.output_pdes if simple else None,
        "shifts": advanced.shifts if advanced else None,
        "parametrization": parametrization_to_dict(parametrization) if parametrization else None,
        "verification": _verification_to_dict(verification),
        "corollary": (
            {"value": outcome.corollary[0], "note": outcome.corollary[1]}
            if outcome.corollary is not None
            else None
        ),
    }
    return data


# ---------------------------------------------------------------------------
# human-readable rendering
# ---------------------------------------------------------------------------


def render_text_report(data: dict) -> str:
    lines: list[str] = []
    sys_d = data["system"]
    title = (sys_d.get("meta") or {}).get("title")
    lines.append(f"dtflat analysis{' - ' + title if title else ''}")
    lines.append(f"seed {data['seed']}, method {data['method']}, {data['elapsed_ms']} ms")
    lines.append("")
    lines.append("system:")
    for s, d in zip(sys_d["states"], sys_d["dynamics"]):
        lines.append(f"  {s}+ = {d}")
    lines.append(f"  inputs: {', '.join(sys_d['inputs'])}")
    triv = data.get("trivial_inputs")
    if triv and not triv["identity"]:
        lines.append(f"  trivial inputs dropped: {', '.join(triv['dropped'])}")
        lines.append(f"  effective inputs: {', '.join(triv['effective_inputs'])}")
    lines.append("")
    lines.append(f"VERDICT: {data['verdict']}")
    if data.get("agreement") is not None:
        lines.append(f"method agreement: {data['agreement']}")
    simple = data.get("simple")
    if simple:
        lines.append("")
        lines.append(f"simple test: {simple['verdict']}")
        if simple.get("reason"):
            lines.append(f"  reason: {simple['reason']} ({simple.get('detail')})")
        for it in simple["iterations"]:
            lines.append(f"  iteration {it['index'] + 1}:")
            if it["rounds"]:
                lam = it["rounds"][0]["lambda_basis"]
                lines.append(f"    lambda solutions: {lam}")
            lines.append(f"    W = span({{{', '.join(it['W'])}}})")
            if it["V"]:
                lines.append(f"    V = span({{{', '.join(it['V'])}}})")
            lines.append(f"    dim P_next = {it['dim_P_next']}")
        if simple.get("W_bar"):
            lines.append(f"  accumulated W = span({{{', '.join(simple['W_bar'])}}})")
    if data.get("flat_outputs"):
        lines.append("")
        lines.append("flat outputs:")
        for i, y in enumerate(data["flat_outputs"]):
            lines.append(f"  y{i+1} = {y}")
    if data.get("output_pdes"):
        lines.append("")
        lines.append("flat outputs left as the PDE system:")
        for p in data["output_pdes"]:
            lines.append(f"  {p}")
    advanced = data.get("advanced")
    if advanced:
        lines.append("")
        lines.append(f"advanced test: {advanced['verdict']}")
        if advanced.get("reason"):
            lines.append(f"  reason: {advanced['reason']} ({advanced.get('detail')})")
        for st in advanced["steps"]:
            lines.append(f"  step {st['index'] + 1}: m_w={st['m_w']}, m_v={st['m_v']}, dim P1={st['dim_P1']}")
            lines.append(f"    g: {', '.join(st['g']) if st['g'] else '(none)'}")
            lines.append(f"    q: {', '.join(n + ' = ' + e for n, e in st['q'])}")
            lines.append(
                "    h: " + ", ".join(f"{x} = {e}" for x, e in zip(st["system"]["states"], st["h"]))
            )
            if st["remaining"]:
                rem = st["remaining"]
                lines.append(
                    "    remaining: "
                    + "; ".join(f"{s}+ = {d}" for s, d in zip(rem["states"], rem["dynamics"]))
                )
            else:
                lines.append("    remaining: (empty - fully reduced)")
        if advanced.get("shifts"):
            lines.append(f"  shift depths r_i: {advanced['shifts']}")
    par = data.get("parametrization")
    if par:
        lines.append("")
        lines.append("flat parametrization:")
        for s, e in zip(par["states"], par["f_x"]):
            lines.append(f"  {s} = {e}")
        for u, e in zip(par["inputs"], par["f_u"]):
            lines.append(f"  {u} = {e}")
    ver = data.get("verification")
    if ver:
        lines.append("")
        lines.append(
            f"parametrization verified: {ver['ok']} "
            f"(submersion: {ver['submersion_ok']}, rank dFx/dy0: {ver['rank_dy0_fx']})"
        )
        if ver["failed_components"]:
            lines.append(f"  failing components: {ver['failed_components']}")
            for i in ver["failed_components"]:
                lines.append(f"    residual[{i}] = {ver['residuals'][i]}")
    cor = data.get("corollary")
    if cor and cor.get("value") is not None:
        lines.append("")
        lines.append(f"state-only flat outputs (corollary): {cor['value']} - {cor['note']}")
    lines.append("")
    return "\n".join(lines)
