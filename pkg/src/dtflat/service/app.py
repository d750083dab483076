"""FastAPI front end wrapping the pure analysis core."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from ..analysis import analyze
from ..exceptions import ChartMismatchError, DtflatError
from ..flatness import verify_parametrization
from ..report import (
    FORMAT_VERSION,
    InputFileError,
    outcome_to_dict,
    parametrization_from_dict,
    parametrization_to_dict,
    system_from_definition,
)
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    HealthResponse,
    ParametrizationPayload,
    VerifyRequest,
    VerifyResponse,
)

app = FastAPI(
    title="dtflat",
    description="Flatness analysis for discrete-time nonlinear systems",
    version="0.1.0",
)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", tool="dtflat", format_version=FORMAT_VERSION)


@app.post("/analyze", response_model=AnalyzeResponse)
def analyze_endpoint(request: AnalyzeRequest) -> AnalyzeResponse:
    try:
        system, meta = system_from_definition(request.system.model_dump())
    except InputFileError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    try:
        outcome = analyze(
            system,
            method=request.method,
            seed=request.seed,
            max_iter=request.max_iter,
            meta=meta,
        )
    except DtflatError as exc:  # defensive: analysis errors become verdicts
        raise HTTPException(status_code=500, detail=str(exc))
    payload = None
    if request.emit_parametrization:
        F = outcome.advanced.parametrization if outcome.advanced else None
        if F is not None:
            payload = ParametrizationPayload(**parametrization_to_dict(F))
    return AnalyzeResponse(
        report=outcome_to_dict(outcome),
        exit_code=outcome.exit_code,
        parametrization=payload,
    )


@app.post("/verify", response_model=VerifyResponse)
def verify_endpoint(request: VerifyRequest) -> VerifyResponse:
    try:
        system, _ = system_from_definition(request.system.model_dump())
        F = parametrization_from_dict(request.parametrization.model_dump())
    except InputFileError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    try:
        from ..expr_core import Sampler

        result = verify_parametrization(system, F, Sampler(request.seed))
    except (ValueError, ChartMismatchError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    from ..expr_core import render

    return VerifyResponse(
        ok=result.ok,
        failed_components=list(result.failed_components),
        residuals=[render(r) for r in result.residuals],
        submersion_ok=result.submersion_ok,
        rank_dy0_fx=result.rank_dy0_fx,
        y0_independent=result.y0_independent,
    )
