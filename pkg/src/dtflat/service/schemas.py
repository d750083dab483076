"""Pydantic request/response models for the analysis service."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field


class SystemDefinition(BaseModel):
    version: int = 1
    states: list[str]
    inputs: list[str]
    dynamics: list[str]
    meta: Optional[dict[str, str]] = None


class AnalyzeRequest(BaseModel):
    system: SystemDefinition
    method: Literal["simple", "advanced", "both"] = "both"
    seed: int = 0
    max_iter: Optional[int] = Field(default=None, ge=1)
    emit_parametrization: bool = False


class ParametrizationPayload(BaseModel):
    version: int = 1
    states: list[str]
    inputs: list[str]
    shifts: list[int]
    f_x: list[str]
    f_u: list[str]


class AnalyzeResponse(BaseModel):
    report: dict[str, Any]
    exit_code: int
    parametrization: Optional[ParametrizationPayload] = None


class VerifyRequest(BaseModel):
    system: SystemDefinition
    parametrization: ParametrizationPayload
    seed: int = 0


class VerifyResponse(BaseModel):
    ok: bool
    failed_components: list[int]
    residuals: list[str]
    submersion_ok: bool
    rank_dy0_fx: int
    y0_independent: bool


class HealthResponse(BaseModel):
    status: str
    tool: str
    format_version: int
