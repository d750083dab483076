"""Top-level orchestration: run the requested tests and combine verdicts."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .expr_core import Sampler
from .flatness import (
    VERDICT_FLAT,
    VERDICT_NOT_FLAT,
    VERDICT_UNDECIDED,
    FlatnessReport,
    advanced_test,
    corollary_check,
    simple_test,
)
from .system import DiscreteSystem

__all__ = ["AnalysisOutcome", "analyze"]

METHODS = ("simple", "advanced", "both")


@dataclass
class AnalysisOutcome:
    system: DiscreteSystem
    meta: dict
    method: str
    seed: int
    max_iter: int | None
    simple: FlatnessReport | None
    advanced: FlatnessReport | None
    verdict: str
    agreement: bool | None
    corollary: tuple[bool | None, str] | None
    elapsed_ms: int

    @property
    def exit_code(self) -> int:
        if self.verdict == VERDICT_FLAT:
            return 0
        if self.verdict == VERDICT_NOT_FLAT:
            return 2
        return 3


def analyze(
    S: DiscreteSystem,
    method: str = "both",
    seed: int = 0,
    max_iter: int | None = None,
    meta: dict | None = None,
) -> AnalysisOutcome:
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    start = time.monotonic()
    sampler = Sampler(seed)
    rep_simple = simple_test(S, max_iter, sampler) if method in ("simple", "both") else None
    rep_advanced = advanced_test(S, max_iter, sampler) if method in ("advanced", "both") else None

    verdicts = [r.verdict for r in (rep_simple, rep_advanced) if r is not None]
    decided = [v for v in verdicts if v != VERDICT_UNDECIDED]
    agreement: bool | None = None
    if rep_simple is not None and rep_advanced is not None:
        if VERDICT_UNDECIDED in verdicts:
            agreement = None
        else:
            agreement = rep_simple.verdict == rep_advanced.verdict
    if decided and all(v == decided[0] for v in decided):
        verdict = decided[0]
    elif decided:
        # the tests disagree: flag instead of picking a side
        verdict = VERDICT_UNDECIDED
    else:
        verdict = VERDICT_UNDECIDED

    corollary = None
    if rep_simple is not None and rep_simple.is_flat:
        corollary = corollary_check(rep_simple)
    elapsed_ms = int((time.monotonic() - start) * 1000)
    return AnalysisOutcome(
        system=S,
        meta=meta or {},
        method=method,
        seed=seed,
        max_iter=max_iter,
        simple=rep_simple,
        advanced=rep_advanced,
        verdict=verdict,
        agreement=agreement,
        corollary=corollary,
        elapsed_ms=elapsed_ms,
    )
