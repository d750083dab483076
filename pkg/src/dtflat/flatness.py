"""The two flatness tests, flat-output extraction and the parametrization.

The simple test iterates the projectability/reduction machinery entirely on
the original total chart, accumulating the shift distributions W_k; once the
accumulated dimension reaches the state count, flat outputs are read off as
first integrals of the accumulated distribution.  The advanced test iterates
the full normal-form decomposition and, at full reduction, assembles the
flat parametrization by back-substituting the recorded transformations in
reverse, then verifies the defining identity exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import sympy as sp

from .exceptions import (
    CauchyMismatchError,
    DecompositionError,
    NoProjectableInputError,
    NotReachableError,
    RankDeficientError,
    TrivialInputError,
    UnsolvableIntegralsError,
    UnstableFamilyError,
    UnsupportedInversionError,
)
from .expr_core import (
    Expression,
    Sampler,
    SymbolicMatrix,
    ZERO,
    complexity,
    differentiate,
    generic_rank,
    is_zero,
    render,
    row_reduce,
    substitute,
)
from .exterior import Chart, VectorField, differential, dual_frame
from .distributions import (
    Codistribution,
    Distribution,
    first_integrals,
    involutive_complement,
    largest_annihilated_subcodistribution,
)
from .system import (
    DiscreteSystem,
    ProjectableFieldsResult,
    TrivialInputRecord,
    eliminate_trivial_inputs,
    projectable_fields,
)
from .decompose import DecompositionStep, build_P0, normal_form_step

__all__ = [
    "FlatnessReport",
    "FlatParametrization",
    "VerificationReport",
    "SimpleIteration",
    "simple_test",
    "advanced_test",
    "verify_parametrization",
    "corollary_check",
    "shift_y_expression",
    "VERDICT_FLAT",
    "VERDICT_NOT_FLAT",
    "VERDICT_UNDECIDED",
]

VERDICT_FLAT = "flat"
VERDICT_NOT_FLAT = "not-flat-by-necessary-condition"
VERDICT_UNDECIDED = "undecided-closed-form"

_Y_PATTERN = re.compile(r"^y(\d+)_(\d+)$")


def y_name(i: int, j: int) -> str:
    return f"y{i}_{j}"


def shift_y_expression(e: Expression) -> Expression:
    """Forward shift on flat variables: y<i>_<j> becomes y<i>_<j+1>."""
    table = {}
    for v in e.variables:
        match = _Y_PATTERN.match(v)
        if match:
            i, j = int(match.group(1)), int(match.group(2))
            table[v] = Expression.var(y_name(i, j + 1))
    return substitute(e, table)


@dataclass(frozen=True)
class SimpleIteration:
    index: int
    map_functions: tuple[Expression, ...]  # stage map G_k on the total chart
    result: ProjectableFieldsResult
    trivial_directions: tuple[VectorField, ...]
    W: Distribution
    V: Distribution
    P_next: Codistribution

    @property
    def m_w(self) -> int:
        return self.W.dimension


@dataclass(frozen=True)
class FlatParametrization:
    """x = F_x(y-history), u = F_u(y-history) with per-output shift depths."""

    states: tuple[str, ...]
    inputs: tuple[str, ...]
    shifts: tuple[int, ...]
    f_x: tuple[Expression, ...]
    f_u: tuple[Expression, ...]

    @property
    def output_count(self) -> int:
        return len(self.shifts)

    def variable_grid(self) -> tuple[tuple[str, ...], ...]:
        return tuple(
            tuple(y_name(i + 1, j) for j in range(r + 1)) for i, r in enumerate(self.shifts)
        )

    def all_variables(self) -> tuple[str, ...]:
        return tuple(v for row in self.variable_grid() for v in row)


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    failed_components: tuple[int, ...]
    residuals: tuple[Expression, ...]
    submersion_ok: bool
    rank_dy0_fx: int
    y0_independent: bool


@dataclass
class FlatnessReport:
    method: str
    verdict: str
    reason: str | None = None
    detail: str | None = None
    trivial_record: TrivialInputRecord | None = None
    analyzed_system: DiscreteSystem | None = None
    iterations: list[SimpleIteration] = field(default_factory=list)
    steps: list[DecompositionStep] = field(default_factory=list)
    step_trivial_records: list[TrivialInputRecord | None] = field(default_factory=list)
    W_bar: Distribution | None = None
    flat_outputs: list[Expression] | None = None
    output_pdes: list[str] | None = None
    shifts: list[int] | None = None
    parametrization: FlatParametrization | None = None
    verification: VerificationReport | None = None

    @property
    def is_flat(self) -> bool:
        return self.verdict == VERDICT_FLAT


def _nf(e: Expression) -> Expression:
    return Expression(sp.cancel(sp.together(e.sym)))


# ---------------------------------------------------------------------------
# the simple test (distribution route, all on the original total chart)
# ---------------------------------------------------------------------------


def simple_test(
    S: DiscreteSystem, max_iter: int | None = None, sampler: Sampler | None = None
) -> FlatnessReport:
    report = FlatnessReport(method="simple", verdict=VERDICT_UNDECIDED)
    try:
        S_eff, record = eliminate_trivial_inputs(S, sampler)
    except TrivialInputError as exc:
        report.verdict = VERDICT_NOT_FLAT
        report.reason = "no effective inputs"
        report.detail = str(exc)
        return report
    report.trivial_record = record
    report.analyzed_system = S_eff

    chart = S_eff.total_chart
    n, m = S_eff.n, S_eff.m
    max_iter = max_iter if max_iter is not None else n
    # stage state: map functions G, their unshifted versions zeta (index paired),
    # input fields; all expressions live on the original total chart.
    G: list[Expression] = list(S_eff.dynamics)
    zeta: list[Expression] = [Expression.var(s) for s in S_eff.states]
    U_fields: list[VectorField] = S_eff.input_fields()
    P = build_P0(S_eff)
    accumulated: list[VectorField] = []
    flat = False

    for k in range(max_iter):
        z_chart = (
            S_eff.shifted_chart
            if k == 0
            else Chart.of(tuple(f"z{i+1}" for i in range(len(G))))
        )
        try:
            res = projectable_fields(chart, G, z_chart, U_fields)
            trivial = res.trivial_directions
            if trivial:
                U_eff_dist = involutive_complement(
                    Distribution.span(chart, list(trivial)),
                    Distribution.span(chart, U_fields),
                    sampler,
                )
                U_fields = list(U_eff_dist.basis)
                res = projectable_fields(chart, G, z_chart, U_fields)
        except UnsupportedInversionError as exc:
            report.reason = "projected field could not be rewritten on the image chart"
            report.detail = str(exc)
            return report
        if not res.stable:
            report.reason = "projectable family did not stabilize"
            report.detail = f"iteration {k+1}"
            return report
        W_k = Distribution.span(chart, list(res.fields))
        U_all = Distribution.span(chart, U_fields)
        if W_k.dimension == 0:
            report.verdict = VERDICT_NOT_FLAT
            report.reason = "zero-dimensional projectable distribution"
            report.detail = f"no projectable input field at iteration {k+1}"
            report.iterations.append(
                SimpleIteration(k, tuple(G), res, trivial, W_k, Distribution.span(chart, []), P)
            )
            return report
        V_k = involutive_complement(W_k, U_all, sampler)
        P_next = largest_annihilated_subcodistribution(P, W_k)
        report.iterations.append(SimpleIteration(k, tuple(G), res, trivial, W_k, V_k, P_next))
        accumulated.extend(res.fields)

        if P_next.dimension == 0:
            flat = True
            break

        # next stage: integrate the projected distribution on the image chart,
        # compose with (G, zeta) and lift the projected fields as the new
        # current-time input directions.
        try:
            Dz = Distribution.span(z_chart, list(res.projected))
            psi = first_integrals(Dz, len(G) - W_k.dimension)
        except UnsolvableIntegralsError as exc:
            report.reason = "first integrals of the projected distribution not in closed form"
            report.detail = "; ".join(exc.pde_system)
            return report
        z_to_G = dict(zip(z_chart.names, G))
        z_to_zeta = dict(zip(z_chart.names, zeta))
        pairs = [
            (_nf(substitute(p_i, z_to_G)), _nf(substitute(p_i, z_to_zeta))) for p_i in psi
        ]
        pairs.sort(key=lambda t: (-complexity(t[0]), render(t[0])))
        G_next = [g for g, _ in pairs]
        zeta_next = [z for _, z in pairs]
        span_next = Codistribution.span(chart, [differential(chart, g) for g in G_next])
        if not span_next.span_equals(P_next):
            report.reason = "reduced Pfaffian system lost exactness"
            report.detail = f"iteration {k+1}"
            return report
        try:
            lifted = _lift_projected(S_eff, zeta, list(res.projected), z_chart)
        except (RankDeficientError, UnsupportedInversionError) as exc:
            report.reason = "lift of the projected fields failed"
            report.detail = str(exc)
            return report
        U_fields = lifted + list(V_k.basis)
        G, zeta, P = G_next, zeta_next, span_next

    if not flat:
        report.reason = "iteration cap reached"
        report.detail = f"max_iter = {max_iter}"
        return report

    W_bar = Distribution.span(chart, accumulated)
    report.W_bar = W_bar
    if W_bar.dimension != n:
        report.reason = "accumulated shift distribution has unexpected dimension"
        report.detail = f"dim = {W_bar.dimension}, expected {n}"
        report.verdict = VERDICT_UNDECIDED
        return report
    report.verdict = VERDICT_FLAT
    try:
        outputs = first_integrals(W_bar, m, seed_integrals=zeta)
        report.flat_outputs = outputs
    except UnsolvableIntegralsError as exc:
        report.flat_outputs = None
        report.output_pdes = exc.pde_system
    return report


def _lift_projected(
    S_eff: DiscreteSystem,
    zeta: list[Expression],
    projected: list[VectorField],
    z_chart: Chart,
) -> list[VectorField]:
    """Reinterpret projected fields as current-time directions on the total
    chart: complete the unshifted stage functions to a state-chart basis and
    push the coefficients through the unshift identification."""
    state_chart = S_eff.state_chart
    n = state_chart.dim
    rows = [[differentiate(z, x).sym for x in state_chart.names] for z in zeta]
    funcs = list(zeta)
    rank = row_reduce(rows).rank if rows else 0
    if rank != len(zeta):
        raise RankDeficientError("unshifted stage functions are dependent")
    for i, coord in enumerate(state_chart.names):
        if rank == n:
            break
        unit = [sp.Integer(1) if j == i else sp.Integer(0) for j in range(n)]
        if row_reduce(rows + [unit]).rank > rank:
            rows.append(unit)
            rank += 1
            funcs.append(Expression.var(coord))
    if rank != n:
        raise RankDeficientError("could not complete the stage functions on the state chart")
    frame = dual_frame(state_chart, funcs)
    total = S_eff.total_chart
    z_to_zeta = dict(zip(z_chart.names, zeta))
    lifted = []
    for pf in projected:
        comps = [ZERO] * total.dim
        for j, c in enumerate(pf.components):
            if is_zero(c):
                continue
            coeff = _nf(substitute(c, z_to_zeta))
            for s_idx, fc in enumerate(frame[j].components):
                comps[s_idx] = comps[s_idx] + coeff * fc
        lifted.append(VectorField(total, tuple(_nf(c) for c in comps)))
    return lifted


# ---------------------------------------------------------------------------
# the advanced test (decomposition route)
# ---------------------------------------------------------------------------


def advanced_test(
    S: DiscreteSystem, max_iter: int | None = None, sampler: Sampler | None = None
) -> FlatnessReport:
    report = FlatnessReport(method="advanced", verdict=VERDICT_UNDECIDED)
    try:
        S_eff, record = eliminate_trivial_inputs(S, sampler)
    except TrivialInputError as exc:
        report.verdict = VERDICT_NOT_FLAT
        report.reason = "no effective inputs"
        report.detail = str(exc)
        return report
    report.trivial_record = record
    report.analyzed_system = S_eff
    max_iter = max_iter if max_iter is not None else S_eff.n

    current = S_eff
    fully_reduced = False
    for depth in range(max_iter):
        try:
            step = normal_form_step(current, sampler)
        except NoProjectableInputError:
            report.verdict = VERDICT_NOT_FLAT
            report.reason = "zero-dimensional projectable distribution"
            report.detail = f"no projectable input field at iteration {depth+1}"
            return report
        except NotReachableError as exc:
            report.verdict = VERDICT_NOT_FLAT
            report.reason = "not reachable"
            report.detail = str(exc)
            return report
        except CauchyMismatchError as exc:
            report.reason = "characteristic-distribution consistency check failed"
            report.detail = str(exc)
            return report
        except (UnsolvableIntegralsError, UnsupportedInversionError, UnstableFamilyError) as exc:
            report.reason = "closed-form construction out of reach"
            report.detail = str(exc)
            return report
        except DecompositionError as exc:
            report.reason = "decomposition step failed an internal consistency check"
            report.detail = str(exc)
            return report
        report.steps.append(step)
        if step.remaining is None:
            report.step_trivial_records.append(None)
            fully_reduced = True
            break
        try:
            nxt, rec = eliminate_trivial_inputs(step.remaining, sampler)
        except TrivialInputError:
            report.verdict = VERDICT_NOT_FLAT
            report.reason = "no effective inputs in the remaining subsystem"
            report.detail = f"after iteration {depth+1}"
            return report
        except RankDeficientError as exc:
            report.verdict = VERDICT_NOT_FLAT
            report.reason = "functionally dependent reduced dynamics"
            report.detail = str(exc)
            return report
        report.step_trivial_records.append(rec)
        current = nxt

    if not fully_reduced:
        report.reason = "iteration cap reached"
        report.detail = f"max_iter = {max_iter}"
        return report

    report.verdict = VERDICT_FLAT
    parametrization = _assemble_parametrization(report)
    report.parametrization = parametrization
    report.shifts = list(parametrization.shifts)
    target = S_eff if record.identity else S
    report.verification = verify_parametrization(target, parametrization, sampler)
    return report


class _OutputPool:
    """Allocates flat-variable names output by output."""

    def __init__(self):
        self.count = 0

    def fresh(self) -> Expression:
        self.count += 1
        return Expression.var(y_name(self.count, 0))


def _assemble_parametrization(report: FlatnessReport) -> FlatParametrization:
    """Back-substitute the chain: terminal inputs become flat variables and
    every step rebuilds its parent's states and inputs from the child's."""
    pool = _OutputPool()
    steps = report.steps
    # terminal: the last step absorbed every state; its would-be remaining
    # system has no states and m_w + m_v inputs, all free.
    last = steps[-1]
    child_states: list[Expression] = []
    child_inputs: list[Expression] = [pool.fresh() for _ in range(last.m_w + last.m_v)]
    for idx in range(len(steps) - 1, -1, -1):
        step = steps[idx]
        child_states, child_inputs = _lift_through_step(step, child_states, child_inputs)
        if idx > 0:
            # undo the trivial-input elimination that produced this step's
            # system from the previous step's remaining subsystem
            rec = report.step_trivial_records[idx - 1]
            state_values = dict(zip(step.system.states, child_states))
            child_inputs = _undo_trivial(rec, state_values, child_inputs, pool)
    state_values = dict(zip(report.analyzed_system.states, child_states))
    child_inputs = _undo_trivial(report.trivial_record, state_values, child_inputs, pool)
    f_x = tuple(_nf(e) for e in child_states)
    f_u = tuple(_nf(e) for e in child_inputs)
    shifts = _shift_depths(pool.count, f_x + f_u)
    base = report.analyzed_system
    src = report.trivial_record
    states = base.states
    inputs = src.original_inputs if src is not None and not src.identity else base.inputs
    return FlatParametrization(states, tuple(inputs), shifts, f_x, f_u)


def _lift_through_step(
    step: DecompositionStep, child_states: list[Expression], child_inputs: list[Expression]
) -> tuple[list[Expression], list[Expression]]:
    n, m_w, m_v = step.system.n, step.m_w, step.m_v
    n_red = n - m_w
    tilde_vals: dict[str, Expression] = {}
    for i in range(n_red):
        tilde_vals[step.tilde_chart.names[i]] = child_states[i]
    for j in range(m_w):
        tilde_vals[step.tilde_chart.names[n_red + j]] = child_inputs[j]
    v_vals = {vn: child_inputs[m_w + j] for j, vn in enumerate(step.v_names)}
    w_vals = {
        wn: shift_y_expression(child_inputs[j]) for j, wn in enumerate(step.w_names)
    }
    parent_states = [_nf(substitute(h_i, tilde_vals)) for h_i in step.h]
    state_sub = dict(zip(step.system.states, parent_states))
    parent_inputs = []
    for u in step.system.inputs:
        expr = substitute(step.q_inverse[u], {**state_sub, **v_vals, **w_vals})
        parent_inputs.append(_nf(expr))
    return parent_states, parent_inputs


def _undo_trivial(
    rec: TrivialInputRecord | None,
    state_values: dict[str, Expression],
    inputs: list[Expression],
    pool: _OutputPool,
) -> list[Expression]:
    """Rebuild the pre-elimination inputs; dropped ones become fresh outputs."""
    if rec is None or rec.identity:
        return inputs
    sub: dict[str, Expression] = dict(state_values)
    for name, expr in zip(rec.effective_inputs, inputs):
        sub[name] = expr
    for name in rec.dropped:
        sub[name] = pool.fresh()
    inverse = dict(rec.inverse)
    out = []
    for u in rec.original_inputs:
        if u in inverse:
            out.append(_nf(substitute(inverse[u], sub)))
        elif u in sub:
            # an input absent from the dynamics: its value is free
            out.append(sub[u])
        else:
            out.append(pool.fresh())
    return out


def _shift_depths(count: int, exprs: Sequence[Expression]) -> tuple[int, ...]:
    depths = [0] * count
    for e in exprs:
        for v in e.variables:
            match = _Y_PATTERN.match(v)
            if match:
                i, j = int(match.group(1)), int(match.group(2))
                depths[i - 1] = max(depths[i - 1], j)
    return tuple(depths)


# ---------------------------------------------------------------------------
# verification of the defining identity
# ---------------------------------------------------------------------------


def verify_parametrization(
    S: DiscreteSystem, F: FlatParametrization, sampler: Sampler | None = None
) -> VerificationReport:
    """Check F_x(shifted y) == f(F_x(y), F_u(y)) componentwise, that F is a
    submersion, that the right-hand side is independent of the zero-shift
    variables, and report rank(dF_x/dy_0)."""
    if tuple(S.states) != F.states or tuple(S.inputs) != F.inputs:
        raise ValueError("parametrization does not target this system's charts")
    table = {**dict(zip(S.states, F.f_x)), **dict(zip(S.inputs, F.f_u))}
    residuals = []
    failed = []
    rhs_components = []
    for i, f_i in enumerate(S.dynamics):
        rhs = _nf(substitute(f_i, table))
        rhs_components.append(rhs)
        lhs = shift_y_expression(F.f_x[i])
        res = _nf(lhs - rhs)
        residuals.append(res)
        if not is_zero(res):
            failed.append(i)
    all_vars = list(F.all_variables())
    jac = SymbolicMatrix.from_rows(
        [[differentiate(c, v) for v in all_vars] for c in list(F.f_x) + list(F.f_u)]
    )
    submersion_ok = generic_rank(jac, sampler) == S.n + S.m
    y0_vars = [y_name(i + 1, 0) for i in range(F.output_count)]
    y0_independent = all(
        is_zero(differentiate(rhs, v)) for rhs in rhs_components for v in y0_vars
    )
    jac0 = SymbolicMatrix.from_rows(
        [[differentiate(c, v) for v in y0_vars] for c in F.f_x]
    )
    rank0 = generic_rank(jac0, sampler)
    return VerificationReport(
        ok=not failed and submersion_ok,
        failed_components=tuple(failed),
        residuals=tuple(residuals),
        submersion_ok=submersion_ok,
        rank_dy0_fx=rank0,
        y0_independent=y0_independent,
    )


def corollary_check(report: FlatnessReport) -> tuple[bool | None, str]:
    """Flat outputs of a trivial-input-free flat system must be state-only."""
    if not report.is_flat:
        return None, "skipped: verdict is not flat"
    if report.trivial_record is None or not report.trivial_record.identity:
        return None, "skipped: system had trivial inputs"
    if not report.flat_outputs:
        return None, "skipped: no explicit flat outputs"
    states = set(report.analyzed_system.states)
    for y in report.flat_outputs:
        if not y.variables <= states:
            return False, f"output {render(y)} depends on inputs"
    return True, "all outputs are functions of the state only"
