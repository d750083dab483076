"""Discrete-time system model and projectable-input-field computation.

A field v in the input distribution is projectable along the system map f
iff every pushforward component lies in the pulled-back function ring of the
image; after normalizing a spanning family, that membership turns into
linear wedge equations in the unknown multipliers (one top-degree form per
component), which is how `projectable_fields` decides the question.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import sympy as sp

from .exceptions import RankDeficientError, TrivialInputError
from .expr_core import (
    Expression,
    Sampler,
    SymbolicMatrix,
    ZERO,
    ONE,
    complexity,
    differentiate,
    generic_rank,
    is_zero,
    render,
    row_reduce,
    solve_map_inverse,
    substitute,
)
from .exterior import (
    Chart,
    DifferentialForm,
    MapBetweenCharts,
    VectorField,
    differential,
    dual_frame,
    express_through_map,
    wedge,
    wedge_all,
)
from .distributions import Distribution, involutive_complement, is_involutive

__all__ = [
    "DiscreteSystem",
    "InputSplit",
    "TrivialInputRecord",
    "ProjectableFieldsResult",
    "eliminate_trivial_inputs",
    "projectable_fields",
    "projectable_input_fields",
    "pushforward_basis_method",
    "PushforwardBasisReport",
]


def shifted_name(name: str) -> str:
    return name + "_p"


@dataclass(frozen=True)
class DiscreteSystem:
    """x_plus = f(x, u) with exact rational right-hand sides.

    The map components must be functionally independent (f a submersion);
    otherwise the system is locally not reachable and is rejected here.
    """

    states: tuple[str, ...]
    inputs: tuple[str, ...]
    dynamics: tuple[Expression, ...]

    def __post_init__(self):
        if not self.states or not self.inputs:
            raise ValueError("need at least one state and one input")
        if len(self.dynamics) != len(self.states):
            raise ValueError("one dynamics component per state required")
        allowed = set(self.states) | set(self.inputs)
        for d in self.dynamics:
            extra = d.variables - allowed
            if extra:
                raise ValueError(f"dynamics use undeclared variables {sorted(extra)}")
        jac = SymbolicMatrix.from_rows(
            [[differentiate(d, v) for v in self.states + self.inputs] for d in self.dynamics]
        )
        if generic_rank(jac) != len(self.states):
            raise RankDeficientError(
                "dynamics components are functionally dependent: system not a submersion"
            )

    @staticmethod
    def from_strings(states: Sequence[str], inputs: Sequence[str], dynamics: Sequence[str]) -> "DiscreteSystem":
        from .expr_core import parse

        allowed = list(states) + list(inputs)
        return DiscreteSystem(tuple(states), tuple(inputs), tuple(parse(d, allowed) for d in dynamics))

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def m(self) -> int:
        return len(self.inputs)

    @property
    def total_chart(self) -> Chart:
        return Chart.of(self.states + self.inputs)

    @property
    def state_chart(self) -> Chart:
        return Chart.of(self.states)

    @property
    def shifted_names(self) -> tuple[str, ...]:
        return tuple(shifted_name(s) for s in self.states)

    @property
    def shifted_chart(self) -> Chart:
        return Chart.of(self.shifted_names)

    def as_map(self) -> MapBetweenCharts:
        return MapBetweenCharts.make(self.total_chart, self.shifted_chart, self.dynamics)

    def input_fields(self) -> list[VectorField]:
        return [VectorField.coordinate(self.total_chart, u) for u in self.inputs]

    def input_distribution(self) -> Distribution:
        return Distribution.span(self.total_chart, self.input_fields())

    def input_rank(self, sampler: Sampler | None = None) -> int:
        jac = SymbolicMatrix.from_rows(
            [[differentiate(d, u) for u in self.inputs] for d in self.dynamics]
        )
        return generic_rank(jac, sampler)

    def __str__(self) -> str:
        lines = [f"{shifted_name(s)} = {render(d)}" for s, d in zip(self.states, self.dynamics)]
        return "\n".join(lines)


@dataclass(frozen=True)
class TrivialInputRecord:
    """How the inputs were resorted; identity when nothing was trivial."""

    original_inputs: tuple[str, ...]
    effective_inputs: tuple[str, ...]
    dropped: tuple[str, ...]
    transform: tuple[tuple[str, Expression], ...]  # new input name -> expr in (x, u)
    inverse: tuple[tuple[str, Expression], ...]  # old input name -> expr in (x, new inputs)

    @property
    def identity(self) -> bool:
        return not self.dropped


def eliminate_trivial_inputs(
    S: DiscreteSystem, sampler: Sampler | None = None
) -> tuple[DiscreteSystem, TrivialInputRecord]:
    """Make every input effective: rank(df/du) equals the input count.

    Inputs that simply do not occur are dropped in place.  Otherwise an
    invertible input transform built from dynamics components (resorted
    deterministically, simplest first) renames the effective directions.
    """
    m_u = S.input_rank(sampler)
    if m_u == S.m:
        record = TrivialInputRecord(S.inputs, S.inputs, (), tuple(), tuple())
        return S, record
    if m_u == 0:
        raise TrivialInputError("no effective inputs: every input is trivial")
    occurring = tuple(u for u in S.inputs if any(u in d.variables for d in S.dynamics))
    if len(occurring) == m_u:
        dropped = tuple(u for u in S.inputs if u not in occurring)
        reduced = DiscreteSystem(S.states, occurring, S.dynamics)
        record = TrivialInputRecord(
            S.inputs,
            occurring,
            dropped,
            tuple((u, Expression.var(u)) for u in occurring),
            tuple((u, Expression.var(u)) for u in occurring),
        )
        return reduced, record
    # resort: pick m_u dynamics components with full input rank, ordered by
    # (complexity, index); complete with input coordinates.
    order = sorted(range(S.n), key=lambda i: (complexity(S.dynamics[i]), i))
    selection = None
    for combo in itertools.combinations(order, m_u):
        jac = SymbolicMatrix.from_rows(
            [[differentiate(S.dynamics[i], u) for u in S.inputs] for i in combo]
        )
        if generic_rank(jac, sampler) == m_u:
            selection = combo
            break
    if selection is None:
        raise TrivialInputError("no dynamics selection yields an invertible input transform")
    new_names = tuple(f"ub{i+1}" for i in range(S.m))
    t_components: list[Expression] = [S.dynamics[i] for i in selection]
    rows = [[differentiate(c, u).sym for u in S.inputs] for c in t_components]
    for j, u in enumerate(S.inputs):
        if len(t_components) == S.m:
            break
        unit = [sp.Integer(1) if k == j else sp.Integer(0) for k in range(S.m)]
        if row_reduce(rows + [unit]).rank > row_reduce(rows).rank:
            rows.append(unit)
            t_components.append(Expression.var(u))
    inverse = solve_map_inverse(list(zip(new_names, t_components)), list(S.inputs))
    new_dynamics = tuple(substitute(d, inverse) for d in S.dynamics)
    trivial_names = new_names[m_u:]
    for d in new_dynamics:
        leak = d.variables & set(trivial_names)
        if leak:
            raise TrivialInputError(f"trivial block still occurs after resorting: {sorted(leak)}")
    reduced = DiscreteSystem(S.states, new_names[:m_u], new_dynamics)
    record = TrivialInputRecord(
        S.inputs,
        new_names[:m_u],
        trivial_names,
        tuple(zip(new_names, t_components)),
        tuple((u, inverse[u]) for u in S.inputs),
    )
    return reduced, record


# ---------------------------------------------------------------------------
# projectable fields: the lambda-wedge schema
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProjectabilityRound:
    normalization_columns: tuple[int, ...]
    lambda_basis: tuple[tuple[Expression, ...], ...]


@dataclass(frozen=True)
class ProjectableFieldsResult:
    fields: tuple[VectorField, ...]  # basis of W on the source chart
    projected: tuple[VectorField, ...]  # pushforwards with image-chart coefficients
    trivial_directions: tuple[VectorField, ...]  # input directions inside ker f_*
    rounds: tuple[ProjectabilityRound, ...]
    stable: bool

    @property
    def dimension(self) -> int:
        return len(self.fields)


def projectable_fields(
    chart: Chart,
    map_components: Sequence[Expression],
    image_chart: Chart,
    candidate_fields: Sequence[VectorField],
    max_rounds: int | None = None,
) -> ProjectableFieldsResult:
    """All fields in the candidate span whose pushforward along the map given
    by `map_components` lives on the image.

    Repeats the normalize-and-solve round on the solution family until the
    family is stable, capped at one round per candidate (each unstable round
    strictly shrinks the family).
    """
    submap = MapBetweenCharts.make(chart, image_chart, tuple(map_components))
    vol = wedge_all([differential(chart, g) for g in map_components])
    rounds: list[ProjectabilityRound] = []
    current = list(candidate_fields)
    trivial: list[VectorField] = []
    max_rounds = max_rounds if max_rounds is not None else max(1, len(current)) + 1
    stable = False
    normalized: list[VectorField] = []
    comp_rows: list[list[Expression]] = []

    for round_no in range(max_rounds):
        if not current:
            stable = True
            break
        matrix = [[v.apply_to(g) for g in map_components] for v in current]
        red = row_reduce([[e.sym for e in row] for row in matrix])
        pivot_rows = [r for r, _ in red.pivots]
        normalized = []
        comp_rows = []
        for r in pivot_rows:
            f = _combine(chart, current, red.transform[r])
            normalized.append(f)
            comp_rows.append([Expression(x) for x in red.rref[r]])
        # directions with zero pushforward live in ker f_* : trivial inputs
        if round_no == 0:
            for r in range(len(current)):
                if r not in pivot_rows:
                    t = _combine(chart, current, red.transform[r])
                    if not t.is_zero_field():
                        trivial.append(t)
        d = len(normalized)
        if d == 0:
            rounds.append(ProjectabilityRound((), ()))
            stable = True
            current = []
            break
        pivot_cols = tuple(c for _, c in red.pivots)
        eq_rows: list[list[sp.Expr]] = []
        for i in range(d):
            for j in range(len(map_components)):
                form = wedge(differential(chart, comp_rows[i][j]), vol)
                for _, coeff in form.terms:
                    row = [sp.Integer(0)] * d
                    row[i] = coeff.sym
                    eq_rows.append(row)
        from .expr_core import nullspace

        solutions = nullspace(eq_rows, d) if eq_rows else nullspace([], d)
        rounds.append(
            ProjectabilityRound(
                pivot_cols,
                tuple(tuple(Expression(x) for x in v) for v in solutions),
            )
        )
        if len(solutions) == d:
            stable = True
            current = normalized
            break
        if not solutions:
            stable = True
            current = []
            break
        current = [
            _combine_expr(chart, normalized, [Expression(x) for x in v]) for v in solutions
        ]
    fields = tuple(current)
    projected = tuple(
        _project(submap, comp_rows[i]) for i in range(len(fields))
    ) if stable and fields else tuple()
    return ProjectableFieldsResult(fields, projected, tuple(trivial), tuple(rounds), stable)


def _pair(chart: Chart, g: Expression, v: VectorField) -> Expression:
    return v.apply_to(g)


def _combine(chart: Chart, fields: list[VectorField], coeffs: list[sp.Expr]) -> VectorField:
    out = VectorField(chart, tuple(ZERO for _ in range(chart.dim)))
    for c, f in zip(coeffs, fields):
        if c != 0:
            out = out.add(f.scale(Expression(c)))
    return out


def _combine_expr(chart: Chart, fields: list[VectorField], coeffs: list[Expression]) -> VectorField:
    out = VectorField(chart, tuple(ZERO for _ in range(chart.dim)))
    for c, f in zip(coeffs, fields):
        if not is_zero(c):
            out = out.add(f.scale(c))
    return out


def _project(submap: MapBetweenCharts, comps: list[Expression]) -> VectorField:
    out: list[Expression] = []
    for c in comps:
        if is_zero(c):
            out.append(ZERO)
            continue
        phi = express_through_map(submap, c)
        if phi is None:
            raise RankDeficientError(
                f"projectable component {render(c)} could not be rewritten on the image chart"
            )
        out.append(phi)
    return VectorField(submap.target, tuple(out))


@dataclass(frozen=True)
class InputSplit:
    """W + V = U with W the to-be-shifted directions."""

    W: Distribution
    V: Distribution
    m_w: int
    m_v: int
    result: ProjectableFieldsResult


def projectable_input_fields(
    S: DiscreteSystem, sampler: Sampler | None = None
) -> tuple[Distribution, InputSplit]:
    """Maximal projectable input distribution W plus an involutive complement."""
    if S.input_rank(sampler) != S.m:
        raise TrivialInputError("eliminate trivial inputs before the projectability test")
    res = projectable_fields(
        S.total_chart, list(S.dynamics), S.shifted_chart, S.input_fields()
    )
    W = Distribution.span(S.total_chart, list(res.fields))
    U = S.input_distribution()
    V = involutive_complement(W, U)
    return W, InputSplit(W, V, W.dimension, V.dimension, res)


# ---------------------------------------------------------------------------
# the dual-frame route (cross-check method)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PushforwardBasisReport:
    completion: tuple[Expression, ...]  # coordinate functions appended to f
    frame: tuple[VectorField, ...]  # d/df_1 ... d/df_{n+m}
    input_coefficients: tuple[tuple[Expression, ...], ...]  # du_i in the frame
    W: Distribution
    agrees_with_wedge_method: bool


def pushforward_basis_method(
    S: DiscreteSystem, sampler: Sampler | None = None
) -> PushforwardBasisReport:
    """Express the input directions in a dual frame of a basis completion of f
    and report the projectable combinations; cross-checked against the wedge
    method on W."""
    chart = S.total_chart
    rows = [[differentiate(d, v).sym for v in chart.names] for d in S.dynamics]
    funcs: list[Expression] = list(S.dynamics)
    completion: list[Expression] = []
    rank = row_reduce(rows).rank
    for i, coord in enumerate(chart.names):
        if rank == chart.dim:
            break
        unit = [sp.Integer(1) if j == i else sp.Integer(0) for j in range(chart.dim)]
        if row_reduce(rows + [unit]).rank > rank:
            rows.append(unit)
            rank += 1
            funcs.append(Expression.var(coord))
            completion.append(Expression.var(coord))
    if rank != chart.dim:
        raise RankDeficientError("no coordinate subset completes f to basis functions")
    frame = dual_frame(chart, funcs, sampler)
    coeffs = tuple(
        tuple(differentiate(f, u) for f in funcs) for u in S.inputs
    )
    res = projectable_fields(chart, list(S.dynamics), S.shifted_chart, S.input_fields())
    W_frame = Distribution.span(chart, list(res.fields))
    W_wedge, _split = projectable_input_fields(S, sampler)
    return PushforwardBasisReport(
        tuple(completion), tuple(frame), coeffs, W_frame, W_wedge.span_equals(W_frame)
    )
