"""Vector fields, differential forms and the calculus connecting them.

Forms are stored sparsely as maps from strictly increasing coordinate-index
tuples to expression coefficients; the wedge products the flatness tests
build reach degree n+1 on an (n+m)-dimensional chart, so sparse storage keeps
reports readable and diffs stable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import sympy as sp

from .exceptions import ChartMismatchError, RankDeficientError, UnsupportedInversionError
from .expr_core import (
    Expression,
    Sampler,
    SymbolicMatrix,
    ZERO,
    ONE,
    differentiate,
    equal,
    express_in_generators,
    generic_rank,
    is_zero,
    nullspace,
    render,
    substitute,
)

__all__ = [
    "Chart",
    "VectorField",
    "DifferentialForm",
    "MapBetweenCharts",
    "wedge",
    "exterior_derivative",
    "interior_product",
    "lie_bracket",
    "pullback",
    "dual_frame",
    "pushforward_along_submersion",
    "kernel_fields",
    "differential",
    "PushforwardResult",
    "factors_through",
    "express_through_map",
]


@dataclass(frozen=True)
class Chart:
    """Ordered coordinate names; the order fixes component indices."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("chart names must be unique")

    @staticmethod
    def of(names: Iterable[str]) -> "Chart":
        return Chart(tuple(names))

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def coordinate(self, i: int) -> Expression:
        return Expression.var(self.names[i])


@dataclass(frozen=True)
class VectorField:
    """Components with respect to the coordinate frame d/dx_i."""

    chart: Chart
    components: tuple[Expression, ...]

    def __post_init__(self):
        if len(self.components) != self.chart.dim:
            raise ValueError("component count must equal the chart dimension")

    @staticmethod
    def from_components(chart: Chart, comps: Sequence[Expression]) -> "VectorField":
        return VectorField(chart, tuple(comps))

    @staticmethod
    def coordinate(chart: Chart, name: str) -> "VectorField":
        i = chart.index(name)
        return VectorField(chart, tuple(ONE if j == i else ZERO for j in range(chart.dim)))

    def apply_to(self, f: Expression) -> Expression:
        """Directional derivative v(f)."""
        out = ZERO
        for name, c in zip(self.chart.names, self.components):
            out = out + c * differentiate(f, name)
        return out

    def scale(self, a: Expression) -> "VectorField":
        return VectorField(self.chart, tuple(a * c for c in self.components))

    def add(self, other: "VectorField") -> "VectorField":
        _same_chart(self.chart, other.chart)
        return VectorField(self.chart, tuple(a + b for a, b in zip(self.components, other.components)))

    def is_zero_field(self) -> bool:
        return all(is_zero(c) for c in self.components)

    def __str__(self) -> str:
        parts = []
        for name, c in zip(self.chart.names, self.components):
            if not is_zero(c):
                parts.append(f"{render(c)}*d/d{name}")
        return " + ".join(parts) if parts else "0"


@dataclass(frozen=True)
class DifferentialForm:
    """Degree-p form; terms keyed by strictly increasing index tuples."""

    chart: Chart
    degree: int
    terms: tuple[tuple[tuple[int, ...], Expression], ...]

    @staticmethod
    def make(chart: Chart, degree: int, terms: Mapping[tuple[int, ...], Expression]) -> "DifferentialForm":
        if degree > chart.dim:
            return DifferentialForm(chart, degree, ())
        cleaned = []
        for idx in sorted(terms):
            if list(idx) != sorted(set(idx)):
                raise ValueError(f"index tuple {idx} is not strictly increasing")
            if len(idx) != degree:
                raise ValueError("index tuple length must equal the degree")
            coeff = terms[idx]
            if not is_zero(coeff):
                cleaned.append((idx, coeff))
        return DifferentialForm(chart, degree, tuple(cleaned))

    @staticmethod
    def zero(chart: Chart, degree: int) -> "DifferentialForm":
        return DifferentialForm(chart, degree, ())

    @staticmethod
    def function(chart: Chart, value: Expression) -> "DifferentialForm":
        return DifferentialForm.make(chart, 0, {(): value})

    @staticmethod
    def basis_one_form(chart: Chart, name: str) -> "DifferentialForm":
        return DifferentialForm.make(chart, 1, {(chart.index(name),): ONE})

    @staticmethod
    def one_form(chart: Chart, comps: Sequence[Expression]) -> "DifferentialForm":
        return DifferentialForm.make(chart, 1, {(i,): c for i, c in enumerate(comps)})

    def coefficient(self, idx: tuple[int, ...]) -> Expression:
        for k, v in self.terms:
            if k == idx:
                return v
        return ZERO

    def one_form_components(self) -> tuple[Expression, ...]:
        if self.degree != 1:
            raise ValueError("not a one-form")
        comps = [ZERO] * self.chart.dim
        for (i,), c in self.terms:
            comps[i] = c
        return tuple(comps)

    def is_zero_form(self) -> bool:
        return not self.terms

    def add(self, other: "DifferentialForm") -> "DifferentialForm":
        _same_chart(self.chart, other.chart)
        if self.degree != other.degree:
            raise ValueError("cannot add forms of different degree")
        acc = {idx: c for idx, c in self.terms}
        for idx, c in other.terms:
            acc[idx] = acc.get(idx, ZERO) + c
        return DifferentialForm.make(self.chart, self.degree, acc)

    def scale(self, a: Expression) -> "DifferentialForm":
        return DifferentialForm.make(self.chart, self.degree, {i: a * c for i, c in self.terms})

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for idx, c in self.terms:
            basis = "^".join("d" + self.chart.names[i] for i in idx)
            if self.degree == 0:
                parts.append(render(c))
            elif equal(c, ONE):
                parts.append(basis)
            else:
                parts.append(f"{render(c)}*{basis}")
        return " + ".join(parts)


@dataclass(frozen=True)
class MapBetweenCharts:
    """Smooth map: one expression on the source chart per target coordinate."""

    source: Chart
    target: Chart
    components: tuple[Expression, ...]

    def __post_init__(self):
        if len(self.components) != self.target.dim:
            raise ValueError("component count must equal the target dimension")

    @staticmethod
    def make(source: Chart, target: Chart, comps: Sequence[Expression]) -> "MapBetweenCharts":
        return MapBetweenCharts(source, target, tuple(comps))

    def jacobian(self) -> SymbolicMatrix:
        return SymbolicMatrix.from_rows(
            [[differentiate(c, v) for v in self.source.names] for c in self.components]
        )

    def compose_scalar(self, f: Expression) -> Expression:
        """Pull a target-chart scalar back to the source chart."""
        return substitute(f, dict(zip(self.target.names, self.components)))


def _same_chart(a: Chart, b: Chart) -> None:
    if a != b:
        raise ChartMismatchError(f"charts differ: {a.names} vs {b.names}")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    """Wedge product; degree overflow collapses to the zero form."""
    _same_chart(a.chart, b.chart)
    degree = a.degree + b.degree
    if degree > a.chart.dim:
        return DifferentialForm.zero(a.chart, degree)
    acc: dict[tuple[int, ...], Expression] = {}
    for ia, ca in a.terms:
        for ib, cb in b.terms:
            if set(ia) & set(ib):
                continue
            merged, sign = _merge_indices(ia, ib)
            coeff = ca * cb if sign > 0 else -(ca * cb)
            acc[merged] = acc.get(merged, ZERO) + coeff
    return DifferentialForm.make(a.chart, degree, acc)


def _merge_indices(ia: tuple[int, ...], ib: tuple[int, ...]) -> tuple[tuple[int, ...], int]:
    seq = list(ia) + list(ib)
    sign = 1
    # insertion sort, counting transpositions
    for i in range(1, len(seq)):
        j = i
        while j > 0 and seq[j - 1] > seq[j]:
            seq[j - 1], seq[j] = seq[j], seq[j - 1]
            sign = -sign
            j -= 1
    return tuple(seq), sign


def wedge_all(forms: Sequence[DifferentialForm]) -> DifferentialForm:
    out = forms[0]
    for f in forms[1:]:
        out = wedge(out, f)
    return out


def differential(chart: Chart, f: Expression) -> DifferentialForm:
    """d of a 0-form given as a scalar."""
    return DifferentialForm.make(
        chart, 1, {(i,): differentiate(f, n) for i, n in enumerate(chart.names)}
    )


def exterior_derivative(omega: DifferentialForm) -> DifferentialForm:
    chart = omega.chart
    acc: dict[tuple[int, ...], Expression] = {}
    for idx, c in omega.terms:
        for j, name in enumerate(chart.names):
            if j in idx:
                continue
            dc = differentiate(c, name)
            if is_zero(dc):
                continue
            merged, sign = _merge_indices((j,), idx)
            term = dc if sign > 0 else -dc
            acc[merged] = acc.get(merged, ZERO) + term
    return DifferentialForm.make(chart, omega.degree + 1, acc)


def interior_product(v: VectorField, omega: DifferentialForm) -> DifferentialForm:
    _same_chart(v.chart, omega.chart)
    if omega.degree < 1:
        raise ValueError("interior product needs degree >= 1")
    acc: dict[tuple[int, ...], Expression] = {}
    for idx, c in omega.terms:
        for k, i in enumerate(idx):
            comp = v.components[i]
            if is_zero(comp):
                continue
            rest = idx[:k] + idx[k + 1 :]
            term = comp * c
            if k % 2 == 1:
                term = -term
            acc[rest] = acc.get(rest, ZERO) + term
    return DifferentialForm.make(omega.chart, omega.degree - 1, acc)


def pairing(omega: DifferentialForm, v: VectorField) -> Expression:
    """<omega, v> for a one-form."""
    return interior_product(v, omega).coefficient(())


def lie_bracket(v: VectorField, w: VectorField) -> VectorField:
    _same_chart(v.chart, w.chart)
    comps = []
    for k in range(v.chart.dim):
        comps.append(v.apply_to(w.components[k]) - w.apply_to(v.components[k]))
    return VectorField(v.chart, tuple(comps))


def pullback(phi: MapBetweenCharts, omega: DifferentialForm) -> DifferentialForm:
    """phi^* omega; commutes with d and distributes over the wedge."""
    if omega.chart != phi.target:
        raise ChartMismatchError("form must live on the target chart of the map")
    if omega.degree == 0:
        return DifferentialForm.function(phi.source, phi.compose_scalar(omega.coefficient(())))
    out = DifferentialForm.zero(phi.source, omega.degree)
    for idx, c in omega.terms:
        pulled = DifferentialForm.function(phi.source, phi.compose_scalar(c))
        parts = [differential(phi.source, phi.components[i]) for i in idx]
        term = parts[0]
        for p in parts[1:]:
            term = wedge(term, p)
        out = out.add(_scale_form(term, pulled.coefficient(())))
    return out


def _scale_form(f: DifferentialForm, a: Expression) -> DifferentialForm:
    return f.scale(a)


def dual_frame(chart: Chart, basis_functions: Sequence[Expression], sampler: Sampler | None = None) -> list[VectorField]:
    """Fields d/df_i with <df_j, d/df_i> = delta_i^j.

    Requires as many functions as coordinates with a generically invertible
    Jacobian; computed by solving J c_i = e_i over the expression field.
    """
    n = chart.dim
    if len(basis_functions) != n:
        raise ValueError("need exactly dim-many basis functions")
    jac = [[differentiate(f, v).sym for v in chart.names] for f in basis_functions]
    if generic_rank(SymbolicMatrix.from_rows([[Expression(x) for x in r] for r in jac]), sampler) != n:
        raise RankDeficientError("the given functions are not basis functions")
    # invert J once: augmented elimination
    from .expr_core import row_reduce

    aug = [row + [sp.Integer(1) if i == j else sp.Integer(0) for j in range(n)] for i, row in enumerate(jac)]
    red = row_reduce(aug)
    inv = [[red.rref[i][n + j] for j in range(n)] for i in range(n)]
    frames = []
    for i in range(n):
        comps = tuple(Expression(inv[k][i]) for k in range(n))
        frames.append(VectorField(chart, comps))
    return frames


@dataclass(frozen=True)
class PushforwardResult:
    """Pushforward components plus the projectability outcome.

    When `projected` is true, `field` carries target-chart coefficients;
    otherwise the coefficients still involve source variables and `raw`
    holds them unrewritten.
    """

    field: VectorField
    projected: bool
    raw: tuple[Expression, ...]


def pushforward_along_submersion(
    f: MapBetweenCharts, v: VectorField, sampler: Sampler | None = None
) -> PushforwardResult:
    if v.chart != f.source:
        raise ChartMismatchError("field must live on the source chart")
    jac = f.jacobian()
    raw = tuple(
        sum((jac.entry(j, i) * v.components[i] for i in range(f.source.dim)), ZERO)
        for j in range(f.target.dim)
    )
    rewritten: list[Expression] = []
    for c in raw:
        if is_zero(c):
            rewritten.append(ZERO)
            continue
        if not factors_through(f, c):
            return PushforwardResult(VectorField(f.target, raw), False, raw)
        out = express_through_map(f, c)
        if out is None:
            return PushforwardResult(VectorField(f.target, raw), False, raw)
        rewritten.append(out)
    return PushforwardResult(VectorField(f.target, tuple(rewritten)), True, raw)


def factors_through(f: MapBetweenCharts, g: Expression) -> bool:
    """Ring membership g in f^*(C^inf(target)) by the wedge criterion:
    dg ^ df^1 ^ ... ^ df^n == 0."""
    vol = wedge_all([differential(f.source, c) for c in f.components])
    test = wedge(differential(f.source, g), vol)
    return test.is_zero_form()


def express_through_map(f: MapBetweenCharts, g: Expression, max_degree: int = 2) -> Expression | None:
    """Rewrite g as a function of the target coordinates, i.e. find Phi with
    Phi o f == g.  Tries the linear ansatz first, then completion+inversion."""
    phi = express_in_generators(g, list(f.components), list(f.target.names), max_degree)
    if phi is not None:
        return phi
    try:
        full, names = _completed_map(f)
        inverse = {}
        from .expr_core import solve_map_inverse

        inverse = solve_map_inverse(list(zip(names, full)), list(f.source.names))
        rewritten = substitute(g, inverse)
        extra = set(names[f.target.dim :])
        if rewritten.variables & extra:
            return None
        return rewritten
    except (UnsupportedInversionError, RankDeficientError):
        return None


def _completed_map(f: MapBetweenCharts) -> tuple[list[Expression], list[str]]:
    """Complete the submersion components to a full basis-function system by
    greedily adding source coordinates that raise the Jacobian rank."""
    rows = [[differentiate(c, v).sym for v in f.source.names] for c in f.components]
    funcs = list(f.components)
    names = list(f.target.names)
    from .expr_core import row_reduce

    rank = row_reduce(rows).rank
    for i, coord in enumerate(f.source.names):
        if rank == f.source.dim:
            break
        cand = rows + [[sp.Integer(1) if j == i else sp.Integer(0) for j in range(f.source.dim)]]
        r2 = row_reduce(cand).rank
        if r2 > rank:
            rows = cand
            rank = r2
            funcs.append(Expression.var(coord))
            names.append(f"_c_{coord}")
    if rank != f.source.dim:
        raise RankDeficientError("could not complete the map to a coordinate system")
    return funcs, names


def kernel_fields(f: MapBetweenCharts, sampler: Sampler | None = None) -> list[VectorField]:
    """Basis of ker(f_*), dimension source - target for a submersion."""
    jac = f.jacobian()
    vecs = nullspace([[e.sym for e in row] for row in jac.entries], f.source.dim)
    return [VectorField(f.source, tuple(Expression(x) for x in v)) for v in vecs]
