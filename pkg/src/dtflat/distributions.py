"""Distributions and codistributions as finitely generated modules.

Reduced bases come from symbolic row echelon with exact zero-tested pivots,
ties broken by lowest coordinate index, so reports are reproducible.  All
span and dimension statements are generic-point statements.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import sympy as sp

from .exceptions import ComplementConstructionError, UnsolvableIntegralsError
from .expr_core import (
    Expression,
    Sampler,
    SymbolicMatrix,
    ZERO,
    ONE,
    canonicalize_function,
    differentiate,
    generic_rank,
    is_zero,
    nullspace,
    render,
    row_reduce,
)
from .exterior import (
    Chart,
    DifferentialForm,
    VectorField,
    differential,
    exterior_derivative,
    interior_product,
    lie_bracket,
    pairing,
    wedge,
    wedge_all,
)

__all__ = [
    "Distribution",
    "Codistribution",
    "annihilator",
    "annihilator_of_codistribution",
    "is_involutive",
    "largest_annihilated_subcodistribution",
    "cauchy_characteristic",
    "involutive_complement",
    "first_integrals",
]


def _reduce_rows(rows: list[list[sp.Expr]]) -> list[list[sp.Expr]]:
    if not rows:
        return []
    red = row_reduce(rows)
    return [red.rref[r] for r, _ in red.pivots]


@dataclass(frozen=True)
class Distribution:
    """Span of finitely many vector fields, with a cached reduced basis."""

    chart: Chart
    generators: tuple[VectorField, ...]
    basis: tuple[VectorField, ...] = field(init=False)

    def __post_init__(self):
        rows = [[c.sym for c in g.components] for g in self.generators]
        reduced = _reduce_rows(rows)
        fields = tuple(
            VectorField(self.chart, tuple(Expression(x) for x in r)) for r in reduced
        )
        object.__setattr__(self, "basis", fields)

    @staticmethod
    def span(chart: Chart, fields: Sequence[VectorField]) -> "Distribution":
        return Distribution(chart, tuple(fields))

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def component_matrix(self) -> SymbolicMatrix:
        return SymbolicMatrix.from_rows([list(b.components) for b in self.basis])

    def contains(self, v: VectorField) -> bool:
        rows = [[c.sym for c in b.components] for b in self.basis]
        stacked = rows + [[c.sym for c in v.components]]
        return row_reduce(stacked).rank == len(rows) if rows else v.is_zero_field()

    def contains_all(self, other: "Distribution") -> bool:
        return all(self.contains(b) for b in other.basis)

    def span_equals(self, other: "Distribution") -> bool:
        return self.dimension == other.dimension and self.contains_all(other)

    def __str__(self) -> str:
        return "span({" + ", ".join(str(b) for b in self.basis) + "})"


@dataclass(frozen=True)
class Codistribution:
    """Span of finitely many one-forms, with a cached reduced basis."""

    chart: Chart
    generators: tuple[DifferentialForm, ...]
    basis: tuple[DifferentialForm, ...] = field(init=False)

    def __post_init__(self):
        for g in self.generators:
            if g.degree != 1:
                raise ValueError("codistribution generators must be one-forms")
        rows = [[c.sym for c in g.one_form_components()] for g in self.generators]
        reduced = _reduce_rows(rows)
        forms = tuple(
            DifferentialForm.one_form(self.chart, [Expression(x) for x in r]) for r in reduced
        )
        object.__setattr__(self, "basis", forms)

    @staticmethod
    def span(chart: Chart, forms: Sequence[DifferentialForm]) -> "Codistribution":
        return Codistribution(chart, tuple(forms))

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def contains(self, omega: DifferentialForm) -> bool:
        rows = [[c.sym for c in b.one_form_components()] for b in self.basis]
        stacked = rows + [[c.sym for c in omega.one_form_components()]]
        return row_reduce(stacked).rank == len(rows) if rows else omega.is_zero_form()

    def contains_all(self, other: "Codistribution") -> bool:
        return all(self.contains(b) for b in other.basis)

    def span_equals(self, other: "Codistribution") -> bool:
        return self.dimension == other.dimension and self.contains_all(other)

    def volume_form(self) -> DifferentialForm:
        return wedge_all(list(self.basis))

    def __str__(self) -> str:
        return "span({" + ", ".join(str(b) for b in self.basis) + "})"


# ---------------------------------------------------------------------------


def annihilator(D: Distribution) -> Codistribution:
    """The codistribution pairing to zero with D."""
    rows = [[c.sym for c in b.components] for b in D.basis]
    vecs = nullspace(rows, D.chart.dim)
    forms = [
        DifferentialForm.one_form(D.chart, [Expression(x) for x in v]) for v in vecs
    ]
    return Codistribution.span(D.chart, forms)


def annihilator_of_codistribution(P: Codistribution) -> Distribution:
    rows = [[c.sym for c in b.one_form_components()] for b in P.basis]
    vecs = nullspace(rows, P.chart.dim)
    fields = [VectorField(P.chart, tuple(Expression(x) for x in v)) for v in vecs]
    return Distribution.span(P.chart, fields)


def intersect(D1: Distribution, D2: Distribution) -> Distribution:
    """Generic-point intersection via annihilators."""
    combined = Codistribution.span(
        D1.chart, list(annihilator(D1).basis) + list(annihilator(D2).basis)
    )
    return annihilator_of_codistribution(combined)


def is_involutive(D: Distribution) -> bool:
    """[D, D] inside D, tested on all reduced-basis pairs."""
    for a, b in itertools.combinations(D.basis, 2):
        if not D.contains(lie_bracket(a, b)):
            return False
    return True


def largest_annihilated_subcodistribution(P: Codistribution, W: Distribution) -> Codistribution:
    """Largest subcodistribution of P with W _| P' = 0.

    A generic element sum a_i omega_i is imposed to pair to zero with every
    basis field of W; the a_i solve a linear system over the expression field.
    """
    if P.dimension == 0 or W.dimension == 0:
        return P
    rows = []
    for w in W.basis:
        rows.append([pairing(omega, w).sym for omega in P.basis])
    vecs = nullspace(rows, P.dimension)
    forms = []
    for v in vecs:
        omega = DifferentialForm.zero(P.chart, 1)
        for coeff, gen in zip(v, P.basis):
            omega = omega.add(gen.scale(Expression(coeff)))
        forms.append(omega)
    return Codistribution.span(P.chart, forms)


def cauchy_characteristic(P: Codistribution, check: bool = True) -> Distribution:
    """Largest C with C _| P = 0 and C _| dP inside P.

    Solved as one linear system over the expression field in the coordinate
    components of the unknown field; the module conditions reduce to the
    reduced basis of P.
    """
    chart = P.chart
    n = chart.dim
    if P.dimension == 0:
        fields = [VectorField.coordinate(chart, nm) for nm in chart.names]
        return Distribution.span(chart, fields)
    unknown = [sp.Symbol(f"_c{i}") for i in range(n)]
    rows: list[list[sp.Expr]] = []
    # v _| omega = 0 for every basis form
    for omega in P.basis:
        comps = omega.one_form_components()
        rows.append([comps[i].sym for i in range(n)])
    # v _| d(omega) inside P: wedge the contraction with the top form of P
    vol = P.volume_form()
    for omega in P.basis:
        dom = exterior_derivative(omega)
        # contraction with the symbolic unknown field, done term by term
        contracted: dict[tuple[int, ...], sp.Expr] = {}
        for idx, c in dom.terms:
            for k, i in enumerate(idx):
                rest = idx[:k] + idx[k + 1 :]
                sign = -1 if k % 2 else 1
                contracted[rest] = contracted.get(rest, sp.Integer(0)) + sign * unknown[i] * c.sym
        # (v _| dom) ^ vol must vanish identically
        for rest, cexpr in contracted.items():
            alpha = DifferentialForm.make(chart, 1, {rest: ONE})
            top = wedge(alpha, vol)
            for _, vcoeff in top.terms:
                rows.append(_linear_row(sp.expand(cexpr * vcoeff.sym), unknown))
    # merge rows that are linear in the unknowns into one homogeneous system
    matrix_rows = []
    for r in rows:
        if isinstance(r, list) and len(r) == n and not any(
            isinstance(x, sp.Expr) and (set(x.free_symbols) & set(unknown)) for x in r
        ):
            matrix_rows.append(r)
    vecs = nullspace(matrix_rows, n)
    fields = [VectorField(chart, tuple(Expression(x) for x in v)) for v in vecs]
    C = Distribution.span(chart, fields)
    if check:
        _assert_characteristic(C, P)
    return C


def _linear_row(expr: sp.Expr, unknown: list[sp.Symbol]) -> list[sp.Expr]:
    row = []
    for u in unknown:
        row.append(sp.cancel(sp.together(sp.diff(expr, u))))
    return row


def _assert_characteristic(C: Distribution, P: Codistribution) -> None:
    for v in C.basis:
        for omega in P.basis:
            if not is_zero(pairing(omega, v)):
                raise AssertionError("characteristic field does not annihilate P")
        for omega in P.basis:
            contr = interior_product(v, exterior_derivative(omega))
            if not P.contains(contr):
                raise AssertionError("characteristic field fails C _| dP in P")
    if not is_involutive(C):
        raise AssertionError("Cauchy characteristic distribution must be involutive")


def involutive_complement(D: Distribution, E: Distribution, sampler: Sampler | None = None) -> Distribution:
    """Involutive D_c with D + D_c = E (direct), for involutive D inside E.

    Construction: pick k = dim D coordinate functions G with dG restricted to
    D generically invertible; then D_c = E  intersect  ker dG.  Brackets of
    fields killing the G's still kill them, so the complement inherits
    involutivity from E.
    """
    chart = D.chart
    k = D.dimension
    if k == 0:
        return E
    if not E.contains_all(D):
        raise ValueError("D must be contained in E")
    if k == E.dimension:
        return Distribution.span(chart, [])
    # greedy transversal search among coordinates
    chosen: list[int] = []
    dmat = [[c.sym for c in b.components] for b in D.basis]
    for i in range(chart.dim):
        if len(chosen) == k:
            break
        cols = chosen + [i]
        sub = [[row[j] for j in cols] for row in dmat]
        if row_reduce(sub).rank == len(cols):
            chosen.append(i)
    if len(chosen) != k:
        raise ComplementConstructionError("no coordinate transversal for the complement")
    # solve for E-combinations annihilating the chosen coordinate differentials
    rows = []
    for i in chosen:
        rows.append([b.components[i].sym for b in E.basis])
    vecs = nullspace(rows, E.dimension)
    fields = []
    for v in vecs:
        f = VectorField(chart, tuple(ZERO for _ in range(chart.dim)))
        for coeff, b in zip(v, E.basis):
            f = f.add(b.scale(Expression(coeff)))
        fields.append(f)
    return Distribution.span(chart, fields)


# ---------------------------------------------------------------------------
# first integrals
# ---------------------------------------------------------------------------


def first_integrals(
    D: Distribution,
    count: int,
    seed_integrals: Sequence[Expression] = (),
    max_degree: int = 2,
) -> list[Expression]:
    """`count` functionally independent functions annihilated by D.

    Strategy, in order: verified seed candidates; coordinate functions;
    linear combinations with rational constant coefficients; a rational
    ansatz P/Q with Q drawn from a small denominator dictionary and P solved
    linearly.  If the budget runs out the residual PDE system w(y) = 0 is
    raised, never a fabricated integral.
    """
    chart = D.chart
    fields = list(D.basis)
    found: list[Expression] = []
    jac_rows: list[list[sp.Expr]] = []

    def try_add(candidate: Expression) -> bool:
        if len(found) >= count:
            return False
        if candidate.sym.is_Rational:
            return False
        for w in fields:
            if not is_zero(w.apply_to(candidate)):
                return False
        row = [differentiate(candidate, v).sym for v in chart.names]
        if row_reduce(jac_rows + [row]).rank != len(jac_rows) + 1:
            return False
        found.append(canonicalize_function(candidate))
        jac_rows.append(row)
        return True

    for cand in seed_integrals:
        try_add(cand)
    for name in chart.names:
        try_add(Expression.var(name))
    if len(found) < count:
        for combo in _constant_combinations(fields, chart):
            try_add(combo)
            if len(found) >= count:
                break
    if len(found) < count:
        for cand in _rational_ansatz(fields, chart, max_degree):
            try_add(cand)
            if len(found) >= count:
                break
    if len(found) < count:
        pdes = []
        for w in fields:
            terms = []
            for name, c in zip(chart.names, w.components):
                if not is_zero(c):
                    terms.append(f"({render(c)})*d y/d{name}")
            pdes.append(" + ".join(terms) + " = 0")
        raise UnsolvableIntegralsError(
            f"found {len(found)} of {count} first integrals in closed form",
            pde_system=pdes,
        )
    return found[:count]


def _constant_combinations(fields: list[VectorField], chart: Chart):
    """Linear integrals sum c_j x_j with rational constant c."""
    n = chart.dim
    coeffs = [sp.Symbol(f"_k{j}") for j in range(n)]
    eqs: list[sp.Expr] = []
    for w in fields:
        expr = sum(c * comp.sym for c, comp in zip(coeffs, w.components))
        numer = sp.expand(sp.fraction(sp.together(expr))[0])
        src = sorted(numer.free_symbols - set(coeffs), key=sp.default_sort_key)
        eqs.extend(sp.Poly(numer, *src).coeffs() if src else [numer])
    A, _ = sp.linear_eq_to_matrix(eqs, coeffs)
    rows = [[A[i, j] for j in range(A.cols)] for i in range(A.rows)]
    for v in nullspace(rows, n):
        expr = sum(c * sp.Symbol(nm) for c, nm in zip(v, chart.names))
        yield Expression(sp.cancel(expr))


def _rational_ansatz(fields: list[VectorField], chart: Chart, max_degree: int):
    """Candidates P/Q, Q from a dictionary, P solved linearly from w(P/Q)=0."""
    n = chart.dim
    xs = [sp.Symbol(nm) for nm in chart.names]
    denominators: list[sp.Expr] = [sp.Integer(1)]
    denominators += xs
    denominators += [x + 1 for x in xs] + [x - 1 for x in xs]
    monos = _poly_monomials(xs, max_degree)
    for Q in denominators:
        coeffs = [sp.Symbol(f"_a{j}") for j in range(len(monos))]
        P = sum(c * m for c, m in zip(coeffs, monos))
        eqs: list[sp.Expr] = []
        ok = True
        for w in fields:
            wP = sum(
                comp.sym * sp.diff(P, sp.Symbol(nm))
                for nm, comp in zip(chart.names, w.components)
            )
            wQ = sum(
                comp.sym * sp.diff(Q, sp.Symbol(nm))
                for nm, comp in zip(chart.names, w.components)
            )
            numer = sp.expand(sp.fraction(sp.together(wP * Q - P * wQ))[0])
            src = sorted(numer.free_symbols - set(coeffs), key=sp.default_sort_key)
            try:
                eqs.extend(sp.Poly(numer, *src).coeffs() if src else [numer])
            except sp.PolynomialError:  # pragma: no cover - defensive
                ok = False
                break
        if not ok:
            continue
        A, _ = sp.linear_eq_to_matrix(eqs, coeffs)
        rows = [[A[i, j] for j in range(A.cols)] for i in range(A.rows)]
        for v in nullspace(rows, len(monos)):
            P_val = sum(c * m for c, m in zip(v, monos))
            if P_val == 0:
                continue
            cand = sp.cancel(P_val / Q)
            if cand.is_Rational:
                continue
            yield Expression(cand)


def _poly_monomials(xs: list[sp.Symbol], max_degree: int) -> list[sp.Expr]:
    out: list[sp.Expr] = []
    for total in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(len(xs)), total):
            m = sp.Integer(1)
            for i in combo:
                m *= xs[i]
            out.append(m)
    return out
