"""Exact symbolic scalars over named variables, plus linear algebra over them.

Everything downstream (forms, fields, distributions, the decomposition chain)
manipulates `Expression` values: rational functions over Q in the chart
variables.  Arithmetic and rational normal forms are delegated to sympy;
the grammar, the zero decision policy, rank computation and map inversion
are owned here so their behaviour is pinned by this module's tests.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import sympy as sp

from .exceptions import (
    ExpressionSyntaxError,
    IndeterminateError,
    RankDeficientError,
    UnknownIdentifierError,
    UnsupportedInversionError,
)

__all__ = [
    "Expression",
    "SymbolicMatrix",
    "Sampler",
    "parse",
    "render",
    "differentiate",
    "substitute",
    "is_zero",
    "equal",
    "evaluate",
    "generic_rank",
    "solve_linear_over_field",
    "solve_map_inverse",
    "express_in_generators",
    "canonicalize_function",
    "row_reduce",
    "nullspace",
    "RowReduction",
]


def _symbol(name: str) -> sp.Symbol:
    return sp.Symbol(name)


@dataclass(frozen=True)
class Expression:
    """Immutable rational expression over named variables."""

    sym: sp.Expr

    @staticmethod
    def number(p: int, q: int = 1) -> "Expression":
        return Expression(sp.Rational(p, q))

    @staticmethod
    def var(name: str) -> "Expression":
        return Expression(_symbol(name))

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(s.name for s in self.sym.free_symbols)

    def __add__(self, other: "Expression") -> "Expression":
        return Expression(self.sym + _lift(other))

    def __radd__(self, other) -> "Expression":
        return Expression(_lift(other) + self.sym)

    def __sub__(self, other) -> "Expression":
        return Expression(self.sym - _lift(other))

    def __rsub__(self, other) -> "Expression":
        return Expression(_lift(other) - self.sym)

    def __mul__(self, other) -> "Expression":
        return Expression(self.sym * _lift(other))

    def __rmul__(self, other) -> "Expression":
        return Expression(_lift(other) * self.sym)

    def __truediv__(self, other) -> "Expression":
        return Expression(self.sym / _lift(other))

    def __rtruediv__(self, other) -> "Expression":
        return Expression(_lift(other) / self.sym)

    def __neg__(self) -> "Expression":
        return Expression(-self.sym)

    def __pow__(self, n: int) -> "Expression":
        return Expression(self.sym ** int(n))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Expression({self.sym})"

    def __str__(self) -> str:
        return render(self)


ZERO = Expression(sp.Integer(0))
ONE = Expression(sp.Integer(1))


def _lift(v) -> sp.Expr:
    if isinstance(v, Expression):
        return v.sym
    if isinstance(v, (int, Fraction)):
        return sp.Rational(v)
    if isinstance(v, sp.Expr):
        return v
    raise TypeError(f"cannot use {v!r} as an expression")


# ---------------------------------------------------------------------------
# grammar
#
#   expr   := term (("+"|"-") term)*
#   term   := factor (("*"|"/") factor)*
#   factor := base ("^" integer)?
#   base   := identifier | number | "(" expr ")" | "-" base
#   identifier := letter (letter|digit|"_")*
#   number := integer ("/" integer)?
# ---------------------------------------------------------------------------


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.items: list[tuple[str, str, int]] = []  # (kind, value, pos)
        self._lex()
        self.i = 0

    def _lex(self) -> None:
        text, n, i = self.text, len(self.text), 0
        while i < n:
            c = text[i]
            if c.isspace():
                i += 1
                continue
            if c in "+-*/^()":
                self.items.append(("op", c, i))
                i += 1
                continue
            if c.isdigit():
                j = i
                while j < n and text[j].isdigit():
                    j += 1
                self.items.append(("int", text[i:j], i))
                i = j
                continue
            if c.isalpha():
                j = i
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                self.items.append(("ident", text[i:j], i))
                i = j
                continue
            raise ExpressionSyntaxError(f"unexpected character {c!r}", i)

    def peek(self, offset: int = 0):
        k = self.i + offset
        if k < len(self.items):
            return self.items[k]
        return ("eof", "", len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok


class _Parser:
    def __init__(self, text: str, allowed: Sequence[str] | None):
        self.toks = _Tokens(text)
        self.allowed = None if allowed is None else set(allowed)

    def parse(self) -> sp.Expr:
        e = self.expr()
        kind, val, pos = self.toks.peek()
        if kind != "eof":
            raise ExpressionSyntaxError(f"unexpected token {val!r}", pos)
        return e

    def expr(self) -> sp.Expr:
        e = self.term()
        while True:
            kind, val, _ = self.toks.peek()
            if kind == "op" and val in "+-":
                self.toks.next()
                rhs = self.term()
                e = e + rhs if val == "+" else e - rhs
            else:
                return e

    def term(self) -> sp.Expr:
        e = self.factor()
        while True:
            kind, val, _ = self.toks.peek()
            if kind == "op" and val in "*/":
                self.toks.next()
                rhs = self.factor()
                e = e * rhs if val == "*" else e / rhs
            else:
                return e

    def factor(self) -> sp.Expr:
        e = self.base()
        kind, val, pos = self.toks.peek()
        if kind == "op" and val == "^":
            self.toks.next()
            sign = 1
            kind, val, pos = self.toks.peek()
            if kind == "op" and val == "-":
                self.toks.next()
                sign = -1
                kind, val, pos = self.toks.peek()
            if kind != "int":
                raise ExpressionSyntaxError("integer exponent expected", pos)
            self.toks.next()
            e = e ** (sign * int(val))
        return e

    def base(self) -> sp.Expr:
        kind, val, pos = self.toks.next()
        if kind == "op" and val == "-":
            return -self.base()
        if kind == "op" and val == "(":
            e = self.expr()
            kind, val, pos = self.toks.next()
            if not (kind == "op" and val == ")"):
                raise ExpressionSyntaxError("')' expected", pos)
            return e
        if kind == "int":
            # number := integer ("/" integer)?  -- greedy rational literal
            k1, v1, _ = self.toks.peek(0)
            k2, v2, _ = self.toks.peek(1)
            if k1 == "op" and v1 == "/" and k2 == "int":
                self.toks.next()
                self.toks.next()
                return sp.Rational(int(val), int(v2))
            return sp.Integer(int(val))
        if kind == "ident":
            if self.allowed is not None and val not in self.allowed:
                raise UnknownIdentifierError(val, pos)
            return _symbol(val)
        raise ExpressionSyntaxError(
            "identifier, number or '(' expected" if kind == "eof" else f"unexpected token {val!r}",
            pos,
        )


def parse(text: str, allowed_vars: Sequence[str] | None = None) -> Expression:
    """Parse `text` under the toolkit grammar, restricted to `allowed_vars`."""
    return Expression(_Parser(text, allowed_vars).parse())


def render(e: Expression) -> str:
    """Render back to the grammar, fully parenthesized."""
    return _render(e.sym)


def _render(node: sp.Expr) -> str:
    if isinstance(node, sp.Symbol):
        return node.name
    if isinstance(node, sp.Integer):
        return str(node) if node >= 0 else f"(-{-node})"
    if isinstance(node, sp.Rational):
        if node >= 0:
            return f"{node.p}/{node.q}"
        return f"(-{-node.p}/{node.q})"
    if isinstance(node, sp.Add):
        out = []
        for t in node.as_ordered_terms():
            coeff = t.as_coeff_Mul()[0]
            if coeff.is_negative and out:
                out.append(" - " + _render(-t))
            elif coeff.is_negative:
                out.append("-" + _render(-t))
            else:
                out.append((" + " if out else "") + _render(t))
        return "(" + "".join(out) + ")"
    if isinstance(node, sp.Mul):
        lead = node.as_coeff_Mul()[0]
        if lead.is_negative:
            return f"(-{_render(-node)})"
        num, den = [], []
        for f in node.args:
            if isinstance(f, sp.Pow) and f.exp.is_Integer and f.exp < 0:
                den.append(_render(f.base ** (-f.exp)))
            elif isinstance(f, sp.Rational) and not isinstance(f, sp.Integer):
                if f.p != 1:
                    num.append(_render(sp.Integer(f.p)))
                den.append(_render(sp.Integer(f.q)))
            else:
                num.append(_render(f))
        res = " * ".join(num) if num else "1"
        if len(num) > 1:
            res = f"({res})"
        for d in den:
            res = f"({res} / {d})"
        return res
    if isinstance(node, sp.Pow):
        if node.exp.is_Integer:
            if node.exp < 0:
                return f"(1 / {_render(node.base ** (-node.exp))})"
            return f"({_render(node.base)} ^ {node.exp})"
    raise ValueError(f"cannot render node {node!r} in the grammar")


# ---------------------------------------------------------------------------
# calculus on scalars
# ---------------------------------------------------------------------------


def differentiate(e: Expression, v: str) -> Expression:
    """Exact partial derivative; derivative w.r.t. an absent variable is 0."""
    return Expression(sp.cancel(sp.diff(e.sym, _symbol(v))))


def substitute(e: Expression, bindings: Mapping[str, Expression]) -> Expression:
    """Simultaneous substitution of variables by expressions."""
    table = {_symbol(k): _lift(v) for k, v in bindings.items()}
    return Expression(e.sym.xreplace(table))


def _normal_form(node: sp.Expr) -> sp.Expr:
    return sp.cancel(sp.together(node))


def is_zero(e: Expression, sampler: "Sampler | None" = None) -> bool:
    """Decide `e == 0` at a generic point.

    Rational expressions are decided exactly through the rational normal
    form.  Anything else falls back to randomized evaluation (all-zero at
    every sampled point => zero); persistent singular samples raise
    IndeterminateError rather than guessing.
    """
    node = e.sym
    if node == 0:
        return True
    syms = tuple(node.free_symbols)
    if node.is_rational_function(*syms) if syms else True:
        return _normal_form(node) == 0
    sampler = sampler or Sampler()
    for _ in range(sampler.trials):
        point = sampler.point_for(e)
        val = node.xreplace({_symbol(k): v for k, v in point.items()})
        if sp.simplify(val) != 0:
            return False
    return True


def equal(a: Expression, b: Expression) -> bool:
    return is_zero(a - b)


def evaluate(e: Expression, point: Mapping[str, sp.Rational]) -> Fraction:
    """Exact rational evaluation; raises ZeroDivisionError on a pole."""
    num, den = sp.fraction(_normal_form(e.sym))
    table = {_symbol(k): sp.Rational(v) for k, v in point.items()}
    dv = den.xreplace(table)
    if dv == 0:
        raise ZeroDivisionError("singular evaluation point")
    nv = num.xreplace(table)
    r = sp.Rational(nv) / sp.Rational(dv)
    return Fraction(int(r.p), int(r.q))


@dataclass
class Sampler:
    """Seeded source of rational sample points in {-100..100} per coordinate."""

    seed: int = 0
    bound: int = 100
    trials: int = 8
    max_resample: int = 60

    def __post_init__(self):
        self._rng = random.Random(self.seed)

    def point(self, names: Iterable[str]) -> dict[str, sp.Rational]:
        return {n: sp.Integer(self._rng.randint(-self.bound, self.bound)) for n in names}

    def point_for(self, e: Expression) -> dict[str, sp.Rational]:
        """A point avoiding the poles of `e` (bounded resampling)."""
        names = sorted(e.variables)
        for _ in range(self.max_resample):
            pt = self.point(names)
            try:
                evaluate(e, pt)
                return pt
            except ZeroDivisionError:
                continue
        raise IndeterminateError("could not sample a nonsingular point")


# ---------------------------------------------------------------------------
# linear algebra over the expression field
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymbolicMatrix:
    rows: int
    cols: int
    entries: tuple[tuple[Expression, ...], ...]

    @staticmethod
    def from_rows(rows: Sequence[Sequence[Expression]]) -> "SymbolicMatrix":
        if rows:
            width = len(rows[0])
            if any(len(r) != width for r in rows):
                raise ValueError("ragged rows")
        else:
            width = 0
        return SymbolicMatrix(len(rows), width, tuple(tuple(r) for r in rows))

    @staticmethod
    def zero(rows: int, cols: int) -> "SymbolicMatrix":
        return SymbolicMatrix(rows, cols, tuple(tuple(ZERO for _ in range(cols)) for _ in range(rows)))

    def entry(self, i: int, j: int) -> Expression:
        return self.entries[i][j]

    def row(self, i: int) -> tuple[Expression, ...]:
        return self.entries[i]


@dataclass
class RowReduction:
    """Reduced row echelon form with the row transform that produced it."""

    rref: list[list[sp.Expr]]
    pivots: list[tuple[int, int]]
    transform: list[list[sp.Expr]]  # transform @ original == rref

    @property
    def rank(self) -> int:
        return len(self.pivots)


def _c(x: sp.Expr) -> sp.Expr:
    return sp.cancel(sp.together(x))


def row_reduce(rows: Sequence[Sequence[sp.Expr]]) -> RowReduction:
    """Gauss-Jordan over the rational function field.

    Pivots are chosen scanning columns left to right and, within a column,
    the lowest-index remaining row whose entry is not identically zero.
    """
    m = len(rows)
    n = len(rows[0]) if m else 0
    a = [[_c(sp.sympify(x)) for x in r] for r in rows]
    t = [[sp.Integer(1) if i == j else sp.Integer(0) for j in range(m)] for i in range(m)]
    pivots: list[tuple[int, int]] = []
    r = 0
    for col in range(n):
        sel = None
        for i in range(r, m):
            if a[i][col] != 0:
                sel = i
                break
        if sel is None:
            continue
        a[r], a[sel] = a[sel], a[r]
        t[r], t[sel] = t[sel], t[r]
        piv = a[r][col]
        a[r] = [_c(x / piv) for x in a[r]]
        t[r] = [_c(x / piv) for x in t[r]]
        for i in range(m):
            if i != r and a[i][col] != 0:
                f = a[i][col]
                a[i] = [_c(x - f * y) for x, y in zip(a[i], a[r])]
                t[i] = [_c(x - f * y) for x, y in zip(t[i], t[r])]
        pivots.append((r, col))
        r += 1
        if r == m:
            break
    return RowReduction(a, pivots, t)


def nullspace(rows: Sequence[Sequence[sp.Expr]], width: int) -> list[list[sp.Expr]]:
    """Basis of {v : rows @ v = 0}, first nonzero entry normalized to 1."""
    if not rows:
        return [[sp.Integer(1) if j == k else sp.Integer(0) for j in range(width)] for k in range(width)]
    red = row_reduce(rows)
    pivot_cols = {c: r for r, c in red.pivots}
    free_cols = [j for j in range(width) if j not in pivot_cols]
    basis = []
    for fc in free_cols:
        v = [sp.Integer(0)] * width
        v[fc] = sp.Integer(1)
        for c, r in pivot_cols.items():
            v[c] = _c(-red.rref[r][fc])
        lead = next((x for x in v if x != 0), None)
        if lead is not None and lead != 1:
            v = [_c(x / lead) for x in v]
        basis.append(v)
    return basis


def generic_rank(M: SymbolicMatrix, sampler: Sampler | None = None) -> int:
    """Rank at a generic point.

    Symbolic elimination over the rational-function field is authoritative
    for this expression class; random exact evaluations must reproduce it
    and singular-point streaks raise IndeterminateError.
    """
    if M.rows == 0 or M.cols == 0:
        return 0
    symbolic = row_reduce([[e.sym for e in r] for r in M.entries]).rank
    if symbolic == 0:
        return 0
    sampler = sampler or Sampler()
    names = sorted({v for r in M.entries for e in r for v in e.variables})
    if not names:
        return symbolic
    best = 0
    singular_streak = 0
    trials = 0
    while trials < sampler.trials and best < symbolic:
        pt = sampler.point(names)
        try:
            numeric = [[evaluate(e, pt) for e in row] for row in M.entries]
        except ZeroDivisionError:
            singular_streak += 1
            if singular_streak > sampler.max_resample:
                raise IndeterminateError("matrix evaluation kept hitting singular points")
            continue
        singular_streak = 0
        trials += 1
        best = max(best, _fraction_rank(numeric))
    if best != symbolic:
        raise IndeterminateError(
            f"sampled rank {best} never reached symbolic rank {symbolic}"
        )
    return symbolic


def _fraction_rank(rows: list[list[Fraction]]) -> int:
    a = [r[:] for r in rows]
    m, n = len(a), len(a[0])
    rank = 0
    for col in range(n):
        sel = next((i for i in range(rank, m) if a[i][col] != 0), None)
        if sel is None:
            continue
        a[rank], a[sel] = a[sel], a[rank]
        piv = a[rank][col]
        a[rank] = [x / piv for x in a[rank]]
        for i in range(m):
            if i != rank and a[i][col] != 0:
                f = a[i][col]
                a[i] = [x - f * y for x, y in zip(a[i], a[rank])]
        rank += 1
        if rank == m:
            break
    return rank


def solve_linear_over_field(A: SymbolicMatrix, unknowns: Sequence[str]) -> list[list[Expression]]:
    """Nullspace basis of A over the expression field.

    `unknowns` only fixes the vector length and must not occur inside A.
    """
    bad = [u for u in unknowns if any(u in e.variables for r in A.entries for e in r)]
    if bad:
        raise ValueError(f"unknowns occur inside the matrix: {bad}")
    if A.cols != len(unknowns):
        raise ValueError("column count must match the unknown count")
    vecs = nullspace([[e.sym for e in r] for r in A.entries], A.cols)
    return [[Expression(x) for x in v] for v in vecs]


# ---------------------------------------------------------------------------
# map inversion: triangular substitution + polynomial solving up to degree 2
# ---------------------------------------------------------------------------


def _solve_single(poly_expr: sp.Expr, v: sp.Symbol) -> sp.Expr | None:
    """Solve poly_expr == 0 for v inside the rational-function field."""
    try:
        poly = sp.Poly(sp.together(poly_expr).as_numer_denom()[0], v)
    except sp.PolynomialError:
        return None
    deg = poly.degree()
    if deg == 1:
        c1, c0 = poly.all_coeffs()
        if _c(c1) == 0:
            return None
        return _c(-c0 / c1)
    if deg == 2:
        c2, c1, c0 = poly.all_coeffs()
        disc = _c(c1 * c1 - 4 * c2 * c0)
        root = sp.sqrt(sp.factor(disc))
        root = sp.together(root)
        syms = tuple(root.free_symbols)
        if not root.is_rational_function(*syms) if syms else root.is_Rational:
            return None
        cands = sorted([_c((-c1 + root) / (2 * c2)), _c((-c1 - root) / (2 * c2))], key=sp.default_sort_key)
        for cand in cands:
            if _c(poly_expr.xreplace({v: cand})) == 0:
                return cand
        return None
    return None


def _linear_pivot(poly_expr: sp.Expr, v: sp.Symbol) -> tuple[sp.Expr, bool] | None:
    """Solve for v when poly_expr is degree one in v; the flag marks whether
    the pivot coefficient is free of every other symbol (a clean pivot)."""
    try:
        poly = sp.Poly(sp.together(poly_expr).as_numer_denom()[0], v)
    except sp.PolynomialError:
        return None
    if poly.degree() != 1:
        return None
    c1, c0 = poly.all_coeffs()
    c1 = _c(c1)
    if c1 == 0:
        return None
    return _c(-c0 / c1), c1.is_Rational is True


def solve_map_inverse(
    equations: Sequence[tuple[str, Expression]],
    solve_for: Sequence[str],
) -> dict[str, Expression]:
    """Invert lhs_i = rhs_i(vars) locally for the `solve_for` variables.

    The result expresses each solved variable in the remaining variables and
    the fresh left-hand-side names.  Verified by back substitution.
    """
    if len(equations) != len(solve_for):
        raise ValueError("need as many equations as unknowns")
    jac = SymbolicMatrix.from_rows(
        [[differentiate(rhs, v) for v in solve_for] for _, rhs in equations]
    )
    if generic_rank(jac) != len(solve_for):
        raise RankDeficientError(
            f"map is rank deficient with respect to {list(solve_for)}"
        )
    residuals = [_symbol(lhs) - rhs.sym for lhs, rhs in equations]
    unsolved = {_symbol(v) for v in solve_for}
    order = [_symbol(v) for v in solve_for]
    solution: dict[sp.Symbol, sp.Expr] = {}

    def _commit(v: sp.Symbol, sol: sp.Expr) -> None:
        nonlocal residuals, solution
        solution[v] = sol
        unsolved.discard(v)
        residuals = [_c(r.xreplace({v: sol})) for r in residuals]
        solution = {k2: _c(s.xreplace({v: sol})) for k2, s in solution.items()}

    while unsolved:
        progress = False
        # single-unknown equations first (covers the degree-2 branch)
        for res in residuals:
            present = res.free_symbols & unsolved
            if len(present) != 1:
                continue
            v = next(iter(present))
            sol = _solve_single(res, v)
            if sol is not None:
                _commit(v, sol)
                progress = True
                break
        if progress:
            continue
        # general linear pivots; prefer clean (constant) pivot coefficients
        best: tuple[int, int, sp.Symbol, sp.Expr] | None = None
        for ei, res in enumerate(residuals):
            present = res.free_symbols & unsolved
            for v in sorted(present, key=lambda s: order.index(s)):
                hit = _linear_pivot(res, v)
                if hit is None:
                    continue
                sol, clean = hit
                # a pivot may not reintroduce the variable it eliminates
                if v in sol.free_symbols:
                    continue
                key = (0 if clean else 1, ei)
                if best is None or key < best[:2]:
                    best = (*key, v, sol)
                if clean:
                    break
            if best is not None and best[0] == 0:
                break
        if best is not None:
            _commit(best[2], best[3])
            continue
        remaining = [str(_c(r)) for r in residuals if _c(r) != 0]
        raise UnsupportedInversionError(
            "inversion not solvable by the triangular/degree-2 strategy",
            unsolved=remaining,
        )
    for lhs, rhs in equations:
        res = _c(_symbol(lhs) - rhs.sym.xreplace(solution))
        if res != 0:
            raise UnsupportedInversionError(
                f"back-substitution residual is nonzero for {lhs}", unsolved=[str(res)]
            )
    return {v.name: Expression(_c(e)) for v, e in solution.items()}


# ---------------------------------------------------------------------------
# rewriting through a generating family (ring membership, constructively)
# ---------------------------------------------------------------------------


def express_in_generators(
    target: Expression,
    generators: Sequence[Expression],
    gen_names: Sequence[str],
    max_degree: int = 2,
) -> Expression | None:
    """Find a rational Phi with Phi(g_1,...,g_k) == target, if one exists
    with numerator/denominator of total degree <= max_degree.

    The search is linear: with a fixed monomial basis, P(g) - target*Q(g) == 0
    is linear in the coefficients of P and Q.
    """
    k = len(generators)
    gsyms = [g.sym for g in generators]
    for deg in range(1, max_degree + 1):
        monos = _monomials(k, deg)
        p_coeffs = [sp.Symbol(f"_p{j}") for j in range(len(monos))]
        q_coeffs = [sp.Symbol(f"_q{j}") for j in range(len(monos))]
        p_of_g = sum(c * _mono_value(gsyms, m) for c, m in zip(p_coeffs, monos))
        q_of_g = sum(c * _mono_value(gsyms, m) for c, m in zip(q_coeffs, monos))
        expr = sp.together(p_of_g - target.sym * q_of_g)
        numer = sp.expand(sp.fraction(expr)[0])
        src_syms = sorted(
            (numer.free_symbols - set(p_coeffs) - set(q_coeffs)), key=sp.default_sort_key
        )
        eqs = sp.Poly(numer, *src_syms).coeffs() if src_syms else [numer]
        A, b = sp.linear_eq_to_matrix(eqs, p_coeffs + q_coeffs)
        if any(x != 0 for x in b):  # pragma: no cover - linear by construction
            continue
        rows = [[A[i, j] for j in range(A.cols)] for i in range(A.rows)]
        for v in nullspace(rows, 2 * len(monos)):
            names = [sp.Symbol(n) for n in gen_names]
            q_part = sum(c * _mono_value(names, m) for c, m in zip(v[len(monos):], monos))
            if _c(q_part) == 0:
                continue
            p_part = sum(c * _mono_value(names, m) for c, m in zip(v[: len(monos)], monos))
            phi = _c(p_part / q_part)
            check = phi.xreplace({sp.Symbol(n): g for n, g in zip(gen_names, gsyms)})
            if _c(check - target.sym) == 0:
                return Expression(phi)
    return None


def _monomials(k: int, max_total_degree: int) -> list[tuple[int, ...]]:
    out = []
    for total in range(max_total_degree + 1):
        for combo in itertools.combinations_with_replacement(range(k), total):
            exps = [0] * k
            for c in combo:
                exps[c] += 1
            out.append(tuple(exps))
    return out


def _mono_value(values: Sequence[sp.Expr], exps: tuple[int, ...]) -> sp.Expr:
    out = sp.Integer(1)
    for v, e in zip(values, exps):
        if e:
            out *= v**e
    return out


# ---------------------------------------------------------------------------
# canonical representatives for first integrals and decomposition functions
# ---------------------------------------------------------------------------


def canonicalize_function(e: Expression) -> Expression:
    """Deterministic representative modulo rational recalibration.

    Steps: rational normal form; flip p/q to q/p when the numerator is a
    plain rational constant; strip the additive rational constant (value of
    the expression at the all-zero point, when that point is regular);
    divide out the positive rational content.
    """
    node = _normal_form(e.sym)
    if node.is_Rational:
        return Expression(node)
    num, den = sp.fraction(node)
    if num.is_Rational and not den.is_Rational:
        node = _c(den / num)
    zero_pt = {s: sp.Integer(0) for s in node.free_symbols}
    _, d = sp.fraction(node)
    if d.xreplace(zero_pt) != 0:
        const = node.xreplace(zero_pt)
        if const != 0:
            node = _c(node - const)
    num, den = sp.fraction(node)
    try:
        nc, _ = sp.Poly(num, *sorted(num.free_symbols, key=sp.default_sort_key)).primitive()
        dc, _ = sp.Poly(den, *sorted(den.free_symbols, key=sp.default_sort_key)).primitive() if den.free_symbols else (den, den)
        scale = sp.Rational(nc) / sp.Rational(dc)
        if scale != 0:
            node = _c(node / abs(scale))
    except sp.PolynomialError:  # pragma: no cover - defensive
        pass
    return Expression(node)


def complexity(e: Expression) -> int:
    """Node count of the normal form; the deterministic simplicity measure."""
    return sp.count_ops(_normal_form(e.sym), visual=False) + 1
