"""Independent oracles used by the test suite.

Everything here is deliberately written against plain sympy/Fraction
primitives, not against the toolkit modules, so golden values are computed
along a second route.
"""

from __future__ import annotations

import random
from fractions import Fraction

import sympy as sp


# ---------------------------------------------------------------------------
# exact numeric evaluation and ranks
# ---------------------------------------------------------------------------


def eval_fraction(expr: sp.Expr, point: dict[str, Fraction]) -> Fraction:
    """Exact rational evaluation; raises ZeroDivisionError on a pole."""
    num, den = sp.fraction(sp.cancel(sp.together(expr)))
    table = {sp.Symbol(k): sp.Rational(v.numerator, v.denominator) for k, v in point.items()}
    dv = den.xreplace(table)
    if dv == 0:
        raise ZeroDivisionError
    nv = num.xreplace(table)
    val = sp.Rational(nv) / sp.Rational(dv)
    return Fraction(int(val.p), int(val.q))


def fraction_rank(rows: list[list[Fraction]]) -> int:
    a = [list(r) for r in rows]
    if not a or not a[0]:
        return 0
    m, n = len(a), len(a[0])
    rank = 0
    for col in range(n):
        pivot = next((i for i in range(rank, m) if a[i][col] != 0), None)
        if pivot is None:
            continue
        a[rank], a[pivot] = a[pivot], a[rank]
        pv = a[rank][col]
        a[rank] = [x / pv for x in a[rank]]
        for i in range(m):
            if i != rank and a[i][col] != 0:
                f = a[i][col]
                a[i] = [x - f * y for x, y in zip(a[i], a[rank])]
        rank += 1
        if rank == m:
            break
    return rank


def sampled_matrix_rank(
    rows: list[list[sp.Expr]], names: list[str], rng: random.Random, trials: int = 12
) -> int:
    """Max exact rank over random integer points (the generic rank oracle)."""
    best = 0
    done = 0
    guard = 0
    while done < trials:
        guard += 1
        if guard > 400:
            raise RuntimeError("could not sample enough nonsingular points")
        point = {n: Fraction(rng.randint(-40, 40)) for n in names}
        try:
            numeric = [[eval_fraction(e, point) for e in r] for r in rows]
        except ZeroDivisionError:
            continue
        best = max(best, fraction_rank(numeric))
        done += 1
    return best


# ---------------------------------------------------------------------------
# textbook Lie bracket (independent of the exterior module)
# ---------------------------------------------------------------------------


def textbook_bracket(
    f: list[sp.Expr], g: list[sp.Expr], names: list[str]
) -> list[sp.Expr]:
    syms = [sp.Symbol(n) for n in names]
    out = []
    for k in range(len(names)):
        term = sp.Integer(0)
        for i, s in enumerate(syms):
            term += f[i] * sp.diff(g[k], s) - g[i] * sp.diff(f[k], s)
        out.append(sp.cancel(sp.together(term)))
    return out


# ---------------------------------------------------------------------------
# Brunovsky / controllability indices via an exact staircase
# ---------------------------------------------------------------------------


def controllability_indices(
    A: list[list[Fraction]], B: list[list[Fraction]]
) -> list[int] | None:
    """Controllability indices of (A, B); None when uncontrollable.

    Computed two ways (column selection and rank-increment conjugation);
    a disagreement raises, so a passing oracle is internally consistent.
    """
    n = len(A)
    m = len(B[0])
    # route 1: select columns b_1..b_m, Ab_1..Ab_m, ... greedily
    echelon: list[list[Fraction]] = []

    def try_insert(vec: list[Fraction]) -> bool:
        v = list(vec)
        for row in echelon:
            lead = next((j for j, x in enumerate(row) if x != 0), None)
            if lead is not None and v[lead] != 0:
                f = v[lead] / row[lead]
                v = [x - f * y for x, y in zip(v, row)]
        if any(x != 0 for x in v):
            echelon.append(v)
            return True
        return False

    counts = [0] * m
    alive = [True] * m
    block = [[B[i][j] for j in range(m)] for i in range(n)]
    for _ in range(n):
        for j in range(m):
            if not alive[j]:
                continue
            col = [block[i][j] for i in range(n)]
            if try_insert(col):
                counts[j] += 1
            else:
                alive[j] = False
        block = [
            [sum(A[i][k] * block[k][j] for k in range(n)) for j in range(m)]
            for i in range(n)
        ]
    if sum(counts) < n:
        return None
    # route 2: conjugate partition of reachability rank increments
    ranks = []
    cols: list[list[Fraction]] = []
    block = [[B[i][j] for j in range(m)] for i in range(n)]
    for _ in range(n):
        for j in range(m):
            cols.append([block[i][j] for i in range(n)])
        ranks.append(fraction_rank([[c[i] for c in cols] for i in range(n)]))
        block = [
            [sum(A[i][k] * block[k][j] for k in range(n)) for j in range(m)]
            for i in range(n)
        ]
    increments = [ranks[0]] + [ranks[k] - ranks[k - 1] for k in range(1, n)]
    conjugate = [sum(1 for r in increments if r >= j + 1) for j in range(m)]
    if sorted(c for c in conjugate if c > 0) != sorted(c for c in counts if c > 0):
        raise AssertionError("staircase routes disagree")
    return counts


# ---------------------------------------------------------------------------
# random generators (seeded by the caller)
# ---------------------------------------------------------------------------


def random_polynomial(rng: random.Random, names: list[str], terms: int = 3, degree: int = 2) -> sp.Expr:
    syms = [sp.Symbol(n) for n in names]
    out = sp.Integer(rng.randint(-3, 3))
    for _ in range(terms):
        coeff = rng.randint(-4, 4)
        if coeff == 0:
            continue
        mono = sp.Integer(coeff)
        for _ in range(rng.randint(1, degree)):
            mono *= rng.choice(syms)
        out += mono
    return sp.expand(out)


def random_rational(rng: random.Random, names: list[str]) -> sp.Expr:
    num = random_polynomial(rng, names)
    if rng.random() < 0.4:
        den = random_polynomial(rng, names, terms=2, degree=1) + sp.Integer(rng.choice([3, 5, 7]))
        return sp.cancel(num / den)
    return num


def random_linear_pair(
    rng: random.Random, n: int, m: int, controllable: bool
) -> tuple[list[list[Fraction]], list[list[Fraction]]]:
    """Random (A, B) over small integers with the requested controllability."""
    for _ in range(600):
        A = [[Fraction(rng.randint(-2, 2)) for _ in range(n)] for _ in range(n)]
        B = [[Fraction(rng.randint(-2, 2)) for _ in range(m)] for _ in range(n)]
        idx = controllability_indices(A, B)
        if controllable and idx is not None:
            return A, B
        if not controllable and idx is None:
            # keep [A B] full row rank so the map stays a submersion
            stacked = [[*A[i], *B[i]] for i in range(n)]
            if fraction_rank(stacked) == n:
                return A, B
    raise RuntimeError("could not sample a linear pair with the requested property")
