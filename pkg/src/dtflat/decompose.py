"""One step of the normal-form construction.

From a system with no trivial inputs and a nonzero projectable input
distribution W, build the Pfaffian systems P0 and P1, an exact basis g of
P1, the input change q, the state completion p, the state diffeomorphism h,
the transformed system (whose last block is a pure shift) and the remaining
subsystem with its renamed charts.  Every constructed identity is verified
by exact residual checks before the step is returned.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import sympy as sp

from .exceptions import (
    CauchyMismatchError,
    DecompositionError,
    NoProjectableInputError,
    NotReachableError,
    UnstableFamilyError,
    UnsupportedInversionError,
)
from .expr_core import (
    Expression,
    Sampler,
    SymbolicMatrix,
    ZERO,
    canonicalize_function,
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
    VectorField,
    differential,
    exterior_derivative,
    interior_product,
)
from .distributions import (
    Codistribution,
    Distribution,
    cauchy_characteristic,
    first_integrals,
    intersect,
    is_involutive,
    largest_annihilated_subcodistribution,
)
from .system import DiscreteSystem, InputSplit, projectable_input_fields

__all__ = ["DecompositionStep", "build_P0", "normal_form_step", "split"]


def _nf(e: Expression) -> Expression:
    return Expression(sp.cancel(sp.together(e.sym)))


def build_P0(S: DiscreteSystem) -> Codistribution:
    """P0 = span(df): one generator per dynamics component."""
    chart = S.total_chart
    return Codistribution.span(chart, [differential(chart, d) for d in S.dynamics])


@dataclass(frozen=True)
class DecompositionStep:
    system: DiscreteSystem
    input_split: InputSplit
    P0: Codistribution
    P1: Codistribution
    g: tuple[Expression, ...]  # exact P1 basis functions, shift-sorted
    v_names: tuple[str, ...]
    w_names: tuple[str, ...]
    q: tuple[tuple[str, Expression], ...]  # (v, w) = q(x, u)
    q_inverse: dict[str, Expression]  # u in terms of (x, v, w)
    g_hat: tuple[Expression, ...]  # n - m functions of (x, v)
    completion: tuple[Expression, ...]  # state functions completing p
    p: tuple[tuple[str, Expression], ...]  # z = p(x, v)
    p_inverse: dict[str, Expression]  # x in terms of (z, v)
    tilde_chart: Chart
    h: tuple[Expression, ...]  # x = h(xt)
    h_inverse: dict[str, Expression]  # xt in terms of x
    transformed: tuple[Expression, ...]  # xt_plus components on (xt, v, w)
    shift_state_names: tuple[str, ...]  # tilde states fed by the pure shift
    remaining: DiscreteSystem | None
    renaming: tuple[tuple[str, str], ...]  # remaining-system name -> tilde/v slot

    @property
    def m_w(self) -> int:
        return len(self.w_names)

    @property
    def m_v(self) -> int:
        return len(self.v_names)


def normal_form_step(S: DiscreteSystem, sampler: Sampler | None = None) -> DecompositionStep:
    """Construct one decomposition step; raises when the necessary conditions
    fail (not flat) or when a closed-form construction is out of reach."""
    n, m = S.n, S.m
    chart = S.total_chart
    W, split_data = projectable_input_fields(S, sampler)
    if not split_data.result.stable:
        raise UnstableFamilyError(
            "projectable family still shrinking at the iteration cap"
        )
    if W.dimension == 0:
        raise NoProjectableInputError("zero-dimensional projectable distribution")
    m_w, m_v = split_data.m_w, split_data.m_v

    P0 = build_P0(S)
    P1 = largest_annihilated_subcodistribution(P0, W)
    if P1.dimension != n - m_w:
        raise DecompositionError(
            f"P1 has dimension {P1.dimension}, expected {n - m_w}"
        )
    _check_characteristic(S, W, P1)

    # exact basis of P1 through first integrals of the projected distribution
    Dz = Distribution.span(S.shifted_chart, list(split_data.result.projected))
    psi = first_integrals(Dz, n - m_w)
    shift_sub = dict(zip(S.shifted_names, S.dynamics))
    g_list = [canonicalize_function(_nf(substitute(p_i, shift_sub))) for p_i in psi]
    g_list.sort(key=lambda e: (-complexity(e), render(e)))
    g = tuple(g_list)
    _check_exact_basis(chart, g, P1)

    v_names = tuple(f"v{i+1}" for i in range(m_v))
    w_names = tuple(f"w{i+1}" for i in range(m_w))
    q, q_inverse, v_idx = _choose_input_change(S, g, v_names, w_names, sampler)

    g_hat = tuple(
        _nf(substitute(g[i], q_inverse)) for i in range(len(g)) if i not in v_idx
    )
    for gh in g_hat:
        leak = gh.variables & set(w_names)
        if leak:
            raise DecompositionError(f"g-hat depends on shifted inputs: {sorted(leak)}")

    completion, p_pairs, p_inverse = _complete_state_map(S, g_hat, v_names, sampler)

    tilde_chart = Chart.of(tuple(f"xt{i+1}" for i in range(n)))
    h, h_inverse = _build_h(S, q_inverse, p_pairs, p_inverse, v_names, w_names, tilde_chart)

    transformed = _transformed_system(S, g_hat, h, tilde_chart, v_names, w_names)
    _verify_round_trip(S, q, h, h_inverse, transformed, tilde_chart, v_names, w_names)

    shift_state_names = tilde_chart.names[n - m_w :]
    remaining, renaming = _remaining_system(S, transformed, tilde_chart, v_names, m_w, m_v)

    return DecompositionStep(
        system=S,
        input_split=split_data,
        P0=P0,
        P1=P1,
        g=g,
        v_names=v_names,
        w_names=w_names,
        q=q,
        q_inverse=q_inverse,
        g_hat=g_hat,
        completion=completion,
        p=p_pairs,
        p_inverse=p_inverse,
        tilde_chart=tilde_chart,
        h=h,
        h_inverse=h_inverse,
        transformed=transformed,
        shift_state_names=shift_state_names,
        remaining=remaining,
        renaming=renaming,
    )


def split(step: DecompositionStep) -> tuple[tuple[tuple[str, str], ...], DiscreteSystem | None]:
    """The pure shift block (tilde state fed by which w) and the remaining system."""
    shift_block = tuple(zip(step.shift_state_names, step.w_names))
    return shift_block, step.remaining


# ---------------------------------------------------------------------------
# internals
# ---------------------------------------------------------------------------


def _check_characteristic(S: DiscreteSystem, W: Distribution, P1: Codistribution) -> None:
    """W must annihilate P1 and dP1 (mod P1), be involutive, and exhaust the
    input directions of the characteristic distribution of P1."""
    for w in W.basis:
        for omega in P1.basis:
            contr = interior_product(w, exterior_derivative(omega))
            if not P1.contains(contr):
                raise CauchyMismatchError("W does not contract dP1 into P1")
    if not is_involutive(W):
        raise CauchyMismatchError("W is not involutive")
    if P1.dimension:
        C = cauchy_characteristic(P1, check=False)
        within_inputs = intersect(C, S.input_distribution())
        if not within_inputs.span_equals(W):
            raise CauchyMismatchError(
                "characteristic directions among the inputs do not match W"
            )


def _check_exact_basis(chart: Chart, g: Sequence[Expression], P1: Codistribution) -> None:
    forms = [differential(chart, gi) for gi in g]
    span_g = Codistribution.span(chart, forms)
    if not (span_g.dimension == P1.dimension and P1.span_equals(span_g)):
        raise DecompositionError("span(dg) does not reproduce P1")


def _choose_input_change(
    S: DiscreteSystem,
    g: tuple[Expression, ...],
    v_names: tuple[str, ...],
    w_names: tuple[str, ...],
    sampler: Sampler | None,
):
    """Sort the g's and f's so that (v, w) = q(x, u) is invertible in u.

    Candidates are tried simplest-first (node count, then a stable tiebreak);
    the first subset pair whose input Jacobian has full generic rank and
    whose inversion the solver handles wins.
    """
    m, m_v, m_w = S.m, len(v_names), len(w_names)
    g_order = sorted(range(len(g)), key=lambda i: (complexity(g[i]), i))
    f_order = sorted(range(S.n), key=lambda i: (complexity(S.dynamics[i]), i))
    last_error: Exception | None = None
    for v_combo in itertools.combinations(g_order, m_v):
        for w_combo in itertools.combinations(f_order, m_w):
            comps = [g[i] for i in v_combo] + [S.dynamics[j] for j in w_combo]
            jac = SymbolicMatrix.from_rows(
                [[differentiate(c, u) for u in S.inputs] for c in comps]
            )
            try:
                if generic_rank(jac, sampler) != m:
                    continue
            except Exception:
                continue
            pairs = tuple(zip(v_names + w_names, comps))
            try:
                inverse = solve_map_inverse(list(pairs), list(S.inputs))
            except UnsupportedInversionError as exc:
                last_error = exc
                continue
            return pairs, inverse, set(v_combo)
    if last_error is not None:
        raise last_error
    raise DecompositionError("no (v, w) sorting makes q invertible in u")


def _complete_state_map(
    S: DiscreteSystem,
    g_hat: tuple[Expression, ...],
    v_names: tuple[str, ...],
    sampler: Sampler | None,
):
    """Complete g-hat with state coordinates so z = p(x, v) inverts in x.

    If no completion exists the state Jacobian of g-hat is rank deficient,
    which is exactly the locally-not-reachable case.
    """
    n = S.n
    rows = [[differentiate(gh, x).sym for x in S.states] for gh in g_hat]
    base_rank = row_reduce(rows).rank if rows else 0
    if base_rank != len(g_hat):
        raise NotReachableError(
            "state completion impossible: system is locally not reachable"
        )
    completion: list[Expression] = []
    rank = base_rank
    for i, coord in enumerate(S.states):
        if rank == n:
            break
        unit = [sp.Integer(1) if j == i else sp.Integer(0) for j in range(n)]
        if row_reduce(rows + [unit]).rank > rank:
            rows.append(unit)
            rank += 1
            completion.append(Expression.var(coord))
    if rank != n:
        raise NotReachableError(
            "state completion impossible: system is locally not reachable"
        )
    z_names = tuple(f"z{i+1}" for i in range(n))
    p_components = list(g_hat) + completion
    p_pairs = tuple(zip(z_names, p_components))
    p_inverse = solve_map_inverse(list(p_pairs), list(S.states))
    return tuple(completion), p_pairs, p_inverse


def _build_h(
    S: DiscreteSystem,
    q_inverse: dict[str, Expression],
    p_pairs,
    p_inverse: dict[str, Expression],
    v_names: tuple[str, ...],
    w_names: tuple[str, ...],
    tilde_chart: Chart,
):
    n, m = S.n, S.m
    u_exprs = {u: _nf(substitute(q_inverse[u], p_inverse)) for u in S.inputs}
    x_exprs = dict(p_inverse)
    raw = [_nf(substitute(f_i, {**x_exprs, **u_exprs})) for f_i in S.dynamics]
    z_names = [name for name, _ in p_pairs]
    spare = set(z_names[n - m :])
    for i, r in enumerate(raw):
        leak = r.variables & spare
        if leak:
            raise DecompositionError(
                f"h component {i+1} depends on completion slots {sorted(leak)}"
            )
    slot_map: dict[str, Expression] = {}
    for i in range(n - m):
        slot_map[z_names[i]] = Expression.var(tilde_chart.names[i])
    for j, vn in enumerate(v_names):
        slot_map[vn] = Expression.var(tilde_chart.names[n - m + j])
    for j, wn in enumerate(w_names):
        slot_map[wn] = Expression.var(tilde_chart.names[n - len(w_names) + j])
    h = tuple(_nf(substitute(r, slot_map)) for r in raw)
    h_inverse = solve_map_inverse(list(zip(S.states, h)), list(tilde_chart.names))
    return h, h_inverse


def _transformed_system(
    S: DiscreteSystem,
    g_hat: tuple[Expression, ...],
    h: tuple[Expression, ...],
    tilde_chart: Chart,
    v_names: tuple[str, ...],
    w_names: tuple[str, ...],
):
    x_sub = dict(zip(S.states, h))
    comps = [_nf(substitute(gh, x_sub)) for gh in g_hat]
    comps += [Expression.var(v) for v in v_names]
    comps += [Expression.var(w) for w in w_names]
    for i, c in enumerate(comps[: len(g_hat)]):
        leak = c.variables & set(w_names)
        if leak:
            raise DecompositionError("transformed core depends on shifted inputs")
    return tuple(comps)


def _verify_round_trip(
    S: DiscreteSystem,
    q,
    h: tuple[Expression, ...],
    h_inverse: dict[str, Expression],
    transformed: tuple[Expression, ...],
    tilde_chart: Chart,
    v_names: tuple[str, ...],
    w_names: tuple[str, ...],
) -> None:
    """f(x, u) == h(transformed(h^{-1}(x), q(x, u))) componentwise."""
    q_sub = {name: expr for name, expr in q}
    back = {**h_inverse, **q_sub}
    t_vals = [_nf(substitute(t, back)) for t in transformed]
    t_map = dict(zip(tilde_chart.names, t_vals))
    for i, f_i in enumerate(S.dynamics):
        rebuilt = _nf(substitute(h[i], t_map))
        if not is_zero(rebuilt - f_i):
            raise DecompositionError(
                f"round-trip residual nonzero in component {i+1}: "
                f"{render(_nf(rebuilt - f_i))}"
            )


def _remaining_system(
    S: DiscreteSystem,
    transformed: tuple[Expression, ...],
    tilde_chart: Chart,
    v_names: tuple[str, ...],
    m_w: int,
    m_v: int,
):
    n = S.n
    n_red = n - m_w
    if n_red == 0:
        return None, tuple()
    new_states = tuple(f"x{i+1}" for i in range(n_red))
    new_inputs = tuple(f"u{i+1}" for i in range(m_w + m_v))
    renaming: list[tuple[str, str]] = []
    sub: dict[str, Expression] = {}
    for i, ns in enumerate(new_states):
        renaming.append((ns, tilde_chart.names[i]))
        sub[tilde_chart.names[i]] = Expression.var(ns)
    for j in range(m_w):
        renaming.append((new_inputs[j], tilde_chart.names[n_red + j]))
        sub[tilde_chart.names[n_red + j]] = Expression.var(new_inputs[j])
    for j in range(m_v):
        renaming.append((new_inputs[m_w + j], v_names[j]))
        sub[v_names[j]] = Expression.var(new_inputs[m_w + j])
    dynamics = tuple(_nf(substitute(t, sub)) for t in transformed[:n_red])
    remaining = DiscreteSystem(new_states, new_inputs, dynamics)
    return remaining, tuple(renaming)
