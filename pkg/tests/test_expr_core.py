import random
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from dtflat.exceptions import (
    ExpressionSyntaxError,
    IndeterminateError,
    RankDeficientError,
    UnknownIdentifierError,
    UnsupportedInversionError,
)
from dtflat.expr_core import (
    Expression,
    Sampler,
    SymbolicMatrix,
    canonicalize_function,
    differentiate,
    equal,
    evaluate,
    express_in_generators,
    generic_rank,
    is_zero,
    parse,
    render,
    solve_linear_over_field,
    solve_map_inverse,
    substitute,
)

from oracles import eval_fraction, sampled_matrix_rank

BENCH_VARS = ["x1", "x2", "x3", "x4", "x5", "u1", "u2"]


def p(text, names=BENCH_VARS):
    return parse(text, names)


class TestParse:
    def test_product_of_sum(self):
        e = p("x2*(u1+1)")
        assert equal(e, Expression.var("x2") * (Expression.var("u1") + Expression.number(1)))

    def test_benchmark_fourth_component(self):
        e = p("x5 + 1 - x1*(u1+1)/(x2+1)")
        manual = (
            Expression.var("x5")
            + Expression.number(1)
            - Expression.var("x1")
            * (Expression.var("u1") + Expression.number(1))
            / (Expression.var("x2") + Expression.number(1))
        )
        assert equal(e, manual)

    def test_unknown_identifier(self):
        with pytest.raises(UnknownIdentifierError) as err:
            parse("x9", ["x1"])
        assert "x9" in str(err.value)

    def test_syntax_error_position(self):
        with pytest.raises(ExpressionSyntaxError) as err:
            parse("x1 + * 2", ["x1"])
        assert err.value.position == 5

    def test_rational_literal(self):
        assert equal(p("3/4"), Expression.number(3, 4))

    def test_power_and_unary_minus(self):
        # unary minus lives inside `base`, so it binds tighter than "^"
        e = p("-x1^2 + (-x2)^3")
        manual = (-Expression.var("x1")) ** 2 + (-Expression.var("x2")) ** 3
        assert equal(e, manual)

    def test_trailing_garbage_rejected(self):
        with pytest.raises(ExpressionSyntaxError):
            parse("x1 x1", ["x1"])


class TestRenderRoundTrip:
    def test_benchmark_components(self, bench_system):
        for d in bench_system.dynamics:
            again = parse(render(d), BENCH_VARS)
            assert equal(d, again)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=60, deadline=None)
    def test_random_expression_round_trip(self, seed):
        rng = random.Random(seed)
        e = _random_expression(rng, ["x1", "x2", "u1"])
        again = parse(render(e), ["x1", "x2", "u1"])
        assert equal(e, again)


def _random_expression(rng, names, depth=0):
    choice = rng.random()
    if depth > 3 or choice < 0.35:
        if rng.random() < 0.5:
            return Expression.number(rng.randint(-9, 9), rng.randint(1, 5))
        return Expression.var(rng.choice(names))
    a = _random_expression(rng, names, depth + 1)
    b = _random_expression(rng, names, depth + 1)
    op = rng.choice(["+", "-", "*", "/", "^"])
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b if not is_zero(b) else a
    return a ** rng.randint(0, 3)


class TestDifferentiate:
    def test_linear_in_input(self):
        assert equal(differentiate(p("x2*(u1+1)"), "u1"), p("x2"))

    def test_quotient_rule(self):
        got = differentiate(p("x1*(u1+1)/(x2+1)"), "x2")
        assert equal(got, p("-x1*(u1+1)/(x2+1)^2"))

    def test_absent_variable(self):
        assert is_zero(differentiate(p("x2*(u1+1)"), "x3"))

    def test_product_rule_randomized(self):
        rng = random.Random(3)
        for _ in range(25):
            a = _random_expression(rng, ["x1", "x2"])
            b = _random_expression(rng, ["x1", "x2"])
            lhs = differentiate(a * b, "x1")
            rhs = differentiate(a, "x1") * b + a * differentiate(b, "x1")
            assert is_zero(lhs - rhs)

    def test_linearity_randomized(self):
        rng = random.Random(4)
        for _ in range(25):
            a = _random_expression(rng, ["x1", "x2"])
            b = _random_expression(rng, ["x1", "x2"])
            lhs = differentiate(a + b, "x2")
            rhs = differentiate(a, "x2") + differentiate(b, "x2")
            assert is_zero(lhs - rhs)


class TestSubstitute:
    def test_state_transformation(self):
        e = p("x2-x4")
        got = substitute(e, {"x2": p("xt4", ["xt4"]), "x4": p("xt1+1", ["xt1"])})
        assert equal(got, parse("xt4-xt1-1", ["xt1", "xt4"]))

    def test_empty_bindings_identity(self):
        e = p("x1/(x2+1)")
        assert equal(substitute(e, {}), e)

    def test_input_transform_inverse(self):
        e = p("u2+x2")
        got = substitute(e, {"u2": parse("w1-x2", ["w1", "x2"])})
        assert equal(got, parse("w1", ["w1"]))

    def test_simultaneous_swap(self):
        e = p("x1 - x2")
        got = substitute(e, {"x1": p("x2"), "x2": p("x1")})
        assert equal(got, p("x2 - x1"))


class TestIsZero:
    def test_algebraic_identity(self):
        assert is_zero(p("((x2+1)/x1)*x1 - x2 - 1"))

    def test_nonzero_function(self):
        assert not is_zero(p("x1/(x2+1)"))

    def test_lambda_coefficient_with_solution_plugged_in(self):
        coeff = substitute(
            parse("-lam1/(x2+1)", ["lam1", "x2"]), {"lam1": Expression.number(0)}
        )
        assert is_zero(coeff)

    def test_agrees_with_evaluation(self):
        rng = random.Random(11)
        sampler = Sampler(seed=5, trials=20)
        for _ in range(30):
            e1 = _random_expression(rng, ["x1", "x2"])
            e2 = _random_expression(rng, ["x1", "x2"])
            diff = e1 - e2
            expected = is_zero(diff)
            agree = True
            done = 0
            while done < 20:
                pt = sampler.point(sorted(diff.variables)) if diff.variables else {}
                try:
                    val = evaluate(diff, pt)
                except ZeroDivisionError:
                    continue
                done += 1
                if val != 0:
                    agree = False
                    break
            assert expected == agree


class TestGenericRank:
    def _jacobian(self, system, wrt):
        return SymbolicMatrix.from_rows(
            [[differentiate(d, v) for v in wrt] for d in system.dynamics]
        )

    def test_input_jacobian_rank(self, bench_system):
        M = self._jacobian(bench_system, ["u1", "u2"])
        rows = [[e.sym for e in r] for r in M.entries]
        oracle = sampled_matrix_rank(rows, BENCH_VARS, random.Random(2))
        assert oracle == 2
        assert generic_rank(M) == 2

    def test_state_jacobian_rank(self, bench_system):
        M = self._jacobian(bench_system, ["x1", "x2", "x3", "x4", "x5"])
        rows = [[e.sym for e in r] for r in M.entries]
        oracle = sampled_matrix_rank(rows, BENCH_VARS, random.Random(2))
        assert oracle == 3  # n - m_u = 5 - 2
        assert generic_rank(M) == 3

    def test_zero_matrix(self):
        M = SymbolicMatrix.zero(3, 2)
        assert generic_rank(M) == 0

    def test_invariance_under_permutation_and_scaling(self):
        rng = random.Random(9)
        base = [[_random_expression(rng, ["x1", "x2"]) for _ in range(3)] for _ in range(3)]
        M = SymbolicMatrix.from_rows(base)
        r = generic_rank(M)
        permuted = SymbolicMatrix.from_rows([base[2], base[0], base[1]])
        assert generic_rank(permuted) == r
        scale = p("x1^2+1", ["x1"])
        scaled = SymbolicMatrix.from_rows([[scale * e for e in row] for row in base])
        assert generic_rank(scaled) == r


class TestSolveLinear:
    def test_no_constraint(self):
        A = SymbolicMatrix.from_rows([[Expression.number(0), Expression.number(0)]])
        basis = solve_linear_over_field(A, ["l1", "l2"])
        assert len(basis) == 2
        got = {tuple(render(x) for x in v) for v in basis}
        assert got == {("1", "0"), ("0", "1")}

    def test_identity_only_trivial(self):
        A = SymbolicMatrix.from_rows(
            [
                [Expression.number(1), Expression.number(0)],
                [Expression.number(0), Expression.number(1)],
            ]
        )
        assert solve_linear_over_field(A, ["l1", "l2"]) == []

    def test_benchmark_lambda_system(self):
        # the only surviving equation: -l1/(x2+1) * (nonzero) = 0
        A = SymbolicMatrix.from_rows([[p("-1/(x2+1)"), Expression.number(0)]])
        basis = solve_linear_over_field(A, ["l1", "l2"])
        assert len(basis) == 1
        assert is_zero(basis[0][0]) and equal(basis[0][1], Expression.number(1))

    def test_normalization_first_nonzero_is_one(self):
        A = SymbolicMatrix.from_rows([[p("x1"), p("x1*x2"), Expression.number(0)]])
        basis = solve_linear_over_field(A, ["a", "b", "c"])
        for v in basis:
            lead = next(x for x in v if not is_zero(x))
            assert equal(lead, Expression.number(1))

    def test_unknowns_must_not_occur(self):
        A = SymbolicMatrix.from_rows([[p("x1")]])
        with pytest.raises(ValueError):
            solve_linear_over_field(A, ["x1"])


class TestSolveMapInverse:
    def test_input_change(self):
        inv = solve_map_inverse(
            [("v1", p("u1")), ("w1", p("u2+x2"))], ["u1", "u2"]
        )
        assert equal(inv["u1"], parse("v1", ["v1"]))
        assert equal(inv["u2"], parse("w1-x2", ["w1", "x2"]))

    def test_five_equation_state_map(self):
        names = ["x1", "x2", "x3", "x4", "x5"]
        eqs = [
            ("xt1", p("x4-1")),
            ("xt2", p("x1")),
            ("xt3", p("x5-x3-1")),
            ("xt4", p("x2")),
            ("xt5", p("x5")),
        ]
        inv = solve_map_inverse(eqs, names)
        t = lambda s: parse(s, ["xt1", "xt2", "xt3", "xt4", "xt5"])
        assert equal(inv["x1"], t("xt2"))
        assert equal(inv["x2"], t("xt4"))
        assert equal(inv["x3"], t("xt5-xt3-1"))
        assert equal(inv["x4"], t("xt1+1"))
        assert equal(inv["x5"], t("xt5"))

    def test_cube_unsupported(self):
        with pytest.raises(UnsupportedInversionError):
            solve_map_inverse([("z", parse("x^3", ["x"]))], ["x"])

    def test_rank_deficient(self):
        with pytest.raises(RankDeficientError):
            solve_map_inverse(
                [("z1", p("u1")), ("z2", p("2*u1"))], ["u1", "u2"]
            )

    def test_coupled_linear_system(self):
        inv = solve_map_inverse(
            [("w1", p("2*u1+u2")), ("w2", p("u1-u2"))], ["u1", "u2"]
        )
        w = lambda s: parse(s, ["w1", "w2"])
        assert equal(inv["u1"], w("(w1+w2)/3"))
        assert equal(inv["u2"], w("(w1-2*w2)/3"))

    def test_round_trip_residuals(self):
        eqs = [("z1", p("x1*(x2+1)")), ("z2", p("x2-x4")), ("z3", p("x4"))]
        inv = solve_map_inverse(eqs, ["x1", "x2", "x4"])
        for name, rhs in eqs:
            back = substitute(rhs, inv)
            assert is_zero(back - Expression.var(name))


class TestExpressInGenerators:
    def test_reciprocal_through_map(self):
        gens = [p("x2*(u1+1)"), p("u1")]
        phi = express_in_generators(p("1/x2"), gens, ["z1", "z2"])
        assert phi is not None
        back = substitute(phi, {"z1": gens[0], "z2": gens[1]})
        assert is_zero(back - p("1/x2"))

    def test_rejects_non_member(self):
        gens = [p("x1+u1")]
        assert express_in_generators(p("x1"), gens, ["z1"]) is None


class TestCanonicalize:
    def test_strips_additive_constant(self):
        assert equal(canonicalize_function(p("x4-x2-1")), p("x4-x2"))

    def test_reciprocal_constant_numerator(self):
        assert equal(canonicalize_function(p("1/x4")), p("x4"))

    def test_scale_removed(self):
        got = canonicalize_function(p("2*x1-2*x2"))
        assert equal(got, p("x1-x2")) or equal(got, p("x2-x1"))

    def test_pole_at_origin_left_alone(self):
        e = p("(x2+1)/x1")
        assert equal(canonicalize_function(e), e)
