import random

import pytest

from dtflat.exceptions import ChartMismatchError, RankDeficientError
from dtflat.expr_core import Expression, equal, is_zero, parse, render
from dtflat.exterior import (
    Chart,
    DifferentialForm,
    MapBetweenCharts,
    VectorField,
    differential,
    dual_frame,
    exterior_derivative,
    factors_through,
    interior_product,
    kernel_fields,
    lie_bracket,
    pairing,
    pullback,
    pushforward_along_submersion,
    wedge,
)

from conftest import field_from_dict, one_form_from_dict
from oracles import textbook_bracket, eval_fraction, fraction_rank

BENCH = ["x1", "x2", "x3", "x4", "x5", "u1", "u2"]


def p(text, names=BENCH):
    return parse(text, names)


SMALL = Chart.of(["a", "b", "c"])


def _rand_field(rng, chart):
    from oracles import random_polynomial

    return VectorField(
        chart,
        tuple(Expression(random_polynomial(rng, list(chart.names), terms=2)) for _ in chart.names),
    )


def _rand_one_form(rng, chart):
    from oracles import random_polynomial

    return DifferentialForm.one_form(
        chart,
        [Expression(random_polynomial(rng, list(chart.names), terms=2)) for _ in chart.names],
    )


@pytest.fixture(scope="module")
def S():
    return Chart.of(BENCH)


@pytest.fixture(scope="module")
def bench_map(S):
    comps = [
        p("x2*(u1+1)"),
        p("u1"),
        p("x4+u2-1"),
        p("x5+1-x1*(u1+1)/(x2+1)"),
        p("u2+x2"),
    ]
    target = Chart.of([f"x{i}_p" for i in range(1, 6)])
    return MapBetweenCharts.make(S, target, comps)


class TestWedge:
    def test_self_wedge_vanishes(self, S):
        a = DifferentialForm.basis_one_form(S, "x1")
        assert wedge(a, a).is_zero_form()

    def test_graded_antisymmetry_degree_one(self, S):
        a = DifferentialForm.basis_one_form(S, "x1")
        b = DifferentialForm.basis_one_form(S, "x2")
        assert wedge(a, b).add(wedge(b, a)).is_zero_form()

    def test_expansion_by_multilinearity(self, S):
        du = DifferentialForm.basis_one_form(S, "u1")
        mix = one_form_from_dict(S, {"x1": "1", "x2": "u1", "u1": "x2"})
        dx2 = DifferentialForm.basis_one_form(S, "x2")
        got = wedge(wedge(du, mix), dx2)
        i_u1, i_x1, i_x2 = S.index("u1"), S.index("x1"), S.index("x2")
        expected = DifferentialForm.make(
            S, 3, {tuple(sorted((i_u1, i_x1, i_x2))): Expression.number(1)}
        )
        # du1^dx1^dx2 = +dx1^dx2^du1 in canonical order
        diff = got.add(expected.scale(Expression.number(-1)))
        assert diff.is_zero_form()

    def test_degree_overflow_returns_zero(self):
        C = Chart.of(["a", "b"])
        da = DifferentialForm.basis_one_form(C, "a")
        db = DifferentialForm.basis_one_form(C, "b")
        two = wedge(da, db)
        assert wedge(two, da).is_zero_form()


class TestExteriorDerivative:
    def test_paper_generator(self, S):
        got = differential(S, p("x2*(u1+1)"))
        expected = one_form_from_dict(S, {"x2": "u1+1", "u1": "x2"})
        assert got.add(expected.scale(Expression.number(-1))).is_zero_form()

    def test_dd_zero_on_functions(self, S):
        rng = random.Random(21)
        from test_expr_core import _random_expression

        for _ in range(20):
            f = _random_expression(rng, ["x1", "x2", "u1"])
            assert exterior_derivative(differential(S, f)).is_zero_form()

    def test_dd_zero_on_one_forms(self):
        rng = random.Random(22)
        for _ in range(15):
            omega = _rand_one_form(rng, SMALL)
            assert exterior_derivative(exterior_derivative(omega)).is_zero_form()

    def test_product_rule(self, S):
        got = exterior_derivative(
            DifferentialForm.one_form(
                S, [p("0"), p("x1")] + [p("0")] * 5
            )
        )
        i1, i2 = S.index("x1"), S.index("x2")
        expected = DifferentialForm.make(S, 2, {(i1, i2): Expression.number(1)})
        assert got.add(expected.scale(Expression.number(-1))).is_zero_form()


class TestInteriorProduct:
    def test_pairing_with_shift_direction(self, S):
        omega = one_form_from_dict(S, {"x4": "1", "u2": "1"})
        v = VectorField.coordinate(S, "u2")
        assert equal(pairing(omega, v), Expression.number(1))

    def test_kronecker(self, S):
        omega = DifferentialForm.basis_one_form(S, "u1")
        v = VectorField.coordinate(S, "u2")
        assert is_zero(pairing(omega, v))

    def test_derivation_rule_on_random_one_forms(self):
        rng = random.Random(23)
        for _ in range(15):
            a = _rand_one_form(rng, SMALL)
            b = _rand_one_form(rng, SMALL)
            v = _rand_field(rng, SMALL)
            lhs = interior_product(v, wedge(a, b))
            rhs = b.scale(pairing(a, v)).add(a.scale(pairing(b, v)).scale(Expression.number(-1)))
            assert lhs.add(rhs.scale(Expression.number(-1))).is_zero_form()


class TestLieBracket:
    def test_coordinate_fields_commute(self, S):
        a = VectorField.coordinate(S, "x1")
        b = VectorField.coordinate(S, "x2")
        assert lie_bracket(a, b).is_zero_field()

    def test_direct_computation(self, S):
        a = VectorField.coordinate(S, "x1")
        b = field_from_dict(S, {"x2": "x1"})
        got = lie_bracket(a, b)
        assert equal(got.components[S.index("x2")], Expression.number(1))
        assert sum(0 if is_zero(c) else 1 for c in got.components) == 1

    def test_shift_block_commutes(self, S):
        a = VectorField.coordinate(S, "x4")
        b = field_from_dict(S, {"x1": "x1", "x2": "x2+1"})
        assert lie_bracket(a, b).is_zero_field()

    def test_against_textbook_oracle(self):
        rng = random.Random(24)
        for _ in range(10):
            a = _rand_field(rng, SMALL)
            b = _rand_field(rng, SMALL)
            got = lie_bracket(a, b)
            oracle = textbook_bracket(
                [c.sym for c in a.components], [c.sym for c in b.components], list(SMALL.names)
            )
            for g, o in zip(got.components, oracle):
                assert is_zero(g - Expression(o))

    def test_jacobi_identity(self):
        rng = random.Random(25)
        for _ in range(6):
            a, b, c = (_rand_field(rng, SMALL) for _ in range(3))
            total = lie_bracket(a, lie_bracket(b, c)).add(
                lie_bracket(b, lie_bracket(c, a))
            ).add(lie_bracket(c, lie_bracket(a, b)))
            assert total.is_zero_field()


class TestPullback:
    def test_first_p0_generator(self, S):
        target = Chart.of(["y1"])
        phi = MapBetweenCharts.make(S, target, [p("x2*(u1+1)")])
        got = pullback(phi, DifferentialForm.basis_one_form(target, "y1"))
        expected = one_form_from_dict(S, {"x2": "u1+1", "u1": "x2"})
        assert got.add(expected.scale(Expression.number(-1))).is_zero_form()

    def test_constant_unchanged(self, S):
        target = Chart.of(["y1"])
        phi = MapBetweenCharts.make(S, target, [p("x1+u1")])
        got = pullback(phi, DifferentialForm.function(target, Expression.number(7)))
        assert equal(got.coefficient(()), Expression.number(7))

    def test_naturality_with_d(self, S, bench_map):
        rng = random.Random(26)
        from test_expr_core import _random_expression

        for _ in range(10):
            f = _random_expression(rng, ["x1_p", "x3_p"])
            alpha = DifferentialForm.function(bench_map.target, f)
            lhs = pullback(bench_map, exterior_derivative(alpha))
            rhs = exterior_derivative(pullback(bench_map, alpha))
            assert lhs.add(rhs.scale(Expression.number(-1))).is_zero_form()

    def test_distributes_over_wedge(self, S, bench_map):
        rng = random.Random(27)
        for _ in range(6):
            a = _rand_one_form(rng, bench_map.target)
            b = _rand_one_form(rng, bench_map.target)
            lhs = pullback(bench_map, wedge(a, b))
            rhs = wedge(pullback(bench_map, a), pullback(bench_map, b))
            assert lhs.add(rhs.scale(Expression.number(-1))).is_zero_form()


class TestDualFrame:
    def test_bench_completion_frame(self, S, bench_map):
        funcs = list(bench_map.components) + [p("x1"), p("x3")]
        frame = dual_frame(S, funcs)
        assert str(frame[2]) == "1*d/dx4"
        assert str(frame[3]) == "1*d/dx5"
        assert str(frame[6]) == "1*d/dx3"
        expected6 = field_from_dict(S, {"x1": "1", "x5": "(u1+1)/(x2+1)"})
        assert frame[5].add(expected6.scale(Expression.number(-1))).is_zero_field()

    def test_canonical_coordinates(self, S):
        funcs = [Expression.var(n) for n in S.names]
        frame = dual_frame(S, funcs)
        for i, f in enumerate(frame):
            for j, c in enumerate(f.components):
                assert equal(c, Expression.number(1 if i == j else 0))

    def test_duality_relation(self, S, bench_map):
        funcs = list(bench_map.components) + [p("x1"), p("x3")]
        frame = dual_frame(S, funcs)
        for j, f in enumerate(funcs):
            df = differential(S, f)
            for i, v in enumerate(frame):
                assert equal(pairing(df, v), Expression.number(1 if i == j else 0))

    def test_rank_deficient_rejected(self, S):
        funcs = [Expression.var(n) for n in S.names[:-1]] + [Expression.var(S.names[0])]
        with pytest.raises(RankDeficientError):
            dual_frame(S, funcs)


class TestPushforward:
    def test_non_projectable_input(self, S, bench_map):
        res = pushforward_along_submersion(bench_map, VectorField.coordinate(S, "u1"))
        assert not res.projected
        raw = [render(c) for c in res.raw]
        assert raw[0] == "x2" and raw[1] == "1"

    def test_projectable_input(self, S, bench_map):
        res = pushforward_along_submersion(bench_map, VectorField.coordinate(S, "u2"))
        assert res.projected
        comps = res.field.components
        tgt = bench_map.target
        assert equal(comps[tgt.index("x3_p")], Expression.number(1))
        assert equal(comps[tgt.index("x5_p")], Expression.number(1))
        assert all(
            is_zero(comps[tgt.index(n)]) for n in tgt.names if n not in ("x3_p", "x5_p")
        )

    def test_identity_map(self, S):
        ident = MapBetweenCharts.make(
            S, Chart.of([n + "_t" for n in S.names]), [Expression.var(n) for n in S.names]
        )
        rng = random.Random(28)
        v = VectorField(S, tuple(p(t) for t in ["x2*u1", "1", "0", "x3", "u2", "x1", "0"]))
        res = pushforward_along_submersion(ident, v)
        assert res.projected
        for a, b in zip(res.field.components, v.components):
            # coefficients re-expressed in target names
            sub = {n + "_t": Expression.var(n) for n in S.names}
            from dtflat.expr_core import substitute

            assert is_zero(substitute(a, sub) - b)

    def test_kernel_fields_push_to_zero(self, S, bench_map):
        for k in kernel_fields(bench_map):
            res = pushforward_along_submersion(bench_map, k)
            assert res.projected
            assert res.field.is_zero_field()


class TestKernelFields:
    def test_bench_kernel(self, S, bench_map):
        ker = kernel_fields(bench_map)
        assert len(ker) == 2
        from dtflat.distributions import Distribution

        got = Distribution.span(S, ker)
        paper = Distribution.span(
            S,
            [
                field_from_dict(S, {"x3": "1"}),
                field_from_dict(S, {"x1": "x2+1", "x5": "u1+1"}),
            ],
        )
        assert got.span_equals(paper)

    def test_identity_map_empty_kernel(self, S):
        ident = MapBetweenCharts.make(
            S, Chart.of([n + "_t" for n in S.names]), [Expression.var(n) for n in S.names]
        )
        assert kernel_fields(ident) == []

    def test_projection_kernel_is_fiber(self, S):
        proj = MapBetweenCharts.make(
            S, Chart.of(["x1_p", "x2_p", "x3_p", "x4_p", "x5_p"]),
            [Expression.var(n) for n in ["x1", "x2", "x3", "x4", "x5"]],
        )
        ker = kernel_fields(proj)
        from dtflat.distributions import Distribution

        got = Distribution.span(S, ker)
        fibers = Distribution.span(
            S, [VectorField.coordinate(S, "u1"), VectorField.coordinate(S, "u2")]
        )
        assert got.span_equals(fibers)


class TestChartGuards:
    def test_wedge_requires_same_chart(self):
        A = Chart.of(["a"])
        B = Chart.of(["b"])
        with pytest.raises(ChartMismatchError):
            wedge(DifferentialForm.basis_one_form(A, "a"), DifferentialForm.basis_one_form(B, "b"))

    def test_factors_through(self, bench_map):
        assert factors_through(bench_map, p("u1"))  # u1 = f2
        assert not factors_through(bench_map, p("x1"))
