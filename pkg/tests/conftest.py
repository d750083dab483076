import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dtflat.exterior import Chart, DifferentialForm, VectorField
from dtflat.expr_core import parse
from dtflat.system import DiscreteSystem

BENCH_STATES = ["x1", "x2", "x3", "x4", "x5"]
BENCH_INPUTS = ["u1", "u2"]
BENCH_DYNAMICS = [
    "x2*(u1+1)",
    "u1",
    "x4+u2-1",
    "x5+1-x1*(u1+1)/(x2+1)",
    "u2+x2",
]


@pytest.fixture(scope="session")
def bench_system() -> DiscreteSystem:
    """The five-state two-input benchmark exercised throughout the suite."""
    return DiscreteSystem.from_strings(BENCH_STATES, BENCH_INPUTS, BENCH_DYNAMICS)


@pytest.fixture(scope="session")
def bench_chart(bench_system) -> Chart:
    return bench_system.total_chart


def field_from_dict(chart: Chart, comps: dict[str, str]) -> VectorField:
    exprs = tuple(parse(comps.get(n, "0"), list(chart.names)) for n in chart.names)
    return VectorField(chart, exprs)


def one_form_from_dict(chart: Chart, comps: dict[str, str]) -> DifferentialForm:
    exprs = [parse(comps.get(n, "0"), list(chart.names)) for n in chart.names]
    return DifferentialForm.one_form(chart, exprs)


@pytest.fixture
def mk_field():
    return field_from_dict


@pytest.fixture
def mk_form():
    return one_form_from_dict
