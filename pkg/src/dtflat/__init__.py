"""dtflat: flatness analysis for discrete-time nonlinear systems.

Decides whether x+ = f(x, u) is flat via the projectable-input-field
necessary condition, constructs the normal-form decomposition chain, and
extracts flat outputs plus (when the chain fully reduces) a verified flat
parametrization.
"""

from .analysis import AnalysisOutcome, analyze
from .expr_core import Expression, Sampler, parse, render
from .exterior import Chart, DifferentialForm, MapBetweenCharts, VectorField
from .distributions import Codistribution, Distribution
from .flatness import (
    FlatnessReport,
    FlatParametrization,
    VerificationReport,
    advanced_test,
    corollary_check,
    simple_test,
    verify_parametrization,
)
from .system import DiscreteSystem, eliminate_trivial_inputs, projectable_input_fields

__version__ = "0.1.0"

__all__ = [
    "AnalysisOutcome",
    "analyze",
    "Expression",
    "Sampler",
    "parse",
    "render",
    "Chart",
    "DifferentialForm",
    "MapBetweenCharts",
    "VectorField",
    "Codistribution",
    "Distribution",
    "FlatnessReport",
    "FlatParametrization",
    "VerificationReport",
    "advanced_test",
    "corollary_check",
    "simple_test",
    "verify_parametrization",
    "DiscreteSystem",
    "eliminate_trivial_inputs",
    "projectable_input_fields",
    "__version__",
]
