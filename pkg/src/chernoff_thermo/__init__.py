"""Large-deviations rate functions from weighted partition functions.

The core object is a :class:`~chernoff_thermo.model.WeightedModel`; the
``thermo`` module solves for its entropy, ``ldp`` turns that into rate
functions and finite-n probabilities, and ``apps`` hosts the coding and
testing calculators.
"""

from .errors import ChernoffError, ValidityWarning
from .ldp import (
    ProbabilityEstimate,
    RateResult,
    dual_rate_check,
    exact_probability,
    monte_carlo_probability,
    rate_function,
)
from .model import (
    EnergyRange,
    WeightCounts,
    WeightedModel,
    attach_weight_counts,
    energy_range,
    load_model,
    make_model,
    serialize_model,
)
from .thermo import (
    SearchControl,
    ThermoSolution,
    entropy_sv,
    equilibrium_allocation,
    lhs_entropy,
    sigma_bar,
    solve_beta,
    verify_identity,
)

__version__ = "0.1.0"

__all__ = [
    "ChernoffError",
    "EnergyRange",
    "ProbabilityEstimate",
    "RateResult",
    "SearchControl",
    "ThermoSolution",
    "ValidityWarning",
    "WeightCounts",
    "WeightedModel",
    "attach_weight_counts",
    "dual_rate_check",
    "energy_range",
    "entropy_sv",
    "equilibrium_allocation",
    "exact_probability",
    "lhs_entropy",
    "load_model",
    "make_model",
    "monte_carlo_probability",
    "rate_function",
    "serialize_model",
    "sigma_bar",
    "solve_beta",
    "verify_identity",
]
