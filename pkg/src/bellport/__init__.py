"""Local-realism thresholds for entangled quNits behind Bell multiports.

The package answers two questions about a maximally entangled pair of
N-dimensional systems measured with phase shifters and unbiased multiport
beamsplitters:

- how much white noise must be mixed into the state before its predictions
  admit a local hidden-variable model (the critical noise fraction), and
- below which detector efficiency such a model exists even for the noise-free
  state (the critical efficiency).

Both are exact linear-programming feasibility questions; the answers here
come from a self-contained revised-simplex solver, cross-checked by
independent oracles (deterministic-strategy enumeration, a closed-form CHSH
bound at n=2, and exact arithmetic over quadratic number fields).
"""

from .multiport import (
    DEFAULT_MAX_DIMENSION,
    EfficiencyPredictionTable,
    PhaseSettings,
    PredictionTable,
    bell_multiport,
    check_dimension,
    efficiency_table,
    joint_probability,
    joint_probability_cosine,
    prediction_table,
    standard_settings,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MAX_DIMENSION",
    "EfficiencyPredictionTable",
    "PhaseSettings",
    "PredictionTable",
    "bell_multiport",
    "check_dimension",
    "efficiency_table",
    "joint_probability",
    "joint_probability_cosine",
    "prediction_table",
    "standard_settings",
    "__version__",
]
