"""When does reserving a finalist slot for an underrepresented group help?

Closed forms, finite-n quadrature oracles and Monte Carlo for biased top-k
selection with power-law (and bounded) candidate potentials.
"""

__version__ = "0.1.0"

from .errors import (
    DomainError,
    EmptyConditioningEvent,
    InsufficientConditioningEvents,
    MultiCrossing,
    NumericError,
)
from .rooney import (
    Marker,
    ModelParams,
    NoThreshold,
    beta_star,
    infinite_bias_positive,
    phi2,
    phi_k,
    prob_positive_given_change,
    prob_rule_binds,
)

__all__ = [
    "DomainError",
    "EmptyConditioningEvent",
    "InsufficientConditioningEvents",
    "Marker",
    "ModelParams",
    "MultiCrossing",
    "NoThreshold",
    "NumericError",
    "beta_star",
    "infinite_bias_positive",
    "phi2",
    "phi_k",
    "prob_positive_given_change",
    "prob_rule_binds",
]
