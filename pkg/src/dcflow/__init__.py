"""dcflow: optimal power flow for DC microgrids via conic relaxation."""

from .netmodel import (
    AssumptionReport,
    Bus,
    CostFunction,
    Line,
    Network,
    check_assumptions,
    validate_network,
)

__version__ = "0.1.0"

__all__ = [
    "AssumptionReport",
    "Bus",
    "CostFunction",
    "Line",
    "Network",
    "check_assumptions",
    "validate_network",
    "__version__",
]
