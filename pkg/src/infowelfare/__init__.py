"""Welfare costs of partial information about expected returns for CRRA investors."""

from .errors import (
    ConsistencyError,
    InfeasibleParameters,
    LogGammaUnsupported,
    ModelError,
    NonpositiveWealth,
    TimeOutOfRange,
    UnsupportedLimit,
    ZeroHorizon,
)
from .model import (
    FilterState,
    InvestorProfile,
    InvestorType,
    MarketParams,
    feasibility_check,
    filter_estimate,
    phi_psi,
    strategy,
    value,
    value_log,
    value_surface,
)

__version__ = "0.1.0"
