"""
Wealth-equivalent costs between investor types.

The cumulated cost ``C^{ij}`` is the fraction of initial wealth an investor
of type ``i`` would give up to become type ``j``::

    V^i(x) = V^j(x * (1 - C^{ij}))

and the annual cost ``c^{ij}`` spreads it over the horizon,
``(1 - c^{ij})**T = 1 - C^{ij}``. Because all four expected utilities are
CRRA in ``x``, both reduce to differences of excess log-growth rates (see
:func:`infowelfare.model.excess_log_growth`)::

    C^{ij} = 1 - exp(g_i - g_j),     c^{ij} = 1 - exp((g_i - g_j)/T)

which is how they are evaluated here. No wealth argument is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple, Optional

from .errors import ConsistencyError, UnsupportedLimit, ZeroHorizon
from .model import (
    InvestorProfile,
    InvestorType,
    MarketParams,
    _excess_log_growth,
    excess_log_growth,
    gamma_bound,
    horizon_bound,
    require_feasible,
)

__all__ = [
    "NEGATIVE_COST_TOL",
    "CostKind",
    "CostPair",
    "CostReport",
    "REPORT_PAIRS",
    "TaylorCoefficients",
    "cumulated_cost",
    "annual_cost",
    "cost",
    "cost_report",
    "taylor_reference",
    "annual_error_slope",
    "limit_reference",
]

CostKind = Literal["cumulated", "annual"]

#: Computed costs below ``-NEGATIVE_COST_TOL`` indicate a bug and raise.
NEGATIVE_COST_TOL = 1e-12

U, M, R, I = InvestorType.U, InvestorType.M, InvestorType.R, InvestorType.I


class CostPair(NamedTuple):
    """Ordered pair ``src <= dst``: the cost of moving from ``src`` to ``dst``."""

    src: InvestorType
    dst: InvestorType

    @classmethod
    def of(cls, src, dst) -> CostPair:
        src, dst = InvestorType(src), InvestorType(dst)
        if not src <= dst:
            raise ValueError(f"cost pairs must be ordered U <= M <= R <= I, got {src}{dst}")
        return cls(src, dst)

    @classmethod
    def parse(cls, label: str) -> CostPair:
        """``"UM"`` -> ``CostPair(U, M)``."""
        if len(label) != 2:
            raise ValueError(f"expected a two-letter pair like 'UM', got {label!r}")
        return cls.of(label[0].upper(), label[1].upper())

    @property
    def label(self) -> str:
        return f"{self.src.value}{self.dst.value}"


REPORT_PAIRS = (CostPair(U, M), CostPair(M, R), CostPair(R, I), CostPair(U, I))


def _as_pair(pair) -> CostPair:
    if isinstance(pair, str):
        return CostPair.parse(pair)
    return CostPair.of(*pair)


def _log_retention(pair: CostPair, params: MarketParams, profile: InvestorProfile) -> float:
    """``ln(1 - C^{ij}) = g_i - g_j``."""
    require_feasible(params, profile)
    if pair.src == pair.dst:
        return 0.0
    if pair == (R, I):
        # g_R - g_I = 0.5*ln(D/(gamma*(1 + v0*T))) without the common theta0 term
        g, T, v0 = profile.gamma, profile.horizon_T, params.v0
        log_margin = 0.0 if profile.is_log else math.log1p(-(1.0 - g) * v0 * T / g)
        return 0.5 * (log_margin - math.log1p(v0 * T))
    if pair == (M, R) and profile.is_log:
        return 0.0
    return excess_log_growth(pair.src, params, profile) - excess_log_growth(pair.dst, params, profile)


def _checked(c: float, pair: CostPair, profile: InvestorProfile) -> float:
    if c < -NEGATIVE_COST_TOL:
        raise ConsistencyError(
            f"negative cost {c:.3g} for {pair.label} at gamma={profile.gamma}, T={profile.horizon_T}"
        )
    # rounding noise of the log-growth difference (C^{MR} is o(T^2)); also maps -0.0 to 0.0
    return c if c > 0.0 else 0.0


def cumulated_cost(pair, params: MarketParams, profile: InvestorProfile) -> float:
    """Fraction of wealth ``C^{ij}`` equating ``V^i(x)`` and ``V^j(x(1 - C))``."""
    pair = _as_pair(pair)
    return _checked(-math.expm1(_log_retention(pair, params, profile)), pair, profile)


def annual_cost(pair, params: MarketParams, profile: InvestorProfile) -> float:
    """Annual fee ``c^{ij}`` with ``(1 - c)**T = 1 - C^{ij}``; needs ``T > 0``."""
    pair = _as_pair(pair)
    if profile.horizon_T <= 0:
        raise ZeroHorizon("annual costs need a positive horizon")
    log_ret = _log_retention(pair, params, profile)
    return _checked(-math.expm1(log_ret / profile.horizon_T), pair, profile)


def cost(kind: CostKind, pair, params: MarketParams, profile: InvestorProfile) -> float:
    if kind == "cumulated":
        return cumulated_cost(pair, params, profile)
    if kind == "annual":
        return annual_cost(pair, params, profile)
    raise ValueError(f"unknown cost kind {kind!r}")


@dataclass(frozen=True)
class CostReport:
    """Costs of the three adjacent moves, their composition, and the additive error.

    ``approx_error`` is ``c_UI - (c_UM + c_MR + c_RI)``: the error of
    approximating the total cost by the sum of its parts.
    """

    kind: CostKind
    c_UM: float
    c_MR: float
    c_RI: float
    c_UI: float
    approx_error: float
    params: MarketParams
    profile: InvestorProfile

    @property
    def components(self) -> tuple[float, float, float]:
        return (self.c_UM, self.c_MR, self.c_RI)

    def shares(self) -> tuple[float, float, float]:
        """Relative contribution of each adjacent cost to their sum."""
        total = sum(self.components)
        if total <= 0:
            raise ZeroDivisionError("all component costs are zero")
        return tuple(c / total for c in self.components)

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "gamma": self.profile.gamma,
            "T": self.profile.horizon_T,
            "r": self.params.r,
            "sigma": self.params.sigma,
            "theta0": self.params.theta0,
            "v0": self.params.v0,
            "c_UM": self.c_UM,
            "c_MR": self.c_MR,
            "c_RI": self.c_RI,
            "c_UI": self.c_UI,
            "err": self.approx_error,
        }


def cost_report(kind: CostKind, params: MarketParams, profile: InvestorProfile) -> CostReport:
    c_um, c_mr, c_ri, c_ui = (cost(kind, p, params, profile) for p in REPORT_PAIRS)
    return CostReport(
        kind=kind,
        c_UM=c_um,
        c_MR=c_mr,
        c_RI=c_ri,
        c_UI=c_ui,
        approx_error=c_ui - (c_um + c_mr + c_ri),
        params=params,
        profile=profile,
    )


# ---------------------------------------------------------------------------
# Asymptotic references (hard-coded closed forms)
# ---------------------------------------------------------------------------


class TaylorCoefficients(NamedTuple):
    """Expansion ``constant + linear*T + quadratic*T**2 + ...`` around ``T = 0``.

    ``quadratic`` is ``None`` where only a first-order expansion is known.
    """

    constant: float
    linear: float
    quadratic: Optional[float]

    def __call__(self, T: float) -> float:
        out = self.constant + self.linear * T
        if self.quadratic is not None:
            out += self.quadratic * T * T
        return out


def taylor_reference(kind: CostKind, pair, params: MarketParams, gamma: float) -> TaylorCoefficients:
    """Leading small-horizon coefficients of a cost (cumulated: to T^2; annual: to T)."""
    pair = _as_pair(pair)
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    v0 = params.v0
    lead = v0 * v0 / (4.0 * gamma)
    if kind == "cumulated":
        table = {
            (U, M): (0.0, 0.0, lead),
            (M, R): (0.0, 0.0, 0.0),
            (R, I): (0.0, v0 / (2.0 * gamma), lead * (1.0 / (2.0 * gamma) - 2.0)),
            (U, I): (0.0, v0 / (2.0 * gamma), lead * (1.0 / (2.0 * gamma) - 1.0)),
        }
    elif kind == "annual":
        shrink = math.exp(-v0 / (2.0 * gamma))
        slope = shrink * v0 * v0 / (2.0 * gamma * gamma)
        table = {
            (U, M): (0.0, lead, None),
            (M, R): (0.0, 0.0, None),
            (R, I): (1.0 - shrink, slope * (0.5 - gamma), None),
            (U, I): (1.0 - shrink, slope * (0.5 - 0.5 * gamma), None),
        }
    else:
        raise ValueError(f"unknown cost kind {kind!r}")
    if pair not in table:
        raise UnsupportedLimit(f"no small-horizon expansion for {pair.label}")
    return TaylorCoefficients(*table[pair])


def annual_error_slope(params: MarketParams, gamma: float) -> float:
    """Coefficient of ``T`` in the annual additive error near ``T = 0``."""
    v0 = params.v0
    return (math.exp(-v0 / (2.0 * gamma)) - 1.0) * v0 * v0 / (4.0 * gamma)


Toward = Literal["T->inf", "T->0", "T->Tbar", "gamma->inf", "gamma->gammabar"]


def limit_reference(
    kind: CostKind,
    pair,
    params: MarketParams,
    profile: InvestorProfile,
    toward: Toward,
) -> float:
    """Closed-form limit of a cost.

    ``toward`` names the variable that moves; the other one is taken from
    ``profile`` (``gamma`` for horizon limits, ``horizon_T`` for
    risk-aversion limits). Limits of ``C^{UM}`` at the feasibility boundary
    are finite and are evaluated from the myopic and unconditional exponents
    at the boundary itself.
    """
    pair = _as_pair(pair)
    if pair.src == pair.dst:
        return 0.0
    g, T, v0 = profile.gamma, profile.horizon_T, params.v0
    if kind not in ("cumulated", "annual"):
        raise ValueError(f"unknown cost kind {kind!r}")
    log_case = profile.is_log

    if toward == "gamma->inf":
        return 0.0

    if toward == "T->0":
        if kind == "cumulated":
            return 0.0
        return taylor_reference("annual", pair, params, g).constant

    if toward == "T->inf":
        if g < 1.0 and not log_case:
            raise UnsupportedLimit("for gamma < 1 the horizon is bounded; use 'T->Tbar'")
        if kind == "cumulated":
            if pair == (M, R) and log_case:
                return 0.0
            if pair == (R, I) and not log_case:
                return 1.0 - math.sqrt(1.0 - 1.0 / g)
            return 1.0
        # annual
        if log_case:
            values = {(U, M): -math.expm1(-v0 / 2.0), (M, R): 0.0, (R, I): 0.0}
        else:
            values = {(U, M): 1.0, (M, R): 0.0, (R, I): 0.0}
        return _compose(pair, values)

    if toward in ("T->Tbar", "gamma->gammabar"):
        if toward == "T->Tbar":
            if g >= 1.0 or log_case:
                raise UnsupportedLimit("T_bar is finite only for gamma < 1")
            g_edge, T_edge = g, horizon_bound(g, v0)
        else:
            if T <= 0:
                raise UnsupportedLimit("gamma_bar is zero at T == 0")
            g_edge, T_edge = gamma_bound(T, v0), T
        if pair.dst in (R, I):
            return 1.0
        # pair is U->M (or a trivial pair handled above); both exponents stay finite
        log_ret = _excess_log_growth(pair.src, params, g_edge, T_edge) - _excess_log_growth(
            pair.dst, params, g_edge, T_edge
        )
        if kind == "annual":
            log_ret /= T_edge
        return -math.expm1(log_ret)

    raise UnsupportedLimit(f"unknown limit {toward!r}")


def _compose(pair: CostPair, adjacent: dict) -> float:
    """Cost of a non-adjacent move from the adjacent ones: ``1 - prod(1 - c)``."""
    order = [U, M, R, I]
    retained = 1.0
    for k in range(order.index(pair.src), order.index(pair.dst)):
        retained *= 1.0 - adjacent[(order[k], order[k + 1])]
    return 1.0 - retained

