"""
Closed-form expected utilities for CRRA investors facing an unknown,
Gaussian market price of risk.

A stock follows ``dS = S((r + sigma*Theta) dt + sigma dW)`` with
``Theta ~ N(theta0, v0)`` independent of ``W``. Four investor types are
modelled:

* ``I`` (informed) observes ``Theta`` and holds the Merton weight ``Theta/(sigma*gamma)``;
* ``R`` (rational) filters ``Theta`` from prices and adds an intertemporal hedge;
* ``M`` (myopic) uses the filtered estimate but ignores the hedge;
* ``U`` (unconditional) sticks to the prior mean ``theta0`` forever.

For ``gamma != 1`` every expected utility has the form::

    V(x) = x**(1-gamma)/(1-gamma) * exp(phi*theta0**2 + psi)

and the corresponding certainty-equivalent wealth is ``x*exp(r*T + g)``
with ``g = (phi*theta0**2 + psi - r*(1-gamma)*T)/(1-gamma)``. The "excess
log-growth" ``g`` is what the cost formulas need; :func:`excess_log_growth`
evaluates it in a form that has no ``0/0`` at ``gamma -> 1`` and reduces to
the logarithmic formulas there.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    InfeasibleParameters,
    LogGammaUnsupported,
    NonpositiveWealth,
    TimeOutOfRange,
)

__all__ = [
    "LOG_GAMMA_TOL",
    "FEASIBILITY_GUARD",
    "MarketParams",
    "InvestorProfile",
    "InvestorType",
    "PhiPsi",
    "MyopicRoots",
    "FilterState",
    "LogValue",
    "SurfaceCoefficients",
    "feasibility_margin",
    "feasibility_check",
    "require_feasible",
    "horizon_bound",
    "gamma_bound",
    "myopic_roots",
    "phi_psi",
    "excess_log_growth",
    "log_value",
    "value",
    "value_log",
    "utility",
    "certainty_equivalent",
    "filter_estimate",
    "posterior_mean",
    "strategy",
    "hedging_demand",
    "surface_coefficients",
    "value_surface",
]

#: ``|gamma - 1|`` at or below which the logarithmic formulas are used.
LOG_GAMMA_TOL = 1e-9

#: Relative guard band on the feasibility expression.
FEASIBILITY_GUARD = 1e-12


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarketParams:
    """Bond rate, stock volatility and Gaussian prior of the market price of risk.

    Parameters
    ----------
    r : float
        Risk-free rate per year, ``r >= 0``.
    sigma : float
        Stock volatility per sqrt-year, ``sigma > 0``.
    theta0 : float
        Prior mean of the market price of risk.
    v0 : float
        Prior variance of the market price of risk, ``v0 > 0``.
    """

    r: float
    sigma: float
    theta0: float
    v0: float

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.v0 > 0:
            raise ValueError(f"v0 must be positive, got {self.v0}")
        if not self.r >= 0:
            raise ValueError(f"r must be nonnegative, got {self.r}")
        if not math.isfinite(self.theta0):
            raise ValueError(f"theta0 must be finite, got {self.theta0}")

    @classmethod
    def calibrated(
        cls,
        sigma: float = 0.202,
        *,
        excess_return: float = 0.08,
        drift_sd: float = 0.0243,
        r: float = 0.05,
    ) -> MarketParams:
        """Calibration with ``theta0 = excess_return/sigma`` and ``v0 = (drift_sd/sigma)**2``.

        The defaults are the 5% rate, 8% expected excess return and 2.43%
        standard deviation of the expected excess return used for the
        reference cost tables; ``drift_sd=0.0452`` gives the alternative prior.
        """
        return cls(r=r, sigma=sigma, theta0=excess_return / sigma, v0=(drift_sd / sigma) ** 2)


@dataclass(frozen=True)
class InvestorProfile:
    """Relative risk aversion ``gamma > 0`` and horizon ``horizon_T >= 0`` (years)."""

    gamma: float
    horizon_T: float

    def __post_init__(self) -> None:
        if not self.gamma > 0 or not math.isfinite(self.gamma):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")
        if not self.horizon_T >= 0 or not math.isfinite(self.horizon_T):
            raise ValueError(f"horizon must be nonnegative and finite, got {self.horizon_T}")

    @property
    def is_log(self) -> bool:
        return abs(self.gamma - 1.0) <= LOG_GAMMA_TOL


@enum.unique
class InvestorType(str, enum.Enum):
    """Investor types, totally ordered as ``U < M < R < I``."""

    U = "U"
    M = "M"
    R = "R"
    I = "I"  # noqa: E741

    @property
    def rank(self) -> int:
        return _RANK[self.value]

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, InvestorType):
            return NotImplemented
        return self.rank < other.rank

    def __le__(self, other: object) -> bool:
        if not isinstance(other, InvestorType):
            return NotImplemented
        return self.rank <= other.rank

    def __gt__(self, other: object) -> bool:
        if not isinstance(other, InvestorType):
            return NotImplemented
        return self.rank > other.rank

    def __ge__(self, other: object) -> bool:
        if not isinstance(other, InvestorType):
            return NotImplemented
        return self.rank >= other.rank

    def __str__(self) -> str:
        return self.value


_RANK = {"U": 0, "M": 1, "R": 2, "I": 3}


class PhiPsi(NamedTuple):
    """Exponent pieces: ``phi`` multiplies ``theta0**2``, ``psi`` is the constant."""

    phi: float
    psi: float


class MyopicRoots(NamedTuple):
    r1: float
    r2: float

    @property
    def spread(self) -> float:
        return self.r2 - self.r1


@dataclass(frozen=True)
class FilterState:
    """Observation time, observation-process value and posterior mean of Theta."""

    t: float
    y: float
    theta_hat: float
    posterior_var: float


class LogValue(NamedTuple):
    """``sign * exp(log_abs)``; keeps values representable near the feasibility boundary."""

    sign: float
    log_abs: float

    def __float__(self) -> float:
        try:
            return self.sign * math.exp(self.log_abs)
        except OverflowError:
            return self.sign * math.inf


class SurfaceCoefficients(NamedTuple):
    """Time-``t`` exponent ``quadratic*theta_hat**2 + linear*theta_hat + constant``."""

    quadratic: float
    linear: float
    constant: float


# ---------------------------------------------------------------------------
# Feasibility
# ---------------------------------------------------------------------------


def feasibility_margin(gamma: float, horizon_T: float, v0: float) -> float:
    """``gamma*(1 + v0*T) - v0*T``; expected utilities are finite iff this is positive."""
    return gamma * (1.0 + v0 * horizon_T) - v0 * horizon_T


def feasibility_check(params: MarketParams, profile: InvestorProfile) -> bool:
    """True iff the expected utilities are finite, with a 1e-12 relative guard band."""
    margin = feasibility_margin(profile.gamma, profile.horizon_T, params.v0)
    scale = profile.gamma * (1.0 + params.v0 * profile.horizon_T)
    return margin > FEASIBILITY_GUARD * scale


def horizon_bound(gamma: float, v0: float) -> float:
    """Largest admissible horizon (exclusive); infinite for ``gamma >= 1``."""
    if gamma >= 1.0:
        return math.inf
    return gamma / (v0 * (1.0 - gamma))


def gamma_bound(horizon_T: float, v0: float) -> float:
    """Smallest admissible risk aversion (exclusive) at a given horizon."""
    return v0 * horizon_T / (1.0 + v0 * horizon_T)


def require_feasible(params: MarketParams, profile: InvestorProfile) -> None:
    if feasibility_check(params, profile):
        return
    g, T, v0 = profile.gamma, profile.horizon_T, params.v0
    margin = feasibility_margin(g, T, v0)
    raise InfeasibleParameters(
        f"gamma*(1+v0*T) - v0*T = {margin:.6g} must be > 0 "
        f"(gamma={g:g}, T={T:g}, v0={v0:.6g}; need T < T_bar={horizon_bound(g, v0):.6g} "
        f"or gamma > gamma_bar={gamma_bound(T, v0):.6g})"
    )


# ---------------------------------------------------------------------------
# Exponents
# ---------------------------------------------------------------------------


def _log1p_ratio(z: float) -> float:
    """``log1p(z)/z`` continued by 1 at ``z = 0``."""
    if z == 0.0:
        return 1.0
    return math.log1p(z) / z


def myopic_roots(gamma: float) -> MyopicRoots:
    """Roots ``r1 < r2`` of ``r**2 + (2/gamma - 1)*r + (1 - gamma)/gamma = 0``.

    The discriminant equals ``1 + 4*((1 - gamma)/gamma)**2`` and is never
    small, so the only cancellation risk is in the smaller-magnitude root,
    which is recovered from the product of the roots.
    """
    b = 2.0 / gamma - 1.0
    c = (1.0 - gamma) / gamma
    sqrt_disc = math.sqrt(1.0 + 4.0 * c * c)
    big = -0.5 * (b + math.copysign(sqrt_disc, b))
    small = c / big
    return MyopicRoots(min(big, small), max(big, small))


def phi_psi(kind: InvestorType, params: MarketParams, profile: InvestorProfile) -> PhiPsi:
    """Coefficient of ``theta0**2`` and constant in the expected-utility exponent."""
    require_feasible(params, profile)
    g, T = profile.gamma, profile.horizon_T
    if profile.is_log:
        raise LogGammaUnsupported("gamma == 1 has no power-utility exponent; use value_log")
    kind = InvestorType(kind)
    v0, r = params.v0, params.r
    eps = 1.0 - g
    bond = r * eps * T
    margin = feasibility_margin(g, T, v0)

    if kind in (InvestorType.I, InvestorType.R):
        phi = eps * T / (2.0 * margin)
        if kind is InvestorType.I:
            psi = 0.5 * math.log(g / margin) + bond
        else:
            psi = 0.5 * (g * math.log(g / margin) - eps * math.log1p(v0 * T)) + bond
        return PhiPsi(phi, psi)

    if kind is InvestorType.M:
        r1, r2 = myopic_roots(g)
        d = r2 - r1
        log_q = math.log1p(v0 * T)
        q_minus_1 = math.expm1(d * log_q)
        denom = r2 * (q_minus_1 + 1.0) - r1
        phi = eps * q_minus_1 / (2.0 * g * v0 * denom)
        psi = 0.5 * (math.log(d / denom) + r2 * log_q) + bond
        return PhiPsi(phi, psi)

    phi = eps * (g * T + eps * v0 * T * T) / (2.0 * g * g)
    return PhiPsi(phi, bond)


def excess_log_growth(kind: InvestorType, params: MarketParams, profile: InvestorProfile) -> float:
    """Log of certainty-equivalent wealth over ``x*exp(r*T)``.

    Equals ``(phi*theta0**2 + psi)/(1 - gamma) - r*T`` for ``gamma != 1`` and
    ``V_log - ln(x) - r*T`` for ``gamma == 1``; the expressions below are
    the same quantities with every ``1/(1 - gamma)`` factor cancelled
    analytically, so they are smooth across ``gamma = 1``.
    """
    require_feasible(params, profile)
    return _excess_log_growth(InvestorType(kind), params, profile.gamma, profile.horizon_T)


def _excess_log_growth(kind: InvestorType, params: MarketParams, g: float, T: float) -> float:
    # no feasibility check: also used to evaluate limits at the boundary (M and U only)
    v0, th2 = params.v0, params.theta0 ** 2
    if abs(g - 1.0) <= LOG_GAMMA_TOL:
        g = 1.0
    eps = 1.0 - g

    if kind is InvestorType.U:
        return th2 * (g * T + eps * v0 * T * T) / (2.0 * g * g)

    log_growth_var = math.log1p(v0 * T)
    if kind in (InvestorType.I, InvestorType.R):
        margin = feasibility_margin(g, T, v0)
        z = -eps * v0 * T / g
        if kind is InvestorType.I:
            return th2 * T / (2.0 * margin) + 0.5 * v0 * T / g * _log1p_ratio(z)
        return th2 * T / (2.0 * margin) + 0.5 * v0 * T * _log1p_ratio(z) - 0.5 * log_growth_var

    # myopic
    if eps == 0.0:
        return 0.5 * th2 * T + 0.5 * (v0 * T - log_growth_var)
    r1, r2 = myopic_roots(g)
    d = r2 - r1
    q_minus_1 = math.expm1(d * log_growth_var)
    z = q_minus_1 / d
    quad = q_minus_1 / (2.0 * g * v0 * (d + r2 * q_minus_1))
    # r2/eps == 1/(g*r1) by Vieta, and r1 < 0 for every g > 0
    const = 0.5 / (g * r1) * (log_growth_var - z * _log1p_ratio(r2 * z))
    return th2 * quad + const


# ---------------------------------------------------------------------------
# Expected utilities
# ---------------------------------------------------------------------------


def _check_wealth(x: float) -> None:
    if not x > 0:
        raise NonpositiveWealth(f"initial wealth must be positive, got {x}")


def value_log(kind: InvestorType, x: float, params: MarketParams, horizon_T: float) -> float:
    """Expected log utility of terminal wealth (``gamma = 1``)."""
    _check_wealth(x)
    if horizon_T < 0:
        raise ValueError("horizon must be nonnegative")
    kind = InvestorType(kind)
    T, v0 = horizon_T, params.v0
    base = math.log(x) + params.r * T + 0.5 * params.theta0 ** 2 * T
    if kind is InvestorType.U:
        return base
    if kind is InvestorType.I:
        return base + 0.5 * v0 * T
    return base + 0.5 * v0 * T - 0.5 * math.log1p(v0 * T)


def log_value(kind: InvestorType, x: float, params: MarketParams, profile: InvestorProfile) -> LogValue:
    """Power-utility expected utility as ``(sign, log|V|)``."""
    _check_wealth(x)
    phi, psi = phi_psi(kind, params, profile)
    eps = 1.0 - profile.gamma
    log_abs = eps * math.log(x) + phi * params.theta0 ** 2 + psi - math.log(abs(eps))
    return LogValue(math.copysign(1.0, eps), log_abs)


def value(kind: InvestorType, x: float, params: MarketParams, profile: InvestorProfile) -> float:
    """Expected utility ``E[u_gamma(X_T)]`` of investor ``kind`` starting from wealth ``x``."""
    _check_wealth(x)
    require_feasible(params, profile)
    if profile.is_log:
        return value_log(kind, x, params, profile.horizon_T)
    return float(log_value(kind, x, params, profile))


def utility(wealth, gamma: float):
    """CRRA utility; works elementwise on arrays."""
    if abs(gamma - 1.0) <= LOG_GAMMA_TOL:
        return np.log(wealth)
    eps = 1.0 - gamma
    return np.power(wealth, eps) / eps


def certainty_equivalent(kind: InvestorType, x: float, params: MarketParams, profile: InvestorProfile) -> float:
    """Deterministic terminal wealth with the same utility as ``V^kind(x)``."""
    _check_wealth(x)
    g = excess_log_growth(kind, params, profile)
    return x * math.exp(params.r * profile.horizon_T + g)


# ---------------------------------------------------------------------------
# Filter and strategies
# ---------------------------------------------------------------------------


def posterior_mean(t, y, params: MarketParams):
    """Bayesian estimate of Theta given ``Y_t = y``; elementwise on arrays."""
    return (params.theta0 + params.v0 * y) / (1.0 + params.v0 * t)


def filter_estimate(t: float, y: float, params: MarketParams) -> FilterState:
    """Posterior of Theta after observing ``Y_t = Theta*t + W_t = y``."""
    if t < 0:
        raise TimeOutOfRange(f"t must be nonnegative, got {t}")
    return FilterState(
        t=t,
        y=y,
        theta_hat=posterior_mean(t, y, params),
        posterior_var=params.v0 / (1.0 + params.v0 * t),
    )


def _hedge_factor(t, params: MarketParams, profile: InvestorProfile):
    g, T, v0 = profile.gamma, profile.horizon_T, params.v0
    return (1.0 - g) * (T - t) * v0 / (feasibility_margin(g, T, v0) + v0 * t)


def strategy(
    kind: InvestorType,
    t,
    params: MarketParams,
    profile: InvestorProfile,
    *,
    theta_hat=None,
    theta=None,
):
    """Fraction of wealth held in the stock at time ``t``.

    ``I`` needs the true ``theta``; ``M`` and ``R`` need the filtered
    ``theta_hat`` (a float, array or :class:`FilterState`); ``U`` needs
    neither. Array inputs give array outputs.
    """
    require_feasible(params, profile)
    if np.any(np.asarray(t) < 0) or np.any(np.asarray(t) > profile.horizon_T):
        raise TimeOutOfRange(f"t must lie in [0, {profile.horizon_T}]")
    kind = InvestorType(kind)
    scale = params.sigma * profile.gamma
    if kind is InvestorType.U:
        return params.theta0 / scale
    if kind is InvestorType.I:
        if theta is None:
            raise ValueError("the informed strategy needs theta")
        return theta / scale
    if isinstance(theta_hat, FilterState):
        theta_hat = theta_hat.theta_hat
    if theta_hat is None:
        raise ValueError(f"strategy {kind} needs theta_hat")
    myopic = theta_hat / scale
    if kind is InvestorType.M:
        return myopic
    return myopic * (1.0 + _hedge_factor(t, params, profile))


def hedging_demand(t, theta_hat, params: MarketParams, profile: InvestorProfile):
    """Rational minus myopic weight."""
    return theta_hat / (params.sigma * profile.gamma) * _hedge_factor(t, params, profile)


# ---------------------------------------------------------------------------
# Value surfaces v(t, x, y)
# ---------------------------------------------------------------------------


def surface_coefficients(
    kind: InvestorType, t: float, params: MarketParams, profile: InvestorProfile
) -> SurfaceCoefficients:
    """Exponent coefficients of ``v(t, x, y)`` in powers of the filtered estimate.

    For ``R`` and ``M`` these are ``(a(t), b(t), c(t))`` with ``b == 0``; for
    ``U`` the exponent is linear, so ``(0, a(t), b(t))`` is returned.
    All vanish at ``t == T``.
    """
    require_feasible(params, profile)
    if profile.is_log:
        raise LogGammaUnsupported("value surfaces are only available for gamma != 1")
    T = profile.horizon_T
    if not 0.0 <= t <= T:
        raise TimeOutOfRange(f"t must lie in [0, {T}], got {t}")
    kind = InvestorType(kind)
    g, v0, th0 = profile.gamma, params.v0, params.theta0
    eps = 1.0 - g
    margin = feasibility_margin(g, T, v0)
    grow_t = 1.0 + v0 * t
    grow_T = 1.0 + v0 * T

    if kind is InvestorType.R:
        a = eps * grow_t * (T - t) / (2.0 * (margin + v0 * t))
        c = 0.5 * (g * math.log(g * grow_T / (margin + v0 * t)) - math.log(grow_T / grow_t))
        return SurfaceCoefficients(a, 0.0, c)

    if kind is InvestorType.M:
        r1, r2 = myopic_roots(g)
        d = r2 - r1
        # written in the remaining log-growth of the posterior precision so
        # that both coefficients vanish exactly at t == T
        rest = math.log1p(v0 * (T - t) / grow_t)
        em = math.expm1(d * rest)
        a = eps * grow_t * em / (2.0 * g * v0 * (d + r2 * em))
        c = 0.5 * (r2 * rest - math.log1p(r2 * em / d))
        return SurfaceCoefficients(a, 0.0, c)

    if kind is InvestorType.U:
        lin = eps / g * th0 * (T - t)
        const = eps * (T - t) / (2.0 * g * g) * (eps * grow_T / grow_t - 1.0) * th0 ** 2
        return SurfaceCoefficients(0.0, lin, const)

    raise ValueError("value surfaces exist for R, M and U only")


def value_surface(
    kind: InvestorType,
    t: float,
    x: float,
    y: float,
    params: MarketParams,
    profile: InvestorProfile,
) -> float:
    """Expected utility at time ``t`` with wealth ``x`` and observation ``Y_t = y``."""
    _check_wealth(x)
    a2, a1, a0 = surface_coefficients(kind, t, params, profile)
    th = posterior_mean(t, y, params)
    eps = 1.0 - profile.gamma
    log_abs = (
        eps * (math.log(x) + params.r * (profile.horizon_T - t))
        + a2 * th * th
        + a1 * th
        + a0
        - math.log(abs(eps))
    )
    return float(LogValue(math.copysign(1.0, eps), log_abs))
