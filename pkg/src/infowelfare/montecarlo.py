"""
Monte Carlo oracle for the closed-form expected utilities and costs.

Simulation is under the physical measure. Each path draws
``Theta ~ N(theta0, v0)`` and a Brownian path ``W``; the investor observes
``Y_t = Theta*t + W_t`` and filters ``theta_hat = (theta0 + v0*Y_t)/(1 + v0*t)``.
Log-wealth is integrated exactly for piecewise-constant weights::

    d ln X = (r + sigma*pi*Theta - (sigma*pi)**2/2) dt + sigma*pi dW

with ``pi`` frozen at the left end of every step. All requested strategies
share the same ``(Theta, W)`` draws (common random numbers).

Random streams
--------------
Paths are split into consecutive blocks of :data:`BLOCK_SIZE`. Block ``b``
draws from ``default_rng(SeedSequence(seed, spawn_key=(b,)))``, in this
order: the ``Theta`` normals, the normals for ``W_T``, then one normal per
interior grid point. ``W`` is built from its endpoint with a sequential
Brownian bridge, so ``W_T`` (and hence every constant-weight strategy) does
not depend on the number of steps. With antithetic sampling a block of
``n`` paths uses ``n/2`` draws and their negatives. Blocks are independent,
so results are identical for any number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .costs import CostPair, _as_pair
from .model import (
    InvestorProfile,
    InvestorType,
    MarketParams,
    posterior_mean,
    require_feasible,
    strategy,
)

__all__ = [
    "BLOCK_SIZE",
    "ZERO_WEIGHT",
    "McConfig",
    "McEstimate",
    "CostEstimate",
    "FilterDiagnostic",
    "simulate_log_wealth",
    "zero_weight_value",
    "simulate_values",
    "simulate_value",
    "simulate_cost",
    "filter_consistency_run",
]

BLOCK_SIZE = 8192

#: Strategy key for holding no stock at all (a deterministic sanity case).
ZERO_WEIGHT = "zero"

StrategyKey = Union[InvestorType, str]


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 100_000
    steps_per_year: int = 100
    seed: int = 20240101
    antithetic: bool = False

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.steps_per_year < 1:
            raise ValueError("steps_per_year must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic sampling needs an even number of paths")

    def n_steps(self, horizon_T: float) -> int:
        return math.ceil(round(self.steps_per_year * horizon_T, 9))

    def blocks(self) -> list[tuple[int, int]]:
        """``(block_index, n_paths_in_block)`` in path order."""
        full, rest = divmod(self.n_paths, BLOCK_SIZE)
        out = [(b, BLOCK_SIZE) for b in range(full)]
        if rest:
            out.append((full, rest))
        return out


@dataclass(frozen=True)
class McEstimate:
    """Sample mean of terminal utility with its standard error.

    With antithetic sampling the standard error is computed from the
    ``n_paths/2`` pair averages.
    """

    mean: float
    std_error: float
    n_paths: int
    certainty_equivalent: float
    ce_std_error: float
    seed: int
    steps_per_year: int
    antithetic: bool

    def z_score(self, reference: float) -> float:
        diff = self.mean - reference
        if self.std_error == 0.0:
            return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        return diff / self.std_error


@dataclass(frozen=True)
class CostEstimate:
    pair: CostPair
    cost: float
    std_error: float
    n_paths: int

    def z_score(self, reference: float) -> float:
        diff = self.cost - reference
        if self.std_error == 0.0:
            return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        return diff / self.std_error


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def _normals(rng: np.random.Generator, n: int, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return rng.standard_normal(n)
    half = rng.standard_normal(n // 2)
    return np.concatenate([half, -half])


def _sigma_pi(key: StrategyKey, t: float, theta, theta_hat, params, profile):
    if key == ZERO_WEIGHT:
        return 0.0
    w = strategy(key, t, params, profile, theta_hat=theta_hat, theta=theta)
    return params.sigma * w


def _simulate_block(
    block: tuple[int, int],
    keys: Sequence[StrategyKey],
    x: float,
    params: MarketParams,
    profile: InvestorProfile,
    config: McConfig,
) -> dict:
    index, size = block
    rng = _block_rng(config.seed, index)
    anti = config.antithetic
    T = profile.horizon_T
    n = config.n_steps(T)

    theta = params.theta0 + math.sqrt(params.v0) * _normals(rng, size, anti)
    log_x = {k: np.full(size, math.log(x) + params.r * T) for k in keys}
    if n == 0:
        return log_x

    dt = T / n
    w_end = math.sqrt(T) * _normals(rng, size, anti)
    w_prev = np.zeros(size)
    needs_filter = any(k in (InvestorType.M, InvestorType.R) for k in keys)
    for k in range(1, n + 1):
        if k == n:
            w_next = w_end
        else:
            remaining = n - k + 1
            bridge_sd = math.sqrt(dt * (remaining - 1) / remaining)
            w_next = w_prev + (w_end - w_prev) / remaining + bridge_sd * _normals(rng, size, anti)
        dw = w_next - w_prev
        t = (k - 1) * dt
        theta_hat = posterior_mean(t, theta * t + w_prev, params) if needs_filter else None
        for key in keys:
            sp = _sigma_pi(key, t, theta, theta_hat, params, profile)
            log_x[key] += (sp * theta - 0.5 * sp * sp) * dt + sp * dw
        w_prev = w_next
    return log_x


def simulate_log_wealth(
    keys: Iterable[StrategyKey],
    x: float,
    params: MarketParams,
    profile: InvestorProfile,
    config: McConfig,
    *,
    workers: int = 1,
) -> dict:
    """Terminal log-wealth per path for each strategy, in path order."""
    if not x > 0:
        raise ValueError("initial wealth must be positive")
    require_feasible(params, profile)
    keys = [k if k == ZERO_WEIGHT else InvestorType(k) for k in keys]
    blocks = config.blocks()

    def run(block):
        return _simulate_block(block, keys, x, params, profile, config)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    return {k: np.concatenate([p[k] for p in parts]) for k in keys}


def _utility_from_log(log_x: np.ndarray, gamma: float) -> np.ndarray:
    if abs(gamma - 1.0) <= 1e-9:
        return log_x
    eps = 1.0 - gamma
    return np.exp(eps * log_x) / eps


def zero_weight_value(x: float, params: MarketParams, profile: InvestorProfile) -> float:
    """Utility of ``x*exp(r*T)``, computed with the same arithmetic as the simulation."""
    log_x = np.array([math.log(x) + params.r * profile.horizon_T])
    return float(_utility_from_log(log_x, profile.gamma)[0])


def _replicates(samples: np.ndarray, config: McConfig) -> np.ndarray:
    """Independent replicates: the samples themselves, or antithetic pair means."""
    if not config.antithetic:
        return samples
    out = []
    start = 0
    for _, size in config.blocks():
        half = size // 2
        blk = samples[start : start + size]
        out.append(0.5 * (blk[:half] + blk[half:]))
        start += size
    return np.concatenate(out)


def _mean_se(reps: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(reps))
    if reps.size < 2:
        return mean, math.inf
    if np.all(reps == reps[0]):
        # deterministic outcome: np.mean/np.std would add summation rounding
        return float(reps[0]), 0.0
    return mean, float(np.std(reps, ddof=1) / math.sqrt(reps.size))


def _estimate(util: np.ndarray, gamma: float, config: McConfig) -> McEstimate:
    mean, se = _mean_se(_replicates(util, config))
    if abs(gamma - 1.0) <= 1e-9:
        ce = math.exp(mean)
    else:
        eps = 1.0 - gamma
        ce = (eps * mean) ** (1.0 / eps)
    ce_se = ce * se if abs(gamma - 1.0) <= 1e-9 else ce * se / abs(mean)
    return McEstimate(
        mean=mean,
        std_error=se,
        n_paths=config.n_paths,
        certainty_equivalent=ce,
        ce_std_error=ce_se,
        seed=config.seed,
        steps_per_year=config.steps_per_year,
        antithetic=config.antithetic,
    )


def simulate_values(
    kinds: Iterable[StrategyKey],
    x: float,
    params: MarketParams,
    profile: InvestorProfile,
    config: McConfig,
    *,
    workers: int = 1,
) -> dict:
    """Expected-utility estimates for several strategies on common random numbers."""
    log_x = simulate_log_wealth(kinds, x, params, profile, config, workers=workers)
    return {k: _estimate(_utility_from_log(v, profile.gamma), profile.gamma, config) for k, v in log_x.items()}


def simulate_value(
    kind: StrategyKey,
    x: float,
    params: MarketParams,
    profile: InvestorProfile,
    config: McConfig,
    *,
    zero_weight: bool = False,
    workers: int = 1,
) -> McEstimate:
    """Estimate ``E[u_gamma(X_T)]`` under one strategy (or under no stock at all)."""
    key = ZERO_WEIGHT if zero_weight else InvestorType(kind)
    return simulate_values([key], x, params, profile, config, workers=workers)[key]


def simulate_cost(
    pair,
    x: float,
    params: MarketParams,
    profile: InvestorProfile,
    config: McConfig,
    *,
    workers: int = 1,
) -> CostEstimate:
    """Cost implied by two simulated expected utilities, with a delta-method standard error.

    Uses the CRRA scaling ``V^j(x(1-C)) = (1-C)**(1-gamma) V^j(x)``, so
    ``1 - C = (V^i/V^j)**(1/(1-gamma))`` (``exp(V^i - V^j)`` for log utility).
    """
    pair = _as_pair(pair)
    log_x = simulate_log_wealth({pair.src, pair.dst}, x, params, profile, config, workers=workers)
    g = profile.gamma
    u_i = _replicates(_utility_from_log(log_x[pair.src], g), config)
    u_j = _replicates(_utility_from_log(log_x[pair.dst], g), config)
    n = u_i.size
    if abs(g - 1.0) <= 1e-9:
        diff = u_i - u_j
        log_ret = float(np.mean(diff))
        infl = diff
    else:
        m_i, m_j = float(np.mean(u_i)), float(np.mean(u_j))
        log_ret = (math.log(m_i / m_j)) / (1.0 - g)
        infl = (u_i / m_i - u_j / m_j) / (1.0 - g)
    se_log = float(np.std(infl, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    retained = math.exp(log_ret)
    return CostEstimate(pair=pair, cost=1.0 - retained, std_error=retained * se_log, n_paths=config.n_paths)


# ---------------------------------------------------------------------------
# Filter diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FilterDiagnostic:
    """Empirical behaviour of the filter error ``Theta - theta_hat`` at one time.

    ``slope``/``intercept`` come from regressing the error on ``theta_hat``;
    both are ``nan`` when ``theta_hat`` does not vary (``t == 0``).
    """

    t: float
    n_paths: int
    mean_error: float
    mean_error_se: float
    slope: float
    slope_se: float
    intercept: float
    intercept_se: float
    error_var: float
    error_var_se: float
    expected_var: float
    mean_abs_error: float

    @property
    def unbiased(self) -> bool:
        ok = abs(self.mean_error) <= 3.0 * self.mean_error_se
        if not math.isnan(self.slope):
            ok = ok and abs(self.slope) <= 3.0 * self.slope_se
            ok = ok and abs(self.intercept) <= 3.0 * self.intercept_se
        return ok

    @property
    def variance_consistent(self) -> bool:
        return abs(self.error_var - self.expected_var) <= 3.0 * self.error_var_se

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {
            "unbiased": self.unbiased,
            "variance_consistent": self.variance_consistent,
        }


def _diagnose(t: float, theta: np.ndarray, theta_hat: np.ndarray, params: MarketParams) -> FilterDiagnostic:
    err = theta - theta_hat
    n = err.size
    mean_err, mean_se = _mean_se(err)
    var = float(np.var(err, ddof=1))
    slope = slope_se = intercept = intercept_se = math.nan
    spread = float(np.var(theta_hat))
    if spread > 1e-14 * max(1.0, float(np.mean(theta_hat ** 2))):
        design = np.column_stack([np.ones(n), theta_hat])
        coef, *_ = np.linalg.lstsq(design, err, rcond=None)
        resid = err - design @ coef
        s2 = float(resid @ resid) / (n - 2)
        cov = s2 * np.linalg.inv(design.T @ design)
        intercept, slope = float(coef[0]), float(coef[1])
        intercept_se, slope_se = math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])
    return FilterDiagnostic(
        t=t,
        n_paths=n,
        mean_error=mean_err,
        mean_error_se=mean_se,
        slope=slope,
        slope_se=slope_se,
        intercept=intercept,
        intercept_se=intercept_se,
        error_var=var,
        # standard error of a Gaussian sample variance
        error_var_se=var * math.sqrt(2.0 / (n - 1)),
        expected_var=params.v0 / (1.0 + params.v0 * t),
        mean_abs_error=float(np.mean(np.abs(err))),
    )


def filter_consistency_run(
    params: MarketParams,
    config: McConfig,
    times: Sequence[float] = (0.0, 1.0, 5.0, 10.0, 30.0),
) -> list:
    """Check that the filter is conditionally unbiased with the conjugate posterior variance.

    ``Y`` is advanced exactly between the requested times (Gaussian
    increments), so arbitrarily large ``t`` costs nothing extra. Antithetic
    pairing is ignored here: every path is used as a sample.
    """
    times = sorted(float(t) for t in times)
    if times and times[0] < 0:
        raise ValueError("times must be nonnegative")
    thetas = []
    ys = {t: [] for t in times}
    for index, size in config.blocks():
        rng = _block_rng(config.seed, index)
        theta = params.theta0 + math.sqrt(params.v0) * _normals(rng, size, config.antithetic)
        w = np.zeros(size)
        t_prev = 0.0
        for t in times:
            if t > t_prev:
                w = w + math.sqrt(t - t_prev) * _normals(rng, size, config.antithetic)
            ys[t].append(theta * t + w)
            t_prev = t
        thetas.append(theta)
    theta_all = np.concatenate(thetas)
    return [_diagnose(t, theta_all, posterior_mean(t, np.concatenate(ys[t]), params), params) for t in times]

