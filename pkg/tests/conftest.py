from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest

from infowelfare.costs import cumulated_cost
from infowelfare.model import InvestorProfile, MarketParams, gamma_bound

DATA = Path(__file__).parent / "data"

# (criterion number, passed, detail) collected by test_acceptance
ACCEPTANCE_RESULTS: list = []


def record(number: int, title: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((number, title, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number} [{status}] {title}: {detail}")


def load_reference_tables() -> list:
    with open(DATA / "reference_tables.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["table"] = int(row["table"])
        for key in ("gamma", "T", "sigma", "c_UM", "c_MR", "c_RI", "c_UI", "abs_err"):
            row[key] = float(row[key])
    return rows


MAX_TOTAL_COST = 0.999


def random_feasible_grid(
    n: int, seed: int, *, include_log: bool = True, max_total_cost: float | None = None
) -> list:
    """``(params, profile)`` pairs with gamma in (gamma_bar, 12], T in (0, 30].

    theta0 is drawn from [0, 1] and v0 from (0, 0.1]. Every tenth point has
    gamma exactly 1 when ``include_log`` is set.

    With ``max_total_cost`` set, draws whose total cost ``C^UI`` exceeds it
    are redrawn (``C^UI`` bounds every adjacent cost). Near ``C = 1`` a
    float64 cost carries few significant digits of ``1 - C``, so identities
    built from ``1 - C`` cannot be checked there at 1e-12.
    Returns ``(points, n_rejected)`` in that case.
    """
    rng = np.random.default_rng(seed)
    out = []
    rejected = 0
    k = -1
    while len(out) < n:
        k += 1
        v0 = float(rng.uniform(1e-4, 0.1))
        T = float(rng.uniform(1e-3, 30.0))
        theta0 = float(rng.uniform(0.0, 1.0))
        r = float(rng.uniform(0.0, 0.08))
        sigma = float(rng.uniform(0.05, 0.5))
        if include_log and k % 10 == 0:
            gamma = 1.0
        else:
            lo = gamma_bound(T, v0)
            # stay a little inside the boundary, where the formulas are still well conditioned
            gamma = float(rng.uniform(lo + 0.02 * (1.0 - lo), 12.0))
        point = (MarketParams(r=r, sigma=sigma, theta0=theta0, v0=v0), InvestorProfile(gamma, T))
        if max_total_cost is not None and cumulated_cost("UI", *point) > max_total_cost:
            rejected += 1
            continue
        out.append(point)
    return out if max_total_cost is None else (out, rejected)


@pytest.fixture(scope="session")
def reference_tables():
    return load_reference_tables()


@pytest.fixture
def table_params():
    return MarketParams.calibrated(0.202)


@pytest.fixture
def low_vol_params():
    return MarketParams.calibrated(0.140)
