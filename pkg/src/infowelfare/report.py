"""
Cost tables and figure series.

Machine output keeps raw fractions written as shortest round-trip decimals.
Percentages appear only in the human-readable renderer, where each value is
rounded once (half away from zero, two decimals) straight from its binary
value.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Optional, Sequence

import numpy as np

from .costs import CostKind, CostReport, cost_report
from .errors import InfeasibleParameters
from .model import InvestorProfile, MarketParams, feasibility_check, gamma_bound, horizon_bound

__all__ = [
    "TABLE_GAMMAS",
    "TABLE_HORIZONS",
    "TABLE_SIGMAS",
    "CSV_HEADER",
    "ScenarioSpec",
    "FigureSpec",
    "FIGURES",
    "FigureData",
    "table_reports",
    "reports_to_csv",
    "percent",
    "render_table",
    "figure_data",
]

TABLE_GAMMAS = (11.0, 6.0, 4.0, 3.0, 1.0, 0.8)
TABLE_HORIZONS = (30.0, 20.0, 10.0, 5.0, 1.0)
TABLE_SIGMAS = (0.202, 0.140)

CSV_HEADER = ("gamma", "T", "sigma", "kind", "c_UM", "c_MR", "c_RI", "c_UI", "err")

DEFAULT_DRIFT_SD = 0.0243
ALT_DRIFT_SD = 0.0452


@dataclass(frozen=True)
class ScenarioSpec:
    """Market inputs; ``theta0``/``v0`` left as ``None`` follow the calibration.

    The calibration sets ``theta0 = excess_return/sigma`` and
    ``v0 = (drift_sd/sigma)**2``.
    """

    sigma: float = 0.202
    r: float = 0.05
    theta0: Optional[float] = None
    v0: Optional[float] = None
    excess_return: float = 0.08
    drift_sd: float = DEFAULT_DRIFT_SD

    def params(self) -> MarketParams:
        base = MarketParams.calibrated(
            self.sigma, excess_return=self.excess_return, drift_sd=self.drift_sd, r=self.r
        )
        return replace(
            base,
            theta0=base.theta0 if self.theta0 is None else self.theta0,
            v0=base.v0 if self.v0 is None else self.v0,
        )

    def with_sigma(self, sigma: float) -> ScenarioSpec:
        return replace(self, sigma=sigma)


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def table_reports(
    which: int,
    scenario: ScenarioSpec = ScenarioSpec(),
    *,
    sigmas: Sequence[float] = TABLE_SIGMAS,
    gammas: Sequence[float] = TABLE_GAMMAS,
    horizons: Sequence[float] = TABLE_HORIZONS,
    extra_T: Sequence[float] = (),
) -> list:
    """Cost reports in table order: sigma block, then gamma, then horizon.

    ``which=1`` gives cumulated costs, ``which=2`` annual costs. Extra
    horizons are appended after the standard ones in each gamma row.
    """
    kind = _table_kind(which)
    out = []
    for sigma in sigmas:
        params = scenario.with_sigma(sigma).params()
        for g in gammas:
            for T in tuple(horizons) + tuple(extra_T):
                out.append(cost_report(kind, params, InvestorProfile(g, T)))
    return out


def _table_kind(which: int) -> CostKind:
    if which == 1:
        return "cumulated"
    if which == 2:
        return "annual"
    raise ValueError(f"unknown table {which!r}; expected 1 or 2")


def _fmt(x: float) -> str:
    return repr(float(x))


def reports_to_csv(reports: Iterable[CostReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rep in reports:
        writer.writerow(
            [
                _fmt(rep.profile.gamma),
                _fmt(rep.profile.horizon_T),
                _fmt(rep.params.sigma),
                rep.kind,
                *(_fmt(c) for c in (rep.c_UM, rep.c_MR, rep.c_RI, rep.c_UI, rep.approx_error)),
            ]
        )
    return buf.getvalue()


def percent(fraction: float, places: int = 2) -> str:
    """Render a fraction as a percentage, rounding once, half away from zero.

    ``Decimal(fraction)`` is the exact binary value, so the only rounding
    is the final quantization.
    """
    exact = Decimal(float(fraction)) * 100
    return str(exact.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


def render_table(reports: Sequence[CostReport]) -> str:
    """Fixed-width text table in percent, with ``|err|`` as the last column."""
    head = f"{'sigma':>6} {'gamma':>6} {'T':>6} {'UM':>7} {'MR':>7} {'RI':>7} {'UI':>7} {'|err|':>7}"
    lines = [head]
    for rep in reports:
        cells = [percent(c) for c in (rep.c_UM, rep.c_MR, rep.c_RI, rep.c_UI)]
        cells.append(percent(abs(rep.approx_error)))
        lines.append(
            f"{rep.params.sigma:>6g} {rep.profile.gamma:>6g} {rep.profile.horizon_T:>6g} "
            + " ".join(f"{c:>7}" for c in cells)
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Figure series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FigureSpec:
    """One figure: costs of ``kind`` against ``axis`` for each fixed value.

    ``axis="T"`` fixes gamma at each value in ``fixed``; ``axis="gamma"``
    fixes the horizon.
    """

    kind: CostKind
    axis: str
    fixed: tuple
    upper: float


FIGURES = {
    "costs-vs-T": FigureSpec("cumulated", "T", (0.8, 1.0, 3.0), 30.0),
    "costs-vs-T-long": FigureSpec("cumulated", "T", (0.8, 1.0, 3.0), 250.0),
    "costs-vs-gamma": FigureSpec("cumulated", "gamma", (5.0, 10.0, 20.0), 12.0),
    "annual-costs-vs-T": FigureSpec("annual", "T", (0.8, 1.0, 3.0), 30.0),
    "annual-costs-vs-T-long": FigureSpec("annual", "T", (0.8, 1.0, 3.0), 250.0),
    "annual-costs-vs-gamma": FigureSpec("annual", "gamma", (5.0, 10.0, 20.0), 12.0),
}

FIGURE_HEADER = CSV_HEADER + ("share_UM", "share_MR", "share_RI")


@dataclass
class FigureData:
    """Rows of a figure series plus the grid points that were skipped.

    Shares divide each adjacent cost by the sum of the three adjacent costs
    (not by ``c_UI``), so they add up to one. Where all three costs are zero
    the shares are ``nan``.
    """

    name: str
    reports: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    def rows(self) -> list:
        out = []
        for rep in self.reports:
            row = rep.as_dict()
            try:
                s_um, s_mr, s_ri = rep.shares()
            except ZeroDivisionError:
                s_um = s_mr = s_ri = math.nan
            row.update(share_UM=s_um, share_MR=s_mr, share_RI=s_ri)
            out.append(row)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(FIGURE_HEADER)
        for row in self.rows():
            writer.writerow(
                [row[k] if k == "kind" else _fmt(row[k]) for k in FIGURE_HEADER]
            )
        return buf.getvalue()


def _grid(upper: float, points: int) -> np.ndarray:
    # starts one step above zero: annual costs are undefined at T = 0
    return upper * np.arange(1, points + 1) / points


def figure_data(name: str, scenario: ScenarioSpec = ScenarioSpec(), *, points: int = 120) -> FigureData:
    """Evaluate one figure's series on an evenly spaced grid.

    Grid points that violate the feasibility condition (``T >= T_bar`` for
    ``gamma < 1``, ``gamma <= gamma_bar`` at fixed ``T``) are listed in
    ``skipped`` as ``(gamma, T, reason)`` rather than evaluated.
    """
    try:
        spec = FIGURES[name]
    except KeyError:
        raise ValueError(f"unknown figure {name!r}; choose from {sorted(FIGURES)}") from None
    if points < 1:
        raise ValueError("points must be at least 1")
    params = scenario.params()
    data = FigureData(name)
    for fixed in spec.fixed:
        for x in _grid(spec.upper, points):
            g, T = (fixed, float(x)) if spec.axis == "T" else (float(x), fixed)
            profile = InvestorProfile(g, T)
            if not feasibility_check(params, profile):
                bound = (
                    f"T_bar={horizon_bound(g, params.v0):.6g}"
                    if spec.axis == "T"
                    else f"gamma_bar={gamma_bound(T, params.v0):.6g}"
                )
                data.skipped.append((g, T, f"infeasible ({bound})"))
                continue
            try:
                data.reports.append(cost_report(spec.kind, params, profile))
            except InfeasibleParameters as exc:
                data.skipped.append((g, T, str(exc)))
    return data
