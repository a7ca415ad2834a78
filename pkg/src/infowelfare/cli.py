"""
Command-line front end.

Scenario values are resolved in this order: command-line flag, then the
``--config`` file (``key = value`` lines, ``#`` comments), then the built-in
calibration. Exit codes: 0 success, 1 unexpected failure, 2 invalid or
infeasible input, 3 Monte Carlo disagreement (some ``|z| > 4``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .costs import CostPair, cost, cost_report
from .errors import ModelError
from .model import (
    InvestorProfile,
    InvestorType,
    certainty_equivalent,
    require_feasible,
    value,
)
from .montecarlo import ZERO_WEIGHT, McConfig, simulate_values, zero_weight_value
from .report import (
    ALT_DRIFT_SD,
    DEFAULT_DRIFT_SD,
    FIGURES,
    TABLE_SIGMAS,
    ScenarioSpec,
    figure_data,
    render_table,
    reports_to_csv,
    table_reports,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_MISMATCH = 3

Z_FAIL = 4.0


class InputError(Exception):
    """Bad command-line or config input (exit code 2)."""


# key -> (converter, built-in default)
SETTINGS = {
    "gamma": (float, 3.0),
    "T": (float, 10.0),
    "sigma": (float, 0.202),
    "theta0": (float, None),
    "v0": (float, None),
    "r": (float, 0.05),
    "x": (float, 1.0),
    "kind": (str, "cumulated"),
    "paths": (int, 100_000),
    "steps_per_year": (int, 100),
    "seed": (int, 20240101),
}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise InputError(f"not a boolean: {text!r}")


def read_config(path: str) -> dict:
    """Parse a ``key = value`` file. Dashes in keys are read as underscores."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the config file, then from built-in defaults."""
    config = read_config(args.config) if args.config else {}
    known = set(SETTINGS) | {"alt_prior", "antithetic"}
    unknown = sorted(set(config) - known)
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")
    # an explicit sigma restricts the table to one block
    args.sigma_given = args.sigma is not None or "sigma" in config
    for key, (conv, default) in SETTINGS.items():
        if getattr(args, key, None) is not None:
            continue
        if key in config:
            try:
                setattr(args, key, conv(config[key]))
            except ValueError as exc:
                raise InputError(f"config value for {key}: {exc}") from exc
        else:
            setattr(args, key, default)
    for flag in ("alt_prior", "antithetic"):
        if not getattr(args, flag, False) and flag in config:
            setattr(args, flag, _parse_bool(config[flag]))
        setattr(args, flag, bool(getattr(args, flag, False)))
    if args.kind not in ("cumulated", "annual"):
        raise InputError(f"kind must be 'cumulated' or 'annual', got {args.kind!r}")
    return args


def _scenario(args: argparse.Namespace) -> ScenarioSpec:
    return ScenarioSpec(
        sigma=args.sigma,
        r=args.r,
        theta0=args.theta0,
        v0=args.v0,
        drift_sd=ALT_DRIFT_SD if args.alt_prior else DEFAULT_DRIFT_SD,
    )


def _types(names: Optional[Sequence[str]]) -> list:
    if not names:
        return list(InvestorType)
    return [InvestorType(n.upper()) for n in names]


def _records_to_csv(records: Sequence[dict]) -> str:
    if not records:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(records[0]), lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in rec.items()})
    return buf.getvalue()


def _records_to_text(records: Sequence[dict]) -> str:
    return "".join(
        "  ".join(f"{k}={v:.10g}" if isinstance(v, float) else f"{k}={v}" for k, v in rec.items()) + "\n"
        for rec in records
    )


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(records: Sequence[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(records, indent=2) + "\n"
    if fmt == "text":
        return _records_to_text(records)
    return _records_to_csv(records)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_value(args: argparse.Namespace) -> int:
    params = _scenario(args).params()
    profile = InvestorProfile(args.gamma, args.T)
    records = []
    for kind in _types(args.type):
        records.append(
            {
                "type": kind.value,
                "gamma": profile.gamma,
                "T": profile.horizon_T,
                "x": args.x,
                "value": value(kind, args.x, params, profile),
                "certainty_equivalent": certainty_equivalent(kind, args.x, params, profile),
            }
        )
    _emit(_dump(records, args.format), args.out)
    return EXIT_OK


def _cost_command(args: argparse.Namespace, kind: str) -> int:
    params = _scenario(args).params()
    profile = InvestorProfile(args.gamma, args.T)
    if args.pair:
        records = []
        for name in args.pair:
            pair = CostPair.parse(name)
            records.append(
                {"pair": pair.label, "kind": kind, "gamma": profile.gamma, "T": profile.horizon_T,
                 "cost": cost(kind, pair, params, profile)}
            )
        _emit(_dump(records, args.format), args.out)
        return EXIT_OK
    rep = cost_report(kind, params, profile)
    if args.format == "csv":
        text = reports_to_csv([rep])
    elif args.format == "json":
        text = json.dumps(rep.as_dict(), indent=2) + "\n"
    else:
        text = render_table([rep])
    _emit(text, args.out)
    return EXIT_OK


def cmd_cost(args: argparse.Namespace) -> int:
    return _cost_command(args, args.kind)


def cmd_annual_cost(args: argparse.Namespace) -> int:
    return _cost_command(args, "annual")


def cmd_table(args: argparse.Namespace) -> int:
    scenario = _scenario(args)
    sigmas = (args.sigma,) if args.sigma_given else TABLE_SIGMAS
    reports = table_reports(args.which, scenario, sigmas=sigmas, extra_T=args.extra_T or ())
    if args.format == "csv":
        text = reports_to_csv(reports)
    elif args.format == "json":
        text = json.dumps([r.as_dict() for r in reports], indent=2) + "\n"
    else:
        text = render_table(reports)
    _emit(text, args.out)
    return EXIT_OK


def cmd_figure_data(args: argparse.Namespace) -> int:
    data = figure_data(args.figure, _scenario(args), points=args.points)
    if args.format == "json":
        text = json.dumps(
            {
                "figure": data.name,
                "rows": data.rows(),
                "skipped": [{"gamma": g, "T": T, "reason": why} for g, T, why in data.skipped],
            },
            indent=2,
        ) + "\n"
    else:
        text = data.to_csv()
    _emit(text, args.out)
    if data.skipped:
        print(f"skipped {len(data.skipped)} infeasible grid points", file=sys.stderr)
    return EXIT_OK


def mc_check_records(args: argparse.Namespace) -> list:
    params = _scenario(args).params()
    profile = InvestorProfile(args.gamma, args.T)
    require_feasible(params, profile)
    config = McConfig(
        n_paths=args.paths, steps_per_year=args.steps_per_year, seed=args.seed, antithetic=args.antithetic
    )
    keys = [ZERO_WEIGHT] if args.zero_weight else _types(args.type)
    estimates = simulate_values(keys, args.x, params, profile, config, workers=args.workers)
    records = []
    for key in keys:
        est = estimates[key]
        if key == ZERO_WEIGHT:
            closed = zero_weight_value(args.x, params, profile)
            ce_closed = args.x * math.exp(params.r * profile.horizon_T)
            label = ZERO_WEIGHT
        else:
            closed = value(key, args.x, params, profile)
            ce_closed = certainty_equivalent(key, args.x, params, profile)
            label = key.value
        records.append(
            {
                "type": label,
                "gamma": profile.gamma,
                "T": profile.horizon_T,
                "closed_form": closed,
                "mc_mean": est.mean,
                "mc_se": est.std_error,
                "z_score": est.z_score(closed),
                "ce_closed_form": ce_closed,
                "ce_mc": est.certainty_equivalent,
                "ce_rel_error": est.certainty_equivalent / ce_closed - 1.0,
                "n_paths": est.n_paths,
                "steps_per_year": est.steps_per_year,
                "seed": est.seed,
                "antithetic": est.antithetic,
            }
        )
    return records


def cmd_mc_check(args: argparse.Namespace) -> int:
    records = mc_check_records(args)
    _emit(_dump(records, args.format), args.out)
    worst = max(abs(r["z_score"]) for r in records)
    if worst > Z_FAIL:
        print(f"oracle mismatch: max |z| = {worst:.3g} > {Z_FAIL:g}", file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, fmt_default: str) -> None:
    g = p.add_argument_group("scenario")
    g.add_argument("--gamma", type=float, help="relative risk aversion (default 3)")
    g.add_argument("--T", type=float, help="horizon in years (default 10)")
    g.add_argument("--sigma", type=float, help="stock volatility (default 0.202)")
    g.add_argument("--theta0", type=float, help="prior mean of the market price of risk (default 0.08/sigma)")
    g.add_argument("--v0", type=float, help="prior variance of the market price of risk (default (0.0243/sigma)^2)")
    g.add_argument("--alt-prior", action="store_true", default=None,
                   help="use v0 = (0.0452/sigma)^2 instead of the default prior")
    g.add_argument("--r", type=float, help="risk-free rate (default 0.05)")
    g.add_argument("--x", type=float, help="initial wealth (default 1)")
    g.add_argument("--kind", choices=("cumulated", "annual"), help="cost kind (default cumulated)")
    g.add_argument("--config", help="key = value file with defaults for the flags above")
    o = p.add_argument_group("output")
    o.add_argument("--format", choices=("csv", "json", "text"), default=fmt_default)
    o.add_argument("--out", help="write to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="infowelfare",
        description="Welfare costs of partial information about expected returns for CRRA investors.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("value", help="expected utility and certainty equivalent per investor type")
    _common(p, "json")
    p.add_argument("--type", nargs="+", choices=[t.value for t in InvestorType], type=str.upper,
                   help="investor types (default: all)")
    p.set_defaults(func=cmd_value)

    for name, func, help_ in (
        ("cost", cmd_cost, "cost report (or single pairs) of the chosen --kind"),
        ("annual-cost", cmd_annual_cost, "annual cost report (or single pairs)"),
    ):
        p = sub.add_parser(name, help=help_)
        _common(p, "csv")
        p.add_argument("--pair", nargs="+", help="pairs such as UM, RI, UR (default: full report)")
        p.set_defaults(func=func)

    p = sub.add_parser("table", help="reproduce the cumulated (1) or annual (2) cost table")
    _common(p, "csv")
    p.add_argument("--which", type=int, choices=(1, 2), default=1)
    p.add_argument("--extra-T", type=float, nargs="*", help="additional horizons per gamma row")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("figure-data", help="cost curves and relative contributions for a figure")
    _common(p, "csv")
    p.add_argument("--figure", choices=sorted(FIGURES), default="costs-vs-T")
    p.add_argument("--points", type=int, default=120, help="grid points per curve")
    p.set_defaults(func=cmd_figure_data)

    p = sub.add_parser("mc-check", help="compare closed forms with the Monte Carlo oracle")
    _common(p, "json")
    p.add_argument("--type", "--types", dest="type", nargs="+", choices=[t.value for t in InvestorType],
                   type=str.upper, help="investor types (default: all)")
    p.add_argument("--paths", type=int, help="number of simulated paths (default 100000)")
    p.add_argument("--steps-per-year", type=int, help="time steps per year (default 100)")
    p.add_argument("--seed", type=int, help="random seed (default 20240101)")
    p.add_argument("--antithetic", action="store_true", default=None)
    p.add_argument("--zero-weight", action="store_true", help="hold no stock (deterministic sanity check)")
    p.add_argument("--workers", type=int, default=1, help="threads for path blocks (result is unchanged)")
    p.set_defaults(func=cmd_mc_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        resolve(args)
        code = args.func(args)
        sys.stdout.flush()
        return code
    except BrokenPipeError:
        # the reader closed early (``| head``); keep the interpreter's final flush quiet
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_FAILURE
    except (InputError, ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        print(f"unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
