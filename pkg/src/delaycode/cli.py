"""Command-line front end.

Exit codes: 0 ok, 1 a reproduction check failed, 2 bad input, 3 a numerical
routine did not converge.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import exponents as ex
from .montecarlo import SimConfig, UnknownScheme, estimate_error_vs_delay, results_csv
from .queue_analysis import NonErgodicError, QueueWalkParams, report, stationary
from .repro import CRITERIA, Settings, run_all
from .source_model import DistributionError, resolve_distribution

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NONCONVERGENCE = 0, 1, 2, 3


class InputError(ValueError):
    pass


class NonConvergence(RuntimeError):
    pass


def _threads(value: int | None) -> int | None:
    if value is not None:
        return value
    env = os.environ.get("DELAYCODE_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError as exc:
            raise InputError(f"DELAYCODE_THREADS must be an integer, got {env!r}") from exc
    return None


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:n`` to ``n`` evenly spaced rates."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError as exc:
        raise InputError(f"grid must look like lo:hi:n, got {text!r}") from exc
    if n < 2 or not hi > lo:
        raise InputError("grid needs hi > lo and n >= 2")
    return np.linspace(lo, hi, n)


def parse_delays(text: str) -> list[int]:
    try:
        out = []
        for part in text.split(","):
            if ":" in part:
                lo, hi, step = (int(v) for v in part.split(":"))
                out.extend(range(lo, hi + 1, step))
            else:
                out.append(int(part))
    except ValueError as exc:
        raise InputError(f"delays must be integers or lo:hi:step ranges, got {text!r}") from exc
    return out


def parse_rate(text: str) -> tuple[int, int] | float:
    """``3/2`` stays an exact fraction; anything else is a float."""
    try:
        if "/" in text:
            num, den = text.split("/")
            return int(num), int(den)
        return float(text)
    except ValueError as exc:
        raise InputError(f"bad rate {text!r}") from exc


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _finite_or_fail(values: dict) -> None:
    for k, v in values.items():
        if isinstance(v, float) and math.isnan(v):
            raise NonConvergence(f"{k} did not converge")


# -- subcommands -----------------------------------------------------------------------


def cmd_exponents(args) -> int:
    p = resolve_distribution(args.dist)
    rate = args.rate
    if isinstance(rate, tuple):
        rate = rate[0] / rate[1]
    vals = {
        "rate": rate,
        "E_lower_block": ex.block_lower(p, rate),
        "E_upper_block": ex.block_upper(p, rate),
        "E_focusing": ex.focusing_bound(p, rate),
        "E_si_upper": ex.si_only_upper(p, rate),
        "critical_rate": ex.critical_rate(p),
    }
    _finite_or_fail(vals)
    if args.format == "json":
        text = json.dumps({k: ex.format_value(v) if math.isinf(v) else v
                           for k, v in vals.items()}, indent=2) + "\n"
    else:
        text = ",".join(vals) + "\n" + ",".join(ex.format_value(v) for v in vals.values()) + "\n"
    _write(text, args.out)
    return EXIT_OK


def cmd_curves(args) -> int:
    p = resolve_distribution(args.dist)
    rates = parse_grid(args.grid)
    table = ex.curves_table(p, rates, threads=_threads(args.threads))
    if args.format == "json":
        obj = {"rate": rates.tolist()}
        for kind, c in table.items():
            obj[kind] = [ex.format_value(v) if math.isinf(v) else float(v) for v in c.exponents]
        text = json.dumps(obj, indent=2) + "\n"
    else:
        text = ex.curves_csv(table)
    _write(text, args.out)
    return EXIT_OK


def _load_config(args) -> SimConfig:
    obj: dict = {}
    if args.config:
        try:
            obj = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
    overrides = {"scheme": args.scheme, "dist": args.dist, "trials": args.trials,
                 "seed": args.seed, "symbols_per_trial": args.symbols,
                 "block_len": args.block_len}
    for k, v in overrides.items():
        if v is not None:
            obj[k] = v
    if args.rate is not None:
        if not isinstance(args.rate, tuple):
            raise InputError("simulation rates must be fractions such as 3/2")
        obj["rate_num"], obj["rate_den"] = args.rate
    if args.delays is not None:
        obj["delays"] = parse_delays(args.delays)
    obj.setdefault("scheme", "prefix")
    obj.setdefault("dist", obj.pop("source", "ternary065"))
    obj.setdefault("rate_num", 3)
    obj.setdefault("rate_den", 2)
    obj.setdefault("delays", [5, 7, 9, 11])
    cfg = SimConfig.from_json(obj)
    cfg.threads = _threads(args.threads)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    est = estimate_error_vs_delay(cfg)
    if args.format == "json":
        text = json.dumps({"config": cfg.to_json(),
                           "results": [e.__dict__ for e in est]}, indent=2) + "\n"
    else:
        text = results_csv(cfg, est)
    _write(text, args.out)
    return EXIT_OK


def cmd_queue(args) -> int:
    an = stationary(QueueWalkParams.from_source(args.a))
    deltas = parse_delays(args.delays) if args.delays else list(range(3, 62, 2))
    _write(json.dumps(report(an, deltas), indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_repro(args) -> int:
    settings = Settings(a=args.a, seed=args.seed if args.seed is not None else Settings.seed,
                        threads=_threads(args.threads))
    only = set(parse_delays(args.only)) if args.only else None
    if only and not only <= set(range(1, len(CRITERIA) + 1)):
        raise InputError(f"criteria are numbered 1..{len(CRITERIA)}")
    printer = None if args.json else (lambda r: print(r.line(), flush=True))
    results = run_all(settings, only, on_result=printer)
    passed = all(r.passed for r in results)
    if args.json:
        text = json.dumps([r.to_json() for r in results], indent=2, default=float) + "\n"
        _write(text, args.out)
    else:
        print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return EXIT_OK if passed else EXIT_FAIL


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="delaycode",
                                 description="Delay-constrained source coding toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, dist=True, fmt=True):
        if dist:
            p.add_argument("--dist", default="ternary065",
                           help="ternary065, ternary(a), bsc(eps), uniform(k), inline JSON or a path")
        if fmt:
            p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--threads", type=int, help="worker cap (env DELAYCODE_THREADS)")

    p = sub.add_parser("exponents", help="all bounds at one rate")
    common(p)
    p.add_argument("--rate", type=parse_rate, required=True)
    p.set_defaults(func=cmd_exponents)

    p = sub.add_parser("curves", help="bounds on a rate grid as CSV")
    common(p)
    p.add_argument("--grid", required=True, help="lo:hi:n")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("simulate", help="Monte Carlo error against delay")
    common(p, dist=False)
    p.add_argument("config", nargs="?", help="JSON config file")
    p.add_argument("--dist")
    p.add_argument("--scheme", choices=("prefix", "universal", "block"))
    p.add_argument("--rate", type=parse_rate)
    p.add_argument("--delays", help="comma list or lo:hi:step")
    p.add_argument("--trials", type=int)
    p.add_argument("--symbols", type=int, help="symbols per trial")
    p.add_argument("--block-len", type=int, dest="block_len")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("queue", help="stationary analysis of the prefix scheme's queue")
    common(p, dist=False, fmt=False)
    p.add_argument("--a", type=float, default=0.65, help="probability of symbol A")
    p.add_argument("--delays", help="comma list or lo:hi:step of odd delays")
    p.set_defaults(func=cmd_queue)

    p = sub.add_parser("repro", help="run every reproduction check")
    common(p, dist=False, fmt=False)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--a", type=float, default=0.65, help="perturb the ternary source")
    p.add_argument("--seed", type=int)
    p.add_argument("--only", help="subset of checks, e.g. 1,2,5:7:1")
    p.set_defaults(func=cmd_repro)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (InputError, DistributionError, UnknownScheme, NonErgodicError, ValueError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
