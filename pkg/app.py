"""
SubsampledRDP — Command Line
Main entry point: RDP curves, subsampling bounds, composition sweeps,
(ε, δ) conversions and bound verification, written as CSV/JSON data.

    python app.py amplify --spec '{"kind": "gaussian", "sigma": 5}' --gamma 0.001
    python app.py compose --spec '{"kind": "gaussian", "sigma": 5}' --gamma 0.001 --rounds 600000
    python app.py convert --spec '{"kind": "gaussian", "sigma": 5}' --delta 1e-8
    python app.py verify  --spec '{"kind": "laplace", "b": 2}' --gamma 0.001 --alphas 2:32
"""

import argparse
import json
import sys
from typing import List, Optional

import numpy as np
from absl import logging

from privacy import config
from privacy.accountant import CgfLedger, compose, delta_from_eps, eps_from_delta, ledger_from_json
from privacy.amplification import SubsampledCurve
from privacy.baselines import METHODS, InfeasibleBudgetError, calibrated_baseline
from privacy.exporter import (
    BOUND_REPORT_COLUMNS,
    FORMATS,
    render_record,
    render_rows,
    write_output,
)
from privacy.spec_parser import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_BOUNDS,
    SpecError,
    build_curve,
    parse_alpha_grid,
    parse_bound_kinds,
)
from privacy.verifier import sandwich_report

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VERIFY = 3


# ── Helpers ──────────────────────────────────────────────────────────────────


def _default_n(args) -> int:
    return args.n if args.n is not None else max(2, round(100.0 / args.gamma))


def _round_sweep(max_rounds: int, points: int) -> List[int]:
    ks = np.unique(np.round(np.geomspace(1, max_rounds, points)).astype(np.int64))
    return [int(k) for k in ks]


def _require(args, name: str):
    if getattr(args, name, None) is None:
        raise SpecError(f"--{name.replace('_', '-')} is required for {args.command}")
    return getattr(args, name)


# ── Subcommands ──────────────────────────────────────────────────────────────


def cmd_mech(args) -> int:
    curve = build_curve(_require(args, "spec"))
    rows = [{"alpha": a, "epsilon": curve.eval(a)} for a in parse_alpha_grid(args.alphas)]
    ok = write_output(render_rows(rows, ("alpha", "epsilon"), args.format), args.output)
    return EXIT_OK if ok else EXIT_USAGE


def cmd_amplify(args) -> int:
    base = build_curve(_require(args, "spec"))
    gamma = _require(args, "gamma")
    kinds = parse_bound_kinds(args.bounds)
    alphas = parse_alpha_grid(args.alphas)
    n = _default_n(args) if any(k.startswith("asymptotic") for k in kinds) else None
    try:
        curves = {kind: SubsampledCurve(base, gamma, kind, n=n if kind.startswith("asymptotic") else None) for kind in kinds}
    except ValueError as e:
        raise SpecError(str(e)) from e

    logging.info("[CLI] amplify %s gamma=%g over %d orders", base.name, gamma, len(alphas))
    rows = []
    for alpha in alphas:
        row = {"alpha": alpha}
        for kind, curve in curves.items():
            # integer-only bounds are not lower bounds between integers
            row[kind] = None if kind == "lower" and not float(alpha).is_integer() else curve.eval(alpha)
        rows.append(row)
    ok = write_output(render_rows(rows, ("alpha",) + kinds, args.format), args.output)
    return EXIT_OK if ok else EXIT_USAGE


def cmd_compose(args) -> int:
    base = build_curve(_require(args, "spec"))
    gamma = _require(args, "gamma")
    delta = args.delta if args.delta is not None else 1e-8
    if not 0 < delta < 1:
        raise SpecError(f"--delta must lie in (0, 1), got {delta}")
    if args.rounds < 1:
        raise SpecError(f"--rounds must be at least 1, got {args.rounds}")

    curves = {
        "rdp_general": SubsampledCurve(base, gamma, "general"),
        "rdp_lower": SubsampledCurve(base, gamma, "lower") if base.is_tight and gamma < 1 else None,
    }
    if base.name == "gaussian" and gamma < 1:
        n = _default_n(args)
        for case in ("bad", "good"):
            kind = f"asymptotic_{case}"
            curves[f"rdp_{kind}"] = SubsampledCurve(base, gamma, kind, n=n)
    baselines = tuple(args.baseline) if args.baseline else METHODS
    columns = ("k",) + tuple(curves) + baselines

    ks = _round_sweep(args.rounds, args.points)
    logging.info("[CLI] compose %s gamma=%g over %d values of k up to %d", base.name, gamma, len(ks), args.rounds)
    rows = []
    for k in ks:
        row = {"k": k}
        for column, curve in curves.items():
            row[column] = eps_from_delta(compose(CgfLedger(), curve, k), delta).eps if curve is not None else None
        for method in baselines:
            try:
                row[method] = calibrated_baseline(base, gamma, k, delta, method)
            except InfeasibleBudgetError as e:
                logging.warning("[CLI] %s baseline skipped at k=%d: %s", method, k, e)
                row[method] = None
        rows.append(row)
    ok = write_output(render_rows(rows, columns, args.format), args.output)
    return EXIT_OK if ok else EXIT_USAGE


def cmd_convert(args) -> int:
    if (args.delta is None) == (args.eps is None):
        raise SpecError("convert needs exactly one of --delta or --eps")

    if args.ledger:
        try:
            with open(args.ledger, "r", encoding="utf-8") as handle:
                ledger = ledger_from_json(handle.read())
        except OSError as e:
            raise SpecError(f"cannot read ledger {args.ledger}: {e}") from e
    else:
        ledger = CgfLedger()
        if args.spec is not None:
            curve = build_curve(args.spec)
            if args.gamma is not None:
                curve = SubsampledCurve(curve, args.gamma, args.bound_kind, n=args.n)
            compose(ledger, curve, args.count)

    if args.delta is not None:
        result = eps_from_delta(ledger, args.delta, tol=args.tol)
    else:
        result = delta_from_eps(ledger, args.eps, tol=args.tol)
    logging.info("[CLI] convert -> eps=%.6g delta=%.6g flags=%s", result.eps, result.delta, ",".join(result.flags))
    ok = write_output(render_record(result.as_dict()), args.output)
    return EXIT_OK if ok else EXIT_USAGE


def cmd_verify(args) -> int:
    curve = build_curve(_require(args, "spec"))
    gamma = _require(args, "gamma")
    alphas = parse_alpha_grid(args.alphas)
    reports = sandwich_report(curve, gamma, alphas, n=args.n)
    rows = [report.as_row() for report in reports]
    if not write_output(render_rows(rows, BOUND_REPORT_COLUMNS, args.format), args.output):
        return EXIT_USAGE
    failed = [r.alpha for r in reports if not r.passed]
    if failed:
        logging.error("[CLI] sandwich not verified at alpha=%s", ", ".join(f"{a:g}" for a in failed))
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {
    "mech": cmd_mech,
    "amplify": cmd_amplify,
    "compose": cmd_compose,
    "convert": cmd_convert,
    "verify": cmd_verify,
}


# ── Argument parsing ─────────────────────────────────────────────────────────


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Renyi-DP accounting for subsampled mechanisms.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help='mechanism JSON, e.g. \'{"kind": "gaussian", "sigma": 5}\'')
    common.add_argument("--gamma", type=float, help="sampling ratio m/n")
    common.add_argument("--alphas", default=DEFAULT_ALPHA_GRID, help="order grid, e.g. 2:256 or log:1.1:64:16")
    common.add_argument("--n", type=int, help="dataset size for the asymptotic bounds")
    common.add_argument("--output", default="-", help="output path, - for stdout")
    common.add_argument("--format", choices=FORMATS, default="csv")
    common.add_argument("--config", help="JSON file whose keys override these flags")
    common.add_argument("--verbose", action="store_true", help="log progress at INFO")

    sub.add_parser("mech", parents=[common], help="RDP curve of the base mechanism")

    amplify = sub.add_parser("amplify", parents=[common], help="subsampled RDP bounds per order")
    amplify.add_argument("--bounds", default=",".join(DEFAULT_BOUNDS), help="comma-separated bound kinds")

    compose_cmd = sub.add_parser("compose", parents=[common], help="epsilon against rounds k")
    compose_cmd.add_argument("--rounds", type=int, default=600000, help="largest k in the sweep")
    compose_cmd.add_argument("--points", type=int, default=600, help="log-spaced k values")
    compose_cmd.add_argument("--delta", type=float, help="target delta (default 1e-8)")
    compose_cmd.add_argument("--baseline", action="append", choices=METHODS, help="baseline columns")

    convert = sub.add_parser("convert", parents=[common], help="(eps, delta) from a ledger")
    convert.add_argument("--ledger", help="ledger JSON file")
    convert.add_argument("--bound-kind", default="general", help="bound kind when --gamma is given")
    convert.add_argument("--count", type=int, default=1, help="rounds of --spec to compose")
    convert.add_argument("--delta", type=float)
    convert.add_argument("--eps", type=float)
    convert.add_argument("--tol", type=float, default=config.SOLVER_TOL)

    sub.add_parser("verify", parents=[common], help="sandwich check against the quadrature oracle")
    return parser


def _apply_config(args) -> None:
    with open(args.config, "r", encoding="utf-8") as handle:
        overrides = json.load(handle)
    if not isinstance(overrides, dict):
        raise SpecError("--config must hold a JSON object")
    for key, value in overrides.items():
        name = key.replace("-", "_")
        if name == "spec" and isinstance(value, dict):
            value = json.dumps(value)
        setattr(args, name, value)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    logging.set_verbosity(logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.config:
            _apply_config(args)
        return COMMANDS[args.command](args)
    except (OSError, json.JSONDecodeError) as e:
        logging.error("[CLI] %s", e)
        return EXIT_USAGE
    except ValueError as e:
        logging.error("[CLI] %s: %s", type(e).__name__, e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
