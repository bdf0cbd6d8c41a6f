"""Command line entry point: ``relabc <command> [options]``.

Exit codes: 0 success, 1 verification failure, 2 cells that ran out of
proposal budget, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .calibrate import calibrate_ball, calibrate_ellipse_closed, calibrate_ellipse_numeric
from .exceptions import ConfigError, FixtureMissingError, MalformedCSVError, RelabcError
from .expansion import form_for
from .harness.cells import run_cell
from .harness.config import Cell, load_config
from .harness.plot import plot_figure2
from .harness.tables import reproduce_tables
from .harness.verify import verify_reference_rows
from .models import MODELS, NORMAL, ObservedStat, update
from .oracle import QuadratureSpec, kl_numeric
from .sampler import AcceptanceRegion

EXIT_OK, EXIT_VERIFY, EXIT_BUDGET, EXIT_CONFIG = 0, 1, 2, 3

log = logging.getLogger("relabc")


def _common(p):
    p.add_argument("--config", help="INI experiment file")
    p.add_argument("--model", choices=MODELS, help="statistical model (default: normal)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--particles", type=int, help="accepted particles per run (K)")
    p.add_argument("-v", "--verbose", action="store_true")


def _stat_args(p):
    p.add_argument("--tol", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--tau", type=float, nargs="+", help="observed statistic: xbar s2 (normal) or xbar (rate)")


def build_parser():
    parser = argparse.ArgumentParser(prog="relabc", description="Entropy-calibrated rejection ABC.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="print ball and ellipse tolerances for one observed statistic")
    _common(p)
    _stat_args(p)
    p.add_argument("--legacy", action="store_true", help="use the legacy normal-model coefficient")

    p = sub.add_parser("simulate", help="run one (tol, n) cell and print its record as JSON")
    _common(p)
    p.add_argument("--tol", type=float, required=True)
    p.add_argument("--n", type=int, required=True)

    p = sub.add_parser("tables", help="run all cells and write the table CSVs")
    _common(p)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("verify", help="recompute tolerances and U from the reference tables")
    _common(p)
    p.add_argument("--fixture", help="alternative reference table JSON")
    p.add_argument("--criteria", default="1,2,3", help="comma separated subset of 1,2,3")
    p.add_argument("--current", action="store_true", help="use the current coefficient instead of the legacy one")

    p = sub.add_parser("oracle-check", help="compare quadrature KL with the leading-order expansion")
    _common(p)
    _stat_args(p)
    p.add_argument("--law", choices=("exact", "canonical"), default="canonical")

    p = sub.add_parser("plot", help="draw figure2.csv as SVG")
    _common(p)
    p.add_argument("csv", nargs="?", help="figure CSV (default: <out>/figure2.csv)")
    p.add_argument("--svg", help="output SVG path")
    return parser


def _config(args):
    cfg = load_config(args.config, model=args.model)
    return cfg.with_overrides(master_seed=args.seed, output_dir=args.out, K=args.particles,
                              workers=getattr(args, "workers", None))


def _observed(cfg, args):
    tau = args.tau
    if tau is None:
        tau = (0.0, 1.0) if cfg.model == NORMAL else (1.0,)
    want = 2 if cfg.model == NORMAL else 1
    if len(tau) != want:
        raise ConfigError(f"{cfg.model} needs {want} statistic value(s), got {len(tau)}")
    return ObservedStat(tau, args.n)


def cmd_calibrate(args):
    cfg = _config(args)
    stat = _observed(cfg, args)
    form = form_for(update(cfg.prior, stat), stat.n, stat.tau, legacy=args.legacy)
    ball = calibrate_ball(form, args.tol)
    ell = calibrate_ellipse_closed(form, args.tol) if form.q == 2 else calibrate_ellipse_numeric(form, args.tol)
    out = {"ball": ball.epsilon.tolist(), "ellipse": ell.epsilon.tolist(),
           "ball_volume": ball.volume, "ellipse_volume": ell.volume,
           "outside_validity": bool(ball.outside_validity or ell.outside_validity)}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_simulate(args):
    cfg = _config(args)
    tols = list(cfg.tols)
    ns = list(cfg.ns)
    ti = tols.index(args.tol) if args.tol in tols else len(tols)
    ni = ns.index(args.n) if args.n in ns else len(ns)
    rec = run_cell(cfg, Cell(ti, ni, args.tol, args.n))
    print(json.dumps(rec.to_dict(), indent=2, default=float))
    return EXIT_OK if rec.complete else EXIT_BUDGET


def cmd_tables(args):
    cfg = _config(args)
    res = reproduce_tables(cfg)
    for name, path in res.paths.items():
        print(f"{name}: {path}")
    if res.incomplete:
        print(f"budget exhausted in {len(res.incomplete)} cell(s): {res.incomplete}", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_verify(args):
    try:
        wanted = sorted({int(c) for c in args.criteria.split(",") if c.strip()})
    except ValueError as exc:
        raise ConfigError(f"bad --criteria value {args.criteria!r}") from exc
    if not wanted or not set(wanted) <= {1, 2, 3}:
        raise ConfigError("--criteria must name a subset of 1,2,3")
    report = verify_reference_rows(args.fixture, legacy=not args.current)
    tables = {f"table{k}" for k in wanted}
    for line, check in zip(report.lines(), report.checks):
        if check.table in tables:
            print(line)
    if args.verbose:
        for line in report.info:
            print(line)
    ok = True
    for k in wanted:
        status = report.criterion(k)
        ok &= status
        print(f"criterion {k}: {'PASS' if status else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_oracle_check(args):
    cfg = _config(args)
    stat = _observed(cfg, args)
    form = form_for(update(cfg.prior, stat), stat.n, stat.tau)
    eps = calibrate_ball(form, args.tol).epsilon
    spec = QuadratureSpec()
    rows = []
    for scale in (1.0, 0.5):
        e = eps * scale
        region = AcceptanceRegion.ellipse(stat.tau, e)
        kl = kl_numeric(cfg.prior, stat, region, spec, law=args.law)
        rows.append({"epsilon": e.tolist(), "expansion": form(e), "quadrature": kl, "ratio": kl / form(e)})
    print(json.dumps(rows, indent=2))
    return EXIT_OK


def cmd_plot(args):
    csv_path = Path(args.csv) if args.csv else Path(args.out or "results") / "figure2.csv"
    print(plot_figure2(csv_path, args.svg))
    return EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "simulate": cmd_simulate,
    "tables": cmd_tables,
    "verify": cmd_verify,
    "oracle-check": cmd_oracle_check,
    "plot": cmd_plot,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FixtureMissingError, MalformedCSVError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY if args.command == "verify" else EXIT_CONFIG
    except RelabcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
