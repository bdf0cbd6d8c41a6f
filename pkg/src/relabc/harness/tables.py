"""Run every cell and write the table CSVs plus a JSON manifest."""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy

from ..exceptions import MalformedCSVError, RelabcError
from ..models import NORMAL
from .cells import CellRecord, run_cell
from .config import ExperimentConfig

NORMAL_HEADERS = {
    "table1": ["tol", "n", "xbar", "s2", "epsilon", "mu_hat", "sd_mu", "sigma2_hat", "sd_sigma2", "R_hat"],
    "table2": ["tol", "n", "xbar", "s2", "epsilon1", "epsilon2", "mu_hat", "sd_mu", "sigma2_hat", "sd_sigma2",
               "R_hat"],
    "table3": ["tol", "n", "U_tilde", "R_ratio"],
    "figure2": ["tol", "n", "R_ratio"],
}
RATE_HEADERS = {
    "table1": ["tol", "n", "xbar", "epsilon", "rate_hat", "sd_rate", "R_hat"],
}


class TablesResult(NamedTuple):
    paths: dict
    records: list
    incomplete: list
    manifest: dict


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _normal_rows(rec: CellRecord):
    x, s2 = rec.tau_star
    rows = {}
    if "ball" in rec.estimates and rec.estimates["ball"]:
        m, v = rec.estimates["ball"]["mean_mu"], rec.estimates["ball"]["variance_sigma2"]
        rows["table1"] = [rec.tol, rec.n, x, s2, rec.epsilon, m[0], m[2], v[0], v[2], rec.R_hat["ball"]]
    if "ellipse" in rec.estimates and rec.estimates["ellipse"]:
        m, v = rec.estimates["ellipse"]["mean_mu"], rec.estimates["ellipse"]["variance_sigma2"]
        e1, e2 = rec.epsilon_pair
        rows["table2"] = [rec.tol, rec.n, x, s2, e1, e2, m[0], m[2], v[0], v[2], rec.R_hat["ellipse"]]
    if not math.isnan(rec.R_ratio_empirical):
        rows["table3"] = [rec.tol, rec.n, rec.U_tilde, rec.R_ratio_empirical]
        rows["figure2"] = [rec.tol, rec.n, rec.R_ratio_empirical]
    return rows


def _rate_rows(rec: CellRecord):
    if not rec.estimates.get("ball"):
        return {}
    r = rec.estimates["ball"]["rate_theta"]
    return {"table1": [rec.tol, rec.n, rec.tau_star[0], rec.epsilon, r[0], r[2], rec.R_hat["ball"]]}


def write_csv(path, header, rows):
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise RelabcError(f"cannot write {path}: {exc}") from exc


def read_csv(path):
    """Parse a table CSV into ``(header, rows)`` with numeric fields converted."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            data = list(csv.reader(fh))
    except OSError as exc:
        raise MalformedCSVError(f"cannot read {path}: {exc}") from exc
    if not data:
        raise MalformedCSVError(f"{path} is empty")
    header, body = data[0], data[1:]
    rows = []
    for i, raw in enumerate(body, start=2):
        if len(raw) != len(header):
            raise MalformedCSVError(f"{path}:{i}: expected {len(header)} fields, got {len(raw)}")
        try:
            rows.append([int(v) if h == "n" else float(v) for h, v in zip(header, raw)])
        except ValueError as exc:
            raise MalformedCSVError(f"{path}:{i}: {exc}") from exc
    return header, rows


def _run(args):
    config, cell = args
    try:
        return run_cell(config, cell)
    except RelabcError as exc:
        raise RelabcError(f"cell (tol={cell.tol}, n={cell.n}): {exc}") from exc


def run_cells(config: ExperimentConfig, cells=None):
    cells = config.cells if cells is None else cells
    jobs = [(config, c) for c in cells]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_run, jobs))
    else:
        records = [_run(j) for j in jobs]
    return sorted(records, key=lambda r: (r.tol, r.n))


def reproduce_tables(config: ExperimentConfig, out_dir=None, cells=None) -> TablesResult:
    """Run all cells and write ``table1.csv`` .. ``table3.csv``, ``figure2.csv`` and ``manifest.json``.

    Records are sorted by ``(tol, n)`` before writing and wall times are kept
    out of the CSVs, so a fixed master seed gives byte-identical tables for
    any worker count.
    """
    out = Path(out_dir) if out_dir is not None else config.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    records = run_cells(config, cells)
    total = time.perf_counter() - t0

    headers = NORMAL_HEADERS if config.model == NORMAL else RATE_HEADERS
    make = _normal_rows if config.model == NORMAL else _rate_rows
    rows = {k: [] for k in headers}
    for rec in records:
        for k, row in make(rec).items():
            rows[k].append(row)
    paths = {}
    for name, header in headers.items():
        if not rows[name]:
            continue
        paths[name] = out / f"{name}.csv"
        write_csv(paths[name], header, rows[name])

    incomplete = [(r.tol, r.n) for r in records if not r.complete]
    manifest = {
        "config": config.to_dict(),
        "seeds": {f"{r.tol},{r.n}": r.seeds for r in records},
        "timestamps": {"start": started.isoformat(), "end": datetime.now(timezone.utc).isoformat()},
        "durations": {"total": total, "cells": {f"{r.tol},{r.n}": r.wall_time for r in records}},
        "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
        "proposals": {f"{r.tol},{r.n}": r.proposals for r in records},
        "incomplete": incomplete,
    }
    paths["manifest"] = out / "manifest.json"
    try:
        paths["manifest"].write_text(json.dumps(manifest, indent=2, default=float))
    except OSError as exc:
        raise RelabcError(f"cannot write {paths['manifest']}: {exc}") from exc
    return TablesResult(paths, records, incomplete, manifest)
