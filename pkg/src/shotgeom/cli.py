"""Command-line batch runner.

Every subcommand reads an experiment config, writes CSV tables and a
``report.json`` into the output directory, and exits with 0 on success,
2 on an invalid config and 3 when too many replicates had to be redrawn.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig
from .configuration import fmt_real
from .errors import InvalidParameterError, ReplicateBudgetExceeded
from .estimators import (anti_concentration, kolmogorov_distance, rate_fit, replicate,
                         sigma0_cov_series, sigma0_volume_integral, variance_row)
from .field import build_grid
from .functionals import sample_input
from .geometry import Region, make_cube_window
from .process import SeedStream, sample_poisson

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_BUDGET = 0, 2, 3


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_real(v)
    return str(v)


def write_table(path: str, header: list[str], rows) -> None:
    """RFC 4180 CSV in UTF-8 with CRLF line ends; reals at 17 digits."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\r\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([_cell(v) for v in r])


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


class Run:
    def __init__(self, cfg: ExperimentConfig, out: str, threads: int):
        self.cfg = cfg
        self.out = out
        self.threads = threads
        self.tables: list[str] = []
        self.failures = 0
        self.seed = cfg["run"]["seed"]
        self.budget = cfg["run"]["budget"]
        self.batches = cfg["run"]["batches"]

    def table(self, name: str, header, rows) -> None:
        write_table(os.path.join(self.out, name), header, rows)
        self.tables.append(name)

    def windows(self):
        sizes = self.cfg.sizes()
        if not sizes:
            raise ConfigError("missing required field window.sides (or window.volumes)")
        d = self.cfg["field"]["dim"]
        return [(a, make_cube_window(a, d)) for a in sizes]


def cmd_sample(run: Run) -> dict:
    s = run.cfg["sample"]
    fs = run.cfg.field_spec()
    d = fs.dim
    if s["region"] == "cube":
        region = Region.cube(s["extent"], d)
    else:
        region = Region.ball([0.0] * d, s["extent"])
    zeta = sample_poisson(region, fs.marks, SeedStream(run.seed))
    zeta.to_csv(os.path.join(run.out, "sample.csv"))
    run.tables.append("sample.csv")
    return {"region": s["region"], "extent": s["extent"], "expected_count": region.volume,
            "count": len(zeta)}


def cmd_field_grid(run: Run) -> dict:
    spec = run.cfg.functional_spec()
    a, w = run.windows()[0]
    zeta = sample_input(spec, w, SeedStream(run.seed))
    ss = spec.supersample if spec.field.is_token else 1
    g = build_grid(zeta, spec.field.kernel, w, spec.h_grid, supersample=ss)
    zeta.to_csv(os.path.join(run.out, "input.csv"))
    with open(os.path.join(run.out, "field_grid.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(g.to_csv())
    with open(os.path.join(run.out, "field_grid.bin"), "wb") as fh:
        fh.write(g.to_bytes())
    run.tables += ["input.csv", "field_grid.csv"]
    inside = g.values[g.mask]
    return {"side": a, "h": g.h, "shape": list(g.values.shape), "origin": list(g.origin),
            "atoms": len(zeta), "min": float(inside.min()), "max": float(inside.max()),
            "binary": "field_grid.bin"}


def _batches(run: Run):
    spec = run.cfg.functional_spec()
    n = run.cfg["estimators"]["n"]
    out = []
    for i, (a, w) in enumerate(run.windows()):
        b = replicate(spec, w, n, run.seed, (0, i), run.threads, run.budget)
        run.failures += len(b.failed)
        out.append((a, b))
    return out


def cmd_functional(run: Run) -> dict:
    res = _batches(run)
    run.table("functional.csv", ["side", "volume", "replicate", "value", "redrawn"],
              [(a, b.window.volume, r, v, r in b.failed)
               for a, b in res for r, v in enumerate(b.values)])
    rows = [(a, b.window.volume, b.n, b.mean, b.var, len(b.failed)) for a, b in res]
    run.table("functional_summary.csv", ["side", "volume", "n", "mean", "var", "redrawn"], rows)
    return {"sizes": [{"side": a, "volume": b.window.volume, "mean": b.mean, "var": b.var}
                      for a, b in res]}


def cmd_variance_scan(run: Run) -> dict:
    res = _batches(run)
    rows = [variance_row(b, a, run.batches) for a, b in res]
    cols = ["a", "volume", "n", "mean", "var", "var_per_volume", "se", "failed"]
    run.table("variance_scan.csv", cols, [[getattr(r, c) for c in cols] for r in rows])
    return {"rows": [{c: getattr(r, c) for c in cols} for r in rows]}


def cmd_sigma0(run: Run) -> dict:
    e = run.cfg["estimators"]
    spec = run.cfg.functional_spec()
    out = []
    for m in e["methods"]:
        if m == "cov-series":
            est = sigma0_cov_series(spec, e["K"], e["n"], run.seed, block=e["block"] or None,
                                    threads=run.threads, batches=run.batches)
            lags = est.profile["lags"]
            run.table("sigma0_cov_series_profile.csv",
                      [f"k{q + 1}" for q in range(lags.shape[1])] + ["cov"],
                      [list(map(int, k)) + [c] for k, c in zip(lags, est.profile["cov"])])
        else:
            if spec.kind != "excursion-volume":
                raise ConfigError("the volume-integral method needs functional.kind = excursion-volume")
            est = sigma0_volume_integral(spec.field, spec.u, e["R_int"], e["n"], run.seed,
                                         h_grid=spec.h_grid, side=e["side"] or None,
                                         threads=run.threads, batches=run.batches)
            run.table("sigma0_volume_integral_profile.csv", ["rho", "cov"],
                      zip(est.profile["rho"], est.profile["cov"]))
        out.append(est)
    cols = ["method", "truncation", "n", "raw", "floored", "se", "tail_indicator", "tail_flag"]
    run.table("sigma0.csv", cols, [[getattr(s, c) for c in cols] for s in out])
    return {"estimates": [{c: getattr(s, c) for c in cols} for s in out]}


def cmd_clt(run: Run) -> dict:
    std = run.cfg["estimators"]["standardization"]
    res = _batches(run)
    dk = [kolmogorov_distance(b, std) for _, b in res]
    vols = [b.window.volume for _, b in res]
    rows = [(a, b.window.volume, b.n, b.mean, math.sqrt(b.var), d, len(b.failed))
            for (a, b), d in zip(res, dk)]
    run.table("clt.csv", ["side", "volume", "n", "mean", "sd", "d_k", "failed"], rows)
    fit = rate_fit(vols, dk)
    return {"d_k": dk, "volumes": vols,
            "rate_fit": {"slope": fit.slope, "intercept": fit.intercept,
                         "residual": fit.residual, "excluded": fit.excluded}}


def cmd_anticonc(run: Run) -> dict:
    e = run.cfg["estimators"]
    ac = anti_concentration(run.cfg.field_spec(), e["deltas"], e["n_origin"], run.seed)
    run.table("anticonc.csv", ["delta", "mass"], zip(ac.deltas, ac.mass))
    return {"slope": ac.slope, "n": e["n_origin"]}


COMMANDS = {
    "sample": cmd_sample,
    "field-grid": cmd_field_grid,
    "functional": cmd_functional,
    "variance-scan": cmd_variance_scan,
    "sigma0": cmd_sigma0,
    "clt": cmd_clt,
    "anticonc": cmd_anticonc,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shotgeom",
                                description="Monte Carlo experiments on shot-noise excursion sets.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="INI or JSON experiment config")
        s.add_argument("--out", help="output directory (default: run.out from the config)")
        s.add_argument("--threads", type=int, default=1, help="worker threads for replicates")
        s.add_argument("--seed", type=int, help="master seed, overrides run.seed")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg = cfg.with_overrides("run", seed=args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        out = args.out or cfg["run"]["out"]
        os.makedirs(out, exist_ok=True)
        run = Run(cfg, out, args.threads)
        results = COMMANDS[args.command](run)
    except ReplicateBudgetExceeded as e:
        print(f"shotgeom: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except InvalidParameterError as e:
        print(f"shotgeom: invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    report = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "command": args.command,
        "config": cfg.to_dict(),
        "results": _jsonable(results),
        "tables": run.tables,
        "replicate_failures": run.failures,
        "wall_clock_seconds": time.perf_counter() - t0,
    }
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
