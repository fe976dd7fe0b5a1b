"""Command-line entry point: run one experiment, write a timestamped
output directory with a manifest, report CSVs, and plot CSVs.

Exit status is 0 iff every pass/fail row in the report passed.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import platform
import sys
import time

import numpy as np

from . import BACKEND_NAME, __version__
from .experiments import (
    CONFIG_DEFAULTS,
    SCHEMA_VERSION,
    ExperimentConfig,
    ExperimentReport,
    config_from_dict,
    exp_calibrate,
    exp_first_moment,
    exp_max_statistics,
    exp_moment_convergence,
    exp_sbm_identities,
    exp_she_oracle,
    exp_tail_identities,
)

EXPERIMENTS = {
    "calibrate": exp_calibrate,
    "first-moment": exp_first_moment,
    "moments": exp_moment_convergence,
    "tail": exp_tail_identities,
    "max": exp_max_statistics,
    "she-oracle": exp_she_oracle,
}

CSV_COLUMNS = ["observable", "N", "t", "x", "y", "k",
               "estimate", "stderr", "oracle", "z", "pass"]


def parse_config(path: str | None) -> dict:
    """Load the JSON config (defaults when path is None); raising with
    every violation listed happens in config_from_dict."""
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    return data


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="stickymc",
        description="Moderate-deviation Monte Carlo experiments for walks "
                    "in random environments and their continuum limits.",
    )
    p.add_argument("command", choices=sorted(EXPERIMENTS) + ["selftest"])
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--out", default="runs", help="parent directory for run outputs")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--threads", type=int, default=None,
                   help="worker count (default: logical cores)")
    p.add_argument("--tolerance-scale", type=float, default=None,
                   help="multiplier on every pass/fail tolerance")
    return p


def make_run_dir(parent: str, command: str) -> str:
    stamp = datetime.datetime.now().strftime("%Y%m%dT%H%M%S")
    base = os.path.join(parent, f"{command}-{stamp}")
    run_dir = base
    i = 1
    while os.path.exists(run_dir):
        run_dir = f"{base}-{i}"
        i += 1
    os.makedirs(run_dir)
    return run_dir


def write_report_csv(path: str, report: ExperimentReport) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in report.rows:
            fh.write(",".join([
                r.observable, str(r.N), repr(float(r.t)),
                repr(float(r.x)), repr(float(r.y)), str(r.k),
                repr(float(r.estimate)), repr(float(r.stderr)),
                repr(float(r.oracle)), repr(float(r.z)),
                "1" if r.passed else "0",
            ]) + "\n")


def write_plot_csvs(run_dir: str, report: ExperimentReport) -> list[str]:
    written = []
    for name, rows in report.plots.items():
        path = os.path.join(run_dir, f"plot_{name}.csv")
        header, body = rows[0], rows[1:]
        with open(path, "w") as fh:
            fh.write(",".join(str(h) for h in header) + "\n")
            for row in body:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        written.append(os.path.basename(path))
    return written


def run_experiment(command: str, cfg: ExperimentConfig, run_dir: str,
                   config_data: dict) -> bool:
    t0 = time.time()
    report = EXPERIMENTS[command](cfg)
    wall = time.time() - t0
    report_name = f"report_{report.name}.csv"
    write_report_csv(os.path.join(run_dir, report_name), report)
    plot_files = write_plot_csvs(run_dir, report)
    manifest = {
        "command": command,
        "experiment": report.name,
        "config": config_data,
        "config_sha256": hashlib.sha256(
            json.dumps(config_data, sort_keys=True).encode()
        ).hexdigest(),
        "master_seed": cfg.master_seed,
        "threads": cfg.threads,
        "tolerance_scale": cfg.tolerance_scale,
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "backend": BACKEND_NAME,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "host": platform.node(),
        "started": datetime.datetime.now().isoformat(),
        "wall_seconds": wall,
        "report": report_name,
        "plots": plot_files,
        "passed": report.passed,
        "rows": len(report.rows),
        "failures": [r.observable for r in report.rows if not r.passed],
    }
    with open(os.path.join(run_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    for r in report.rows:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {report.name}/{r.observable} N={r.N} "
              f"estimate={r.estimate:.6g} oracle={r.oracle:.6g} z={r.z:.3g}")
    print(f"{report.name}: {'PASS' if report.passed else 'FAIL'} "
          f"({len(report.rows)} rows, {wall:.1f}s) -> {run_dir}")
    return report.passed


def selftest_config() -> dict:
    """Small configuration that exercises every experiment in under a
    minute on the pure-python lane."""
    return {
        "N_list": [64, 256],
        "replicas_calibrate": 300,
        "replicas_first_moment": 120,
        "replicas_k2": 120,
        "replicas_k3": 120,
        "replicas_tail": 120,
        "replicas_tail_two_point": 150,
        "replicas_max": 60,
        "oracle_mc_reps": 2000,
        "sbm_dt": 4e-3,
        "oracle_dt": 4e-3,
        "oracle_eps": 0.04,
        "max_N": 256,
        "k_list": [2],
        "tolerance_scale": 3.0,
    }


def run_selftest(cfg_overrides: dict, run_dir: str) -> bool:
    data = selftest_config()
    data.update(cfg_overrides)
    cfg = config_from_dict(data)
    ok = True
    summaries = []
    for command in ("she-oracle", "calibrate", "first-moment", "moments", "tail", "max"):
        t0 = time.time()
        report = EXPERIMENTS[command](cfg)
        summaries.append((report.name, report.passed, time.time() - t0))
        write_report_csv(os.path.join(run_dir, f"report_{report.name}.csv"), report)
        ok = ok and report.passed
    t0 = time.time()
    sbm = exp_sbm_identities(cfg, reps=4000)
    write_report_csv(os.path.join(run_dir, "report_sbm.csv"), sbm)
    summaries.append((sbm.name, sbm.passed, time.time() - t0))
    ok = ok and sbm.passed
    for name, passed, wall in summaries:
        print(f"[{'PASS' if passed else 'FAIL'}] selftest/{name} ({wall:.1f}s)")
    with open(os.path.join(run_dir, "manifest.json"), "w") as fh:
        json.dump({
            "command": "selftest", "passed": ok, "backend": BACKEND_NAME,
            "version": __version__, "schema_version": SCHEMA_VERSION,
            "experiments": [{"name": n, "passed": p, "wall_seconds": w}
                            for n, p, w in summaries],
        }, fh, indent=2)
    print(f"selftest: {'PASS' if ok else 'FAIL'} -> {run_dir}")
    return ok


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    data = parse_config(args.config)
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.threads is not None:
        data["threads"] = args.threads
    elif "threads" not in data:
        data["threads"] = os.cpu_count() or 1
    if args.tolerance_scale is not None:
        data["tolerance_scale"] = args.tolerance_scale
    run_dir = make_run_dir(args.out, args.command)
    if args.command == "selftest":
        ok = run_selftest(data, run_dir)
        return 0 if ok else 1
    cfg = config_from_dict({**{k: v for k, v in CONFIG_DEFAULTS.items()
                               if k not in data}, **data})
    ok = run_experiment(args.command, cfg, run_dir, data)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
