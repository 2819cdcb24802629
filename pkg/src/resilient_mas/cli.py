"""Command-line front end.

Subcommands: check (assumption/gain-condition report), run (trace.csv +
report.json), regsolve (direct vs flow regulator solutions), sweep (run every
config in a directory).  Exit codes: 0 ok, 1 check failure, 2 config error,
3 runtime divergence.  Set SIM_LOG=debug for verbose logging.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import scipy.linalg as la

from . import cpl
from .config import ConfigError, load_config
from .dynamics import GainDesignError, observer_gain_bound, regulator_gain_bound
from .sim import AssemblyError, SimDivergenceError, assemble, run
from .topology import min_eig_omega_theta_inv

log = logging.getLogger("resilient_mas")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


def _setup_logging():
    level = os.environ.get("SIM_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def cmd_check(args) -> int:
    cfg = load_config(args.config)
    loop = assemble(cfg, strict=False)
    S = cfg.leader.S
    print(f"sigma_max(S)           = {la.svdvals(S)[0]:.6f}")
    print(f"lambda_min(Omega/Theta)= {min_eig_omega_theta_inv(loop.gm):.6f}")
    if np.isfinite(loop.tau_a):
        print(f"tau_a fit              = {loop.tau_a:.6f} (T0 = {loop.T0:.4f})")
        try:
            print(f"mu1 lower bound        = "
                  f"{observer_gain_bound(S, loop.gm, loop.tau_a):.6f} (mu1 = {cfg.mu1})")
        except GainDesignError:
            print("mu1 lower bound        = undefined (tau_a <= 1)")
    else:
        print("tau_a fit              = inf (no DoS)")
    for i, fm in enumerate(loop.models):
        print(f"mu3 lower bound (f{i})   = "
              f"{regulator_gain_bound(S, fm):.6f} (mu3 = {cfg.mu3})")
    print(f"alpha1 = {loop.tl.alpha1:.4f}, alpha2 = {loop.tl.alpha2:.4f}")
    failed = False
    for entry in loop.validation:
        print(f"[{entry['level']:4s}] {entry['name']}")
        failed = failed or entry["level"] == "fail"
    return EXIT_CHECK if failed else EXIT_OK


def write_trace_csv(trace, path: Path):
    names = trace.column_names()
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        ncols = len(names)
        data = [trace.columns[n] for n in names]
        for r in range(len(trace.times)):
            fh.write(",".join(format(data[c][r], ".17g") for c in range(ncols)) + "\n")


def _run_one(config_path: str, out_dir: Path, dt=None, horizon=None) -> int:
    cfg = load_config(config_path)
    if dt is not None:
        cfg.dt = dt
    if horizon is not None:
        cfg.horizon = horizon
    trace = run(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out_dir / "trace.csv")
    report = {
        "schema": "resilient-mas-report/1",
        "config": str(config_path),
        "validation": trace.validation,
        "summary": trace.summary,
        "columns": trace.column_names(),
        "samples": len(trace.times),
    }
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    log.info("wrote %s", out_dir / "trace.csv")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        return _run_one(args.config, Path(args.out), dt=args.dt, horizon=args.horizon)
    except SimDivergenceError as exc:
        print(f"error: simulation diverged at t={exc.t:.6f}", file=sys.stderr)
        return EXIT_DIVERGED


def cmd_regsolve(args) -> int:
    cfg = load_config(args.config)
    if not (0 <= args.follower < len(cfg.followers)):
        print(f"error: follower index {args.follower} out of range "
              f"[0, {len(cfg.followers) - 1}]", file=sys.stderr)
        return EXIT_CONFIG
    fm = cfg.followers[args.follower].model
    pi, gamma = cpl.regulator_direct_solve(cfg.leader.S, cfg.leader.R, fm)
    pi_f, gamma_f = cpl.regulator_flow_solve(cfg.leader.S, cfg.leader.R, fm, cfg.mu3)
    res_state = la.norm(fm.A @ pi + fm.B @ gamma - pi @ cfg.leader.S, "fro")
    res_out = la.norm(fm.C @ pi - cfg.leader.R, "fro")
    diff = la.norm(pi - pi_f, "fro") + la.norm(gamma - gamma_f, "fro")
    with np.printoptions(precision=6, suppress=True):
        print("Pi (direct) =\n", pi)
        print("Gamma (direct) =\n", gamma)
    print(f"residuals: state {res_state:.3e}, output {res_out:.3e}")
    print(f"flow-vs-direct difference: {diff:.3e}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfgs = sorted(Path(args.dir).glob("*.json"))
    if not cfgs:
        print(f"error: no .json configs in {args.dir}", file=sys.stderr)
        return EXIT_CONFIG
    rc = EXIT_OK
    with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
        futs = {pool.submit(_run_one, str(c), Path(args.out) / c.stem): c for c in cfgs}
        for fut in concurrent.futures.as_completed(futs):
            name = futs[fut].name
            try:
                fut.result()
                print(f"[ok]   {name}")
            except Exception as exc:
                print(f"[fail] {name}: {exc}", file=sys.stderr)
                rc = EXIT_CHECK
    return rc


def main(argv=None) -> int:
    _setup_logging()
    ap = argparse.ArgumentParser(prog="sim", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("check", help="validate assumptions and gain conditions")
    p.add_argument("config")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("run", help="run a closed-loop experiment")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("regsolve", help="solve the output regulator equations")
    p.add_argument("config")
    p.add_argument("--follower", type=int, required=True)
    p.set_defaults(fn=cmd_regsolve)

    p = sub.add_parser("sweep", help="run every config in a directory")
    p.add_argument("dir")
    p.add_argument("--out", default="sweep_out")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(fn=cmd_sweep)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssemblyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
