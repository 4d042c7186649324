"""Command line entry point.

Exit codes: 0 all assertions passed, 1 an assertion failed, 2 usage or
configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DomainError, NumericError
from ..grid import write_csv
from ..norms import (cutoff_norm_pr, ell_tail, limsup_rate, norm_1r, norm_inf_r,
                     norm_phi_alpha, norm_pr)
from ..profiles import shoot_profile
from ..solver import solve
from .config import build_bc, build_datum, horizon_ok, load_config
from .experiments import EXPERIMENTS, SEED_DEFAULT, experiment_config, run_experiment
from .report import _plain

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--out", help="output directory (overrides WPME_OUT and the config)")
    common.add_argument("--seed", type=int, default=SEED_DEFAULT,
                        help="seed for randomized trials")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    ap = argparse.ArgumentParser(prog="wpmelab", description=__doc__.splitlines()[0],
                                 parents=[common])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="integrate the configured datum")
    sub.add_parser("profile", parents=[common], help="shoot an elliptic profile")
    sub.add_parser("norms", parents=[common], help="weighted norms of the configured datum")
    exp = sub.add_parser("experiment", parents=[common], help="run a named experiment")
    exp.add_argument("name", choices=sorted(EXPERIMENTS) + ["all"])
    sub.add_parser("calibrate", parents=[common], help="bracket C1 with blow-up sweeps")
    return ap


def _write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_plain(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def cmd_solve(args):
    cfg = load_config(args.config, name="solve", out=args.out)
    prepared = build_datum(cfg)
    bc = build_bc(cfg, prepared)
    horizon_ok(cfg.t_end, bc)
    tr = solve(cfg.params, prepared.u0, cfg.t_end, cfg.solver, bc, r=cfg.norms.r,
               alpha=cfg.norms.alpha)
    out = Path(cfg.out_dir) / "solve"
    out.mkdir(parents=True, exist_ok=True)
    tr.to_json(out / "trajectory.json")
    tr.snapshots_to_csv(out / "snapshots.csv")
    write_csv(out / "traces.csv", {"time": tr.times, **tr.traces})
    ev = tr.blowup
    print(f"solve: {tr.step_times.size} steps, t_final={tr.times[-1]:.6g}"
          + ("" if ev is None else f", blow-up detected, T_fit={ev['T_fit']}"))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_profile(args):
    cfg = load_config(args.config, name="profile", out=args.out)
    if cfg.datum.kind != "profile":
        raise ConfigError("profile needs [datum] kind = profile with beta and T")
    grid = cfg.grid.build(cfg.params)
    prof = shoot_profile(cfg.params, cfg.datum.get("beta"), cfg.datum.get("T"), grid)
    out = Path(cfg.out_dir) / "profile"
    out.mkdir(parents=True, exist_ok=True)
    prof.to_csv(out / "profile.csv")
    _write_json(out / "profile.json", {
        "beta": prof.beta, "T": prof.T, "picard_iters": prof.picard_iters,
        "residual": prof.residual, "asymptotic_slope": prof.asymptotic_slope,
        "expected_slope": prof.expected_slope, "inputs": cfg.echo(),
    })
    print(f"profile: beta={prof.beta:g} T={prof.T:g} iterations={prof.picard_iters} "
          f"residual={prof.residual:.3g} slope={prof.asymptotic_slope:.5g}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_norms(args):
    cfg = load_config(args.config, name="norms", out=args.out)
    f = build_datum(cfg).u0
    m, r, p = cfg.params.m, cfg.norms.r, cfg.norms.p
    res = {
        "norm_1r": norm_1r(f, m, r).to_dict(),
        "norm_pr": norm_pr(f, m, r, p).to_dict(),
        "norm_inf_r": norm_inf_r(f, m, r).to_dict(),
        "limsup": limsup_rate(f, m).__dict__,
    }
    if f.grid.R_max >= 4 * r and p < math.inf:
        res["cutoff_norm_pr"] = cutoff_norm_pr(f, m, r, p).to_dict()
    if f.grid.R_max >= 6:
        res["ell"] = ell_tail(f, m, tol=cfg.norms.ell_tol).to_dict()
    if cfg.norms.alpha is not None:
        res["phi_alpha"] = norm_phi_alpha(f, cfg.norms.alpha, m, r).__dict__
    out = _write_json(Path(cfg.out_dir) / "norms" / "norms.json",
                      {"inputs": cfg.echo(), "norms": res})
    for key in ("norm_1r", "norm_pr", "norm_inf_r"):
        print(f"{key}: {res[key]['value']:.8g}")
    print(f"wrote {out}")
    return EXIT_OK


def _report_run(name, args, threads):
    cfg = experiment_config(name, args.config, out=args.out)
    rep = run_experiment(name, cfg, seed=args.seed, threads=threads)
    rep.write(cfg.out_dir)
    return rep


def cmd_experiment(args):
    names = sorted(EXPERIMENTS) if args.name == "all" else [args.name]
    if len(names) == 1:
        reps = [_report_run(names[0], args, args.threads)]
    else:
        with ThreadPoolExecutor(max_workers=max(args.threads, 1)) as pool:
            reps = list(pool.map(lambda n: _report_run(n, args, 1), names))
    for rep in reps:
        for line in rep.summary_lines():
            print(line)
    return EXIT_OK if all(r.passed for r in reps) else EXIT_FAIL


def cmd_calibrate(args):
    rep = _report_run("calibrate", args, args.threads)
    for line in rep.summary_lines():
        print(line)
    m = rep.measured
    print(f"C1 upper bound {m['C1_upper']:.6g}; in use {m['C1_in_use']:.6g}")
    return EXIT_OK if rep.passed else EXIT_FAIL


COMMANDS = {"solve": cmd_solve, "profile": cmd_profile, "norms": cmd_norms,
            "experiment": cmd_experiment, "calibrate": cmd_calibrate}


def run_cli(argv=None):
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        with np.errstate(over="ignore"):
            return COMMANDS[args.command](args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
