"""Command-line interface.

Subcommands: ``simulate``, ``make-data``, ``optimize``, ``w2``,
``check-gradient``, ``convergence-study``, ``plot``.  Every subcommand
accepts ``--config FILE`` plus repeatable ``--set key=value`` overrides;
``--preset`` selects a shipped configuration (desk-p1 .. full-p3,
gradcheck).
"""

from __future__ import annotations

import argparse
import math
import os
import sys


from . import transport
from .config import PRESETS, ExperimentConfig, apply_overrides, parse_keyvalue
from .dynamics import export_positions_csv, read_positions_csv, simulate
from .harness import (convergence_study, export_convergence_csv,
                      generate_artificial_data, run_experiment,
                      sample_uniform_positions, validate_gradient)
from .params import Control


def build_parser():
    parser = argparse.ArgumentParser(
        prog="patternfit",
        description="Identify interaction-control parameters reproducing a particle pattern.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--preset", choices=sorted(PRESETS),
                       help="start from a shipped configuration")
        p.add_argument("--set", action="append", default=[], metavar="key=value",
                       help="override a single config key (repeatable)")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed-data", type=int, help="seed of the data sample")
        p.add_argument("--seed-init", type=int, help="seed of the optimization sample")

    p = sub.add_parser("simulate", help="run the forward dynamics and export the trajectory")
    add_common(p)
    p.add_argument("--theta", type=float, help="control angle in radians (default: theta0)")
    p.add_argument("--eta", type=float, help="force scaling (default: eta0)")

    p = sub.add_parser("make-data", help="generate the artificial desired pattern")
    add_common(p)

    p = sub.add_parser("optimize", help="run one identification experiment")
    add_common(p)
    p.add_argument("--quiet", action="store_true", help="suppress per-iteration output")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("w2", help="squared Wasserstein-2 distance between two position files")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--plan-out", help="write the assignment as CSV (i,sigma_i,cost_i)")

    p = sub.add_parser("check-gradient", help="finite-difference validation of the gradient")
    add_common(p)
    p.add_argument("--controls", type=int, default=10, help="number of sampled controls")
    p.add_argument("--fd-step", type=float, default=1e-5)

    p = sub.add_parser("convergence-study", help="identification error versus particle count")
    add_common(p)
    p.add_argument("--n-list", default="50,100,200",
                   help="comma-separated particle counts (ascending)")
    p.add_argument("--n-seeds", type=int, default=5)

    p = sub.add_parser("plot", help="re-render figures from an output directory")
    p.add_argument("--out", required=True, help="directory holding the experiment CSVs")
    return parser


def load_config(args) -> ExperimentConfig:
    if getattr(args, "preset", None):
        cfg = PRESETS[args.preset]()
    else:
        cfg = ExperimentConfig()
    if getattr(args, "config", None):
        with open(args.config) as fh:
            apply_overrides(cfg, parse_keyvalue(fh.read()))
    overrides = {}
    for item in getattr(args, "set", []):
        if "=" not in item:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    apply_overrides(cfg, overrides)
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    if getattr(args, "seed_data", None) is not None:
        cfg.seed_data = args.seed_data
    if getattr(args, "seed_init", None) is not None:
        cfg.seed_init = args.seed_init
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "simulate":
        cfg = load_config(args)
        theta = cfg.theta0 if args.theta is None else args.theta
        eta = cfg.eta0 if args.eta is None else args.eta
        initial = sample_uniform_positions(cfg.seed_init, cfg.n_particles)
        traj = simulate(initial, Control(theta, eta), cfg.force_params(), cfg.dt, cfg.steps)
        os.makedirs(cfg.output_dir, exist_ok=True)
        path = os.path.join(cfg.output_dir, "trajectory.csv")
        export_positions_csv(path, traj, stride=cfg.export_stride)
        print(f"wrote {path} ({traj.n_steps} steps, N={traj.n_particles})")

    elif args.command == "make-data":
        cfg = load_config(args)
        state = generate_artificial_data(cfg.seed_data, cfg.theta_data, cfg.eta_data, cfg)
        os.makedirs(cfg.output_dir, exist_ok=True)
        path = os.path.join(cfg.output_dir, "positions_desired.csv")
        with open(path, "w") as fh:
            fh.write("step,time,particle_id,x,y\n")
            t = cfg.steps * cfg.dt
            for i, (x, y) in enumerate(state.positions):
                fh.write(f"{cfg.steps},{float(t)!r},{i},{float(x)!r},{float(y)!r}\n")
        print(f"wrote {path}")

    elif args.command == "optimize":
        cfg = load_config(args)
        report = run_experiment(cfg, verbose=not args.quiet,
                                make_plots=not args.no_plots)
        res = report.result
        print(f"theta_opt = {res.control.theta / math.pi:+.4f}*pi  "
              f"(mod pi: {res.control.theta % math.pi / math.pi:.4f}*pi)")
        print(f"eta_opt   = {res.control.eta:.5f}")
        print(f"iterations = {res.iterations}  converged = {res.converged} "
              f"({res.stop_reason})")
        print(f"outputs in {cfg.output_dir}")

    elif args.command == "w2":
        source = read_positions_csv(args.source)
        target = read_positions_csv(args.target)
        plan = transport.transport_plan(source, target)
        print(f"w2_squared = {plan.w2_squared!r}")
        if args.plan_out:
            cost = transport.ground_cost(source, target)
            with open(args.plan_out, "w") as fh:
                fh.write("i,sigma_i,cost_i\n")
                for i, j in enumerate(plan.assignment):
                    fh.write(f"{i},{j},{float(cost[i, j])!r}\n")
            print(f"wrote {args.plan_out}")

    elif args.command == "check-gradient":
        cfg = load_config(args)
        records = validate_gradient(cfg, n_controls=args.controls, fd_step=args.fd_step)
        worst = 0.0
        for rec in records:
            worst = max(worst, *rec["rel_err"])
            print(f"theta={rec['theta']:.4f} eta={rec['eta']:.4f}  "
                  f"adj=({rec['grad_adjoint'][0]:+.6e}, {rec['grad_adjoint'][1]:+.6e})  "
                  f"rel_err=({rec['rel_err'][0]:.2e}, {rec['rel_err'][1]:.2e})")
        print(f"worst relative error: {worst:.3e}")

    elif args.command == "convergence-study":
        cfg = load_config(args)
        n_list = [int(tok) for tok in args.n_list.split(",") if tok]
        if n_list != sorted(n_list):
            raise SystemExit("--n-list must be ascending")
        study = convergence_study(cfg, n_list, n_seeds=args.n_seeds, verbose=True)
        os.makedirs(cfg.output_dir, exist_ok=True)
        path = os.path.join(cfg.output_dir, "convergence_study.csv")
        export_convergence_csv(path, study)
        for n in n_list:
            print(f"N={n:5d}  median |u - u_data|_1 = {study['median_err_l1'][n]:.5f}")
        print(f"wrote {path}")

    elif args.command == "plot":
        from .plots import emit_plots
        files = emit_plots(args.out)
        for name, path in files.items():
            print(f"wrote {path}")

    return 0


if __name__ == "__main__":
    sys.exit(main())
