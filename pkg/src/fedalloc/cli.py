"""Command-line entry point: ``fedalloc {run,bound,fl}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bound, csvio, experiment, flsim, kernels
from .errors import FedAllocError

log = logging.getLogger("fedalloc")

EXIT_CODES = """exit codes:
  0  success
  2  configuration error
  3  round bound undefined (negative discriminant, zero compressor loss, no feasible kse)
  4  allocation error (too few sub-channels, infeasible assignment, no convergence)
  5  radio error (zero-rate link)
  6  empty participant set
  7  output file could not be written
"""


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="scenario TOML file (defaults built in)")
    p.add_argument("--seed", type=int, help="master seed (default 2024)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default ./out)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedalloc",
        description="Round bound, participant count and sub-channel allocation for "
                    "compression-aided federated learning over an OFDMA uplink.",
        epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="pipeline or sweep; writes rounds.csv and summary.csv",
                         epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(run)
    run.add_argument("--trials", type=int, help="independent trials (default 1000)")
    run.add_argument("--sweep", choices=experiment.SWEEP_AXES,
                     help="sweep axis (default from config: none)")
    run.add_argument("--values", type=int, nargs="+", help="sweep points")
    run.add_argument("--method", action="append",
                     choices=["coalition", "fairness", "exhaustive"],
                     help="allocation method; repeat to compare (default coalition, "
                          "sweeps default to coalition and fairness)")
    run.add_argument("--workers", type=int, help="parallel trial workers (default 1)")
    run.add_argument("--assignments", action="store_true",
                     help="also write assignments.csv (one row per sub-channel)")

    b = sub.add_parser("bound", help="round bound per participant count; writes bound.csv")
    _common(b)

    fl = sub.add_parser("fl", help="toy FL runs under distortion; writes trajectory.csv")
    _common(fl)
    fl.add_argument("--kse", type=int, nargs="+", help="participant counts (default 5..100)")
    fl.add_argument("--seeds", type=int, help="runs per participant count (default 20)")
    fl.add_argument("--rounds", type=int, help="rounds per run (default 500)")
    return parser


def _load(args) -> experiment.ExperimentConfig:
    cfg = experiment.load_config(args.config) if args.config else experiment.ExperimentConfig()
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        over["trials"] = args.trials
    if getattr(args, "workers", None) is not None:
        over["workers"] = args.workers
    if getattr(args, "sweep", None) is not None:
        over["sweep.axis"] = args.sweep
    if getattr(args, "values", None):
        over["sweep.values"] = tuple(args.values)
    if getattr(args, "method", None) and len(args.method) == 1:
        over["allocation.method"] = args.method[0]
    return cfg.replace(**over) if over else cfg


def cmd_run(args, cfg) -> None:
    out = args.out
    if cfg.sweep.axis == "none":
        summaries, reports, (kse, rounds) = experiment.run_pipeline(
            cfg, args.method, keep_assignments=args.assignments)
        log.info("kse=%d rounds=%d", kse, rounds)
    else:
        fn = experiment.sweep_subchannels if cfg.sweep.axis == "subchannels" else experiment.sweep_kse
        summaries, reports = fn(cfg, methods=args.method, keep_assignments=args.assignments)
    csvio.emit_csv("rounds", [r.row() for r in reports], out / "rounds.csv")
    csvio.emit_csv("summary", [s.row() for s in summaries], out / "summary.csv")
    if args.assignments:
        rows = [(r.point, r.trial, r.method) + row
                for r in reports for row in r.assignment.rows(r.round)]
        csvio.emit_csv("assignments", rows, out / "assignments.csv")
    for s in summaries:
        where = "pipeline" if s.axis == "none" else f"{s.axis}={s.value}"
        print(f"{where} method={s.method} kse={s.kse} S={s.subchannels} "
              f"rounds={s.rounds} mean_total_s={s.mean_total_s:.6g} std={s.std_total_s:.3g}")


def cmd_bound(args, cfg) -> None:
    params = cfg.bound.params(cfg.radio.K)
    rows = []
    for k in range(1, params.K + 1):
        t = bound.bound_terms(params, k)
        try:
            r = bound.r_min(params, k)
        except FedAllocError:
            r = None
        rows.append((k, r, t.u1, t.u2, t.u3))
    csvio.emit_csv("bound", rows, args.out / "bound.csv")
    kse, r = bound.optimal_kse(params)
    print(f"kse_opt={kse} r_min={r}")


def cmd_fl(args, cfg) -> None:
    fc = cfg.fl
    seeds = args.seeds or fc.seeds
    kses = args.kse or fc.kse_values
    rounds = args.rounds or fc.rounds
    task = flsim.make_task(fc.K, fc.d, fc.task_seed, fc.offset, fc.noise_scale)
    traj_rows, summary_rows = [], []
    for kse in kses:
        trs = []
        for s in range(seeds):
            rc = flsim.FlRunConfig(K=fc.K, kse=kse, E=fc.E, rounds=rounds, seed=cfg.seed + s,
                                   compressor_loss=fc.compressor_loss, lr=fc.lr,
                                   threshold=fc.threshold)
            tr = flsim.run_fl(rc, task)
            trs.append(tr)
            traj_rows.extend((kse, cfg.seed + s) + row for row in tr.rows())
        hits = [flsim.rounds_to_accuracy(t, fc.threshold) for t in trs]
        reached = [h for h in hits if h is not None]
        med = float(np.median([np.inf if h is None else h for h in hits]))
        final = float(np.median([t.distance[-1] for t in trs]))
        summary_rows.append((kse, seeds, None if np.isinf(med) else med, len(reached), final))
        print(f"kse={kse} median_rounds_to_accuracy={'not reached' if np.isinf(med) else med} "
              f"reached={len(reached)}/{seeds} median_final_distance={final:.4g}")
    csvio.emit_csv("trajectory", traj_rows, args.out / "trajectory.csv")
    csvio.emit_csv("fl_summary", summary_rows, args.out / "fl_summary.csv")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    log.info("coalition kernel backend: %s", kernels.BACKEND)
    try:
        cfg = _load(args)
        args.out.mkdir(parents=True, exist_ok=True)
        {"run": cmd_run, "bound": cmd_bound, "fl": cmd_fl}[args.command](args, cfg)
    except FedAllocError as e:
        print(f"fedalloc: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"fedalloc: {e}", file=sys.stderr)
        return 7
    return 0


if __name__ == "__main__":
    sys.exit(main())
