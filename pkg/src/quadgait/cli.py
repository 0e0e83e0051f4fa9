"""Command-line entry points: ``python -m quadgait <command>``."""
from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .ars import ARSTrainer, train_lockstep
from .campaign import PAPER_BUCKETS, EvalCampaignSpec, bucket_report, campaign_trial, run_eval_campaign, trials_csv
from .config import dump_config, load_config, with_seed
from .errors import ConfigError, FormatError, SimulationDiverged
from .gait import GaitParams, trajectory
from .io import export_trajectory_log, load_checkpoint, replay_trajectory, save_checkpoint, write_training_log
from .kinematics import default_stand_pose
from .rollout import run_batch

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO, EXIT_DIVERGED = 0, 1, 2, 3, 4
TRAIN_MODES = {"d2": "randomized", "fixed": "fixed"}
REPLAY_TOL = 1e-9


def _out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _config(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    return cfg


def cmd_train(args):
    cfg = _config(args)
    mode = TRAIN_MODES[args.mode] if args.mode else cfg.mode
    epochs = cfg.epochs if args.epochs is None else args.epochs
    ars = cfg.ars if args.steps is None else replace(cfg.ars, episode_steps=args.steps)
    out = _out_dir(args.out)
    trainer = ARSTrainer(ars, cfg.dist, mode, cfg.seed, cfg.world)
    start = time.perf_counter()

    def progress(epoch, trainers):
        if epoch % args.report_every == 0 or epoch == epochs:
            rec = trainers[0].log.epochs[-1]
            print(f"epoch {epoch:4d}  mean perturbed return {rec.mean_return:+.4f}  "
                  f"{time.perf_counter() - start:7.1f} s", flush=True)

    train_lockstep([trainer], epochs, progress)
    log = trainer.log
    ckpt = os.path.join(out, "policy.txt")
    save_checkpoint(trainer.theta, ckpt, comment=f"mode {mode} seed {cfg.seed} epochs {epochs}")
    write_training_log(log, os.path.join(out, "training_log.csv"))
    _write(os.path.join(out, "config.ini"), dump_config(cfg))
    final = log.evaluated_returns[-1] if len(log) else log.initial_return
    print(f"seed {cfg.seed}: evaluated return {log.initial_return:+.4f} -> {final:+.4f}")
    print(f"wrote {ckpt}")
    return EXIT_OK


def _campaign_spec(args, cfg):
    spec = cfg.campaign
    if args.paper_scale:
        spec = replace(spec, trials=1000, max_steps=50_000, buckets=PAPER_BUCKETS)
    if args.checkpoint:
        source, checkpoint = "checkpoint", args.checkpoint
    elif args.mode == "openloop":
        source, checkpoint = "open-loop", None
    else:
        source, checkpoint = "zero-policy", None
    return replace(spec, source=source, checkpoint=checkpoint,
                   trials=args.trials or spec.trials, max_steps=args.steps or spec.max_steps,
                   magnitude=spec.magnitude if args.magnitude is None else args.magnitude)


def cmd_eval(args):
    cfg = _config(args)
    spec = _campaign_spec(args, cfg)
    if spec.source == "checkpoint":
        load_checkpoint(spec.checkpoint)  # fail before any work
    out = _out_dir(args.out)

    def progress(done, total):
        print(f"{done}/{total} trials", flush=True)

    report = run_eval_campaign(spec, cfg.dist, cfg.world, progress=progress)
    text, table = bucket_report(report, [spec.source])
    header = f"# source {spec.source} master_seed {spec.master_seed} trials {spec.trials} max_steps {spec.max_steps}\n"
    _write(os.path.join(out, "report.txt"), header + text)
    _write(os.path.join(out, "report.csv"), header + table)
    _write(os.path.join(out, "trials.csv"), header + trials_csv(report))
    print(text, end="")
    print(f"survived {report.survived}/{report.total}, master seed {spec.master_seed}")
    return EXIT_OK


def cmd_replay(args):
    cfg = _config(args)
    path = args.log
    if path is None:
        out = _out_dir(args.out)
        theta = load_checkpoint(args.checkpoint) if args.checkpoint else None
        sample, seed = campaign_trial(cfg.seed, args.trial, cfg.dist, cfg.campaign.magnitude)
        steps = args.steps or cfg.ars.episode_steps
        gait = GaitParams() if args.mode == "openloop" else None
        result = run_batch(cfg.world, theta, [sample], [seed], steps, record=True, open_loop=gait)[0]
        path = os.path.join(out, "trajectory.csv")
        export_trajectory_log(result, path, default_stand_pose(cfg.world.model.geometry))
        print(f"trial {args.trial} (seed {cfg.seed}): {result.status} after {result.steps} steps, "
              f"{result.distance:.3f} m; wrote {path}")
    logged, replayed = replay_trajectory(path)
    err = float(np.max(np.abs(logged - replayed))) if logged.size else 0.0
    print(f"replayed {len(logged)} steps, max target deviation {err:.3e} m")
    return EXIT_OK if err < REPLAY_TOL else EXIT_FAIL


def cmd_export_gait(args):
    s = np.linspace(0.0, 2.0, args.points, endpoint=False)  # phase 2 wraps to 0
    x, z = trajectory(s, args.l_span, args.psi, args.delta)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["phase", "x", "z"])
        writer.writerows([repr(float(a)), repr(float(b)), repr(float(c))] for a, b, c in zip(s, x, z))
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_print_config(args):
    print(dump_config(_config(args)), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quadgait", description="Bezier trot, gait-modulation policies and D² training.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="configuration file (defaults if omitted)")
        p.add_argument("--seed", type=int, help="master seed, overrides the config")
        return p

    p = common(sub.add_parser("train", help="train a policy with ARS"))
    p.add_argument("--mode", choices=sorted(TRAIN_MODES), help="d2 = randomized environments, fixed = nominal")
    p.add_argument("--epochs", type=int)
    p.add_argument("--steps", type=int, help="episode length, overrides the config")
    p.add_argument("--out", default="runs/train")
    p.add_argument("--report-every", type=int, default=10)
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("eval", help="survivability campaign on randomized environments"))
    p.add_argument("--checkpoint", help="policy to evaluate")
    p.add_argument("--mode", choices=["openloop", "zero"], default="zero",
                   help="policy when no checkpoint is given")
    p.add_argument("--trials", type=int)
    p.add_argument("--steps", type=int, help="max steps per trial")
    p.add_argument("--magnitude", type=float, help="force every trial's terrain magnitude")
    p.add_argument("--paper-scale", action="store_true", help="1000 trials of 50,000 steps, 5/90 m buckets")
    p.add_argument("--out", default="runs/eval")
    p.set_defaults(func=cmd_eval)

    p = common(sub.add_parser("replay", help="check a trajectory log against the gait generator"))
    p.add_argument("--log", help="existing trajectory log; otherwise one trial is run and logged")
    p.add_argument("--checkpoint")
    p.add_argument("--mode", choices=["openloop", "zero"], default="zero")
    p.add_argument("--trial", type=int, default=0, help="campaign trial index to run")
    p.add_argument("--steps", type=int)
    p.add_argument("--out", default="runs/replay")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("export-gait", help="sample the open-loop foot curve over one stride")
    p.add_argument("--psi", type=float, default=GaitParams().psi)
    p.add_argument("--delta", type=float, default=GaitParams().delta)
    p.add_argument("--l-span", type=float, default=0.035)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.set_defaults(func=cmd_export_gait)

    p = common(sub.add_parser("print-config", help="print the effective configuration"))
    p.set_defaults(func=cmd_print_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationDiverged as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, FormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
