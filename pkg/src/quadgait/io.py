"""Plain-text artifacts: policy checkpoints, training logs and trajectory logs."""
from __future__ import annotations

import csv

import numpy as np

from .errors import FormatError
from .gait import (LEGS, GaitParams, MotionCommand, PhaseClock, StanceGeometry, YawMemory,
                   compose_foot_targets)
from .policy import ACT_DIM, OBS_DIM

CHECKPOINT_VERSION = 1
TRAJECTORY_VERSION = 1
AXES = "xyz"


def save_checkpoint(theta, path, comment: str = None) -> None:
    """``rows cols version`` on the first line, then one row per line, full precision."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (OBS_DIM, ACT_DIM):
        raise ValueError(f"policy matrix must be {OBS_DIM}x{ACT_DIM}, got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("refusing to save a non-finite policy matrix")
    with open(path, "w") as fh:
        fh.write(f"{OBS_DIM} {ACT_DIM} {CHECKPOINT_VERSION}\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        np.savetxt(fh, theta, fmt="%.17g")


def load_checkpoint(path) -> np.ndarray:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise FormatError(f"{path}: empty checkpoint")
    try:
        rows, cols, version = (int(v) for v in lines[0].split())
    except ValueError:
        raise FormatError(f"{path}: bad checkpoint header {lines[0]!r}") from None
    if (rows, cols) != (OBS_DIM, ACT_DIM) or version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: expected a {OBS_DIM}x{ACT_DIM} version {CHECKPOINT_VERSION} checkpoint")
    try:
        values = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if values.shape != (rows, cols):
        raise FormatError(f"{path}: expected {rows} rows of {cols} values")
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: non-finite entries")
    return values


def write_training_log(log, path) -> None:
    """One CSV row per epoch, with the training and evaluation samples."""
    header = ["epoch", "evaluated_return", "eval_distance", "eval_fell", "mean_return", "wall_time"]
    sample_keys = None
    with open(path, "w", newline="") as fh:
        fh.write(f"# mode {log.mode}\n# master_seed {log.master_seed}\n# initial_return {log.initial_return!r}\n")
        writer = csv.writer(fh, lineterminator="\n")
        for rec in log.epochs:
            row = rec.sample.as_row()
            if sample_keys is None:
                sample_keys = list(row)
                writer.writerow(header + sample_keys + [f"eval_{k}" for k in sample_keys])
            writer.writerow([rec.epoch, repr(rec.evaluated_return), repr(rec.eval_distance), int(rec.eval_fell),
                             repr(rec.mean_return), f"{rec.wall_time:.3f}"]
                            + [repr(v) for v in row.values()] + [repr(v) for v in rec.eval_sample.as_row().values()])
        if sample_keys is None:
            writer.writerow(header)


def read_training_log(path):
    """``(metadata, rows)``; numeric fields converted to float."""
    meta, body = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(" ")
                meta[key] = value
            else:
                body.append(line)
    rows = [{k: float(v) for k, v in row.items()} for row in csv.DictReader(body)]
    return meta, rows


def trajectory_columns() -> list:
    cols = ["step", "time"] + [f"phase_{leg}" for leg in LEGS]
    cols += [f"target_{leg}_{a}" for leg in LEGS for a in AXES]
    cols += [f"residual_{leg}_{a}" for leg in LEGS for a in AXES]
    return cols + ["psi", "delta", "omega_bar", "roll", "pitch", "reward"]


def export_trajectory_log(rollout, path, stance: StanceGeometry) -> None:
    """Per-step CSV of a recorded rollout; ``#`` lines carry what replay needs.

    ``rollout`` is a :class:`~quadgait.rollout.RolloutResult` (or its
    trajectory); targets are the generator output before residuals.
    """
    traj = getattr(rollout, "trajectory", rollout)
    if traj is None:
        raise ValueError("rollout was not recorded; run it with record=True")
    cmd = traj.command or MotionCommand(0.0, 0.0)
    n = len(traj)
    with open(path, "w", newline="") as fh:
        fh.write(f"# quadgait-trajectory {TRAJECTORY_VERSION}\n")
        fh.write(f"# seed {traj.seed}\n")
        fh.write(f"# command {float(cmd.rho)!r} {float(cmd.l_span)!r}\n")
        fh.write(f"# timing {traj.t_swing!r} {traj.t_stance!r}\n")
        fh.write("# f_stand " + " ".join(repr(float(v)) for v in stance.f_stand.ravel()) + "\n")
        fh.write("# phi_stand " + " ".join(repr(float(v)) for v in stance.phi_stand) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trajectory_columns())
        for k in range(n):
            row = [k, repr(float(traj.time[k]))]
            row += [repr(float(v)) for v in traj.phases[k]]
            row += [repr(float(v)) for v in np.asarray(traj.targets[k]).ravel()]
            row += [repr(float(v)) for v in traj.residuals[k]]
            row += [repr(float(getattr(traj, key)[k])) for key in ("psi", "delta", "omega_bar", "roll", "pitch", "reward")]
            writer.writerow(row)


def read_trajectory_log(path):
    """``(metadata, columns)`` with every column a float array."""
    meta, body = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(" ")
                meta[key] = value.split()
            else:
                body.append(line)
    reader = csv.reader(body)
    header = next(reader, None)
    if header != trajectory_columns():
        raise FormatError(f"{path}: unexpected trajectory columns")
    data = np.array([[float(v) for v in row] for row in reader]).reshape(-1, len(header))
    return meta, {name: data[:, j] for j, name in enumerate(header)}


def replay_trajectory(path):
    """Recompute the generator targets from a trajectory log.

    Returns ``(logged, replayed)``, both ``(steps, 4, 3)``.
    """
    meta, cols = read_trajectory_log(path)
    missing = {"command", "timing", "f_stand", "phi_stand"} - set(meta)
    if missing:
        raise FormatError(f"{path}: trajectory log lacks {', '.join(sorted(missing))}")
    rho, l_span = (float(v) for v in meta["command"])
    t_swing, t_stance = (float(v) for v in meta["timing"])
    stance = StanceGeometry(np.array([float(v) for v in meta["f_stand"]]).reshape(4, 3),
                            np.array([float(v) for v in meta["phi_stand"]]))
    clock = PhaseClock(t_swing=t_swing, t_stance=t_stance)
    memory = YawMemory.initial(stance)
    n = len(cols["step"])
    phases = np.stack([cols[f"phase_{leg}"] for leg in LEGS], axis=-1)
    logged = np.stack([cols[f"target_{leg}_{a}"] for leg in LEGS for a in AXES], axis=-1).reshape(n, 4, 3)
    replayed = np.empty_like(logged)
    for k in range(n):
        cmd = MotionCommand(rho, cols["omega_bar"][k], l_span)
        params = GaitParams(cols["psi"][k], cols["delta"][k])
        replayed[k] = compose_foot_targets(cmd, params, clock, stance, memory, phases=phases[k]).positions
    return logged, replayed
