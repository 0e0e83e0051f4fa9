"""Survivability campaigns: many randomized trials, bucketed by distance traveled."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .ars import derived_seed
from .errors import ConfigError
from .gait import GaitParams
from .randomization import D2Distribution, D2Sample, sample_d2
from .rollout import World, run_batch

SOURCES = ("checkpoint", "open-loop", "zero-policy", "matrix")
PAPER_BUCKETS = (5.0, 90.0)
DESK_BUCKETS = (5.0, 15.0)

# per-trial stream tags
_TRIAL_SAMPLE, _TRIAL_ROLLOUT = 0, 1


@dataclass
class EvalCampaignSpec:
    """``buckets`` are the two edges ``(near, far)``: rows are <= near, between, >= far.

    ``magnitude`` forces every trial's terrain magnitude (0 for flat ground).
    """
    trials: int = 100
    max_steps: int = 10_000
    buckets: tuple = DESK_BUCKETS
    source: str = "zero-policy"
    checkpoint: str = None
    master_seed: int = 0
    magnitude: float = None
    chunk: int = 100

    def __post_init__(self):
        self.buckets = tuple(float(b) for b in self.buckets)
        if self.trials < 1 or self.max_steps < 1 or self.chunk < 1:
            raise ConfigError("trials, max steps and chunk size must be positive")
        if len(self.buckets) != 2 or not 0 < self.buckets[0] < self.buckets[1]:
            raise ConfigError("distance buckets need two increasing positive edges")
        if self.source not in SOURCES:
            raise ConfigError(f"policy source must be one of {SOURCES}, got {self.source!r}")
        if self.source == "checkpoint" and not self.checkpoint:
            raise ConfigError("checkpoint source needs a checkpoint path")


@dataclass
class TrialRecord:
    index: int
    seed: int
    sample: D2Sample
    distance: float
    fell: bool
    steps: int
    status: str
    bucket: int


def bucket_of(distance: float, edges) -> int:
    near, far = edges
    if distance <= near:
        return 0
    return 2 if distance >= far else 1


def bucket_labels(edges) -> list:
    near, far = edges
    return [f"≤ {near:g}m", f"{near:g}m to {far:g}m", f"≥ {far:g}m"]


@dataclass
class CampaignReport:
    edges: tuple
    died: np.ndarray
    lived: np.ndarray
    trials: list = field(default_factory=list)
    source: str = ""
    master_seed: int = 0

    @classmethod
    def from_trials(cls, records, edges, source="", master_seed=0) -> "CampaignReport":
        died, lived = np.zeros(3, dtype=int), np.zeros(3, dtype=int)
        for rec in records:
            (died if rec.fell else lived)[rec.bucket] += 1
        return cls(tuple(edges), died, lived, list(records), source, master_seed)

    @classmethod
    def from_counts(cls, died, lived, edges=PAPER_BUCKETS, source="") -> "CampaignReport":
        """Counts only, e.g. a published table."""
        return cls(tuple(edges), np.asarray(died, dtype=int), np.asarray(lived, dtype=int), [], source)

    @property
    def total(self) -> int:
        return int(self.died.sum() + self.lived.sum())

    @property
    def survived(self) -> int:
        return int(self.lived.sum())

    @property
    def survival_rate(self) -> float:
        return self.survived / self.total if self.total else 0.0

    @property
    def far(self) -> int:
        """Trials of either fate that reached the far bucket."""
        return int(self.died[2] + self.lived[2])

    @property
    def distances(self) -> np.ndarray:
        return np.array([t.distance for t in self.trials])


def campaign_trial(master_seed: int, index: int, dist: D2Distribution, magnitude=None):
    """``(sample, rollout_seed)`` of trial ``index``; the same for every policy source."""
    sample = sample_d2(dist, derived_seed(master_seed, index, _TRIAL_SAMPLE))
    if magnitude is not None:
        sample = D2Sample(sample.base_mass, sample.link_masses, sample.friction, float(magnitude),
                          sample.terrain_seed)
    return sample, derived_seed(master_seed, index, _TRIAL_ROLLOUT)


def run_eval_campaign(spec: EvalCampaignSpec, dist: D2Distribution = None, world: World = None,
                      theta=None, open_loop: GaitParams = None, progress=None) -> CampaignReport:
    """Run ``spec.trials`` trials in chunks; the report does not depend on ``spec.chunk``.

    ``theta`` supplies the matrix for the ``matrix`` source; ``checkpoint``
    loads it from ``spec.checkpoint``.
    """
    from .io import load_checkpoint

    dist = dist or D2Distribution()
    world = world or World()
    if spec.source == "checkpoint":
        theta = load_checkpoint(spec.checkpoint)
    elif spec.source == "matrix":
        if theta is None:
            raise ConfigError("matrix source needs a policy matrix")
    elif spec.source == "zero-policy":
        theta = None
    gait = None
    if spec.source == "open-loop":
        theta, gait = None, open_loop or GaitParams()

    records = []
    for start in range(0, spec.trials, spec.chunk):
        index = range(start, min(start + spec.chunk, spec.trials))
        trials = [campaign_trial(spec.master_seed, i, dist, spec.magnitude) for i in index]
        results = run_batch(world, theta, [t[0] for t in trials], [t[1] for t in trials],
                            spec.max_steps, open_loop=gait)
        for i, (sample, seed), res in zip(index, trials, results):
            records.append(TrialRecord(i, seed, sample, res.distance, res.fell, res.steps, res.status,
                                       bucket_of(res.distance, spec.buckets)))
        if progress is not None:
            progress(len(records), spec.trials)
    return CampaignReport.from_trials(records, spec.buckets, spec.source, spec.master_seed)


def bucket_report(reports, names=None):
    """Died/lived table as ``(text, csv)``; ``reports`` is one report or a list shown side by side."""
    if isinstance(reports, CampaignReport):
        reports = [reports]
    reports = list(reports)
    edges = reports[0].edges
    if any(tuple(r.edges) != tuple(edges) for r in reports):
        raise ValueError("reports must share bucket edges")
    names = list(names) if names is not None else [r.source or f"policy {i}" for i, r in enumerate(reports)]
    labels = bucket_labels(edges)

    header = ["Distance"]
    for name in names:
        header += [f"{name} # Died", f"{name} # Lived"]
    rows = [[label] + [str(int(c)) for r in reports for c in (r.died[k], r.lived[k])]
            for k, label in enumerate(labels)]

    widths = [max(len(row[j]) for row in [header] + rows) for j in range(len(header))]
    lines = ["  ".join(cell.ljust(w) if j == 0 else cell.rjust(w) for j, (cell, w) in enumerate(zip(row, widths)))
             for row in [header] + rows]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return "\n".join(lines) + "\n", buf.getvalue()


def trials_csv(report: CampaignReport) -> str:
    """One row per trial: index, seed, fate, distance and the D² sample."""
    buf = io.StringIO()
    if not report.trials:
        return ""
    first = report.trials[0].sample.as_row()
    fields = ["trial", "seed", "status", "fell", "steps", "distance", "bucket"] + list(first)
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for t in report.trials:
        row = dict(trial=t.index, seed=t.seed, status=t.status, fell=int(t.fell), steps=t.steps,
                   distance=repr(t.distance), bucket=t.bucket)
        row.update({k: repr(v) if isinstance(v, float) else v for k, v in t.sample.as_row().items()})
        writer.writerow(row)
    return buf.getvalue()
