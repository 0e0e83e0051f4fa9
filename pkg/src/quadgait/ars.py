"""Augmented random search over the linear gait-modulation policy.

Each epoch perturbs the policy along ``directions`` Gaussian directions,
scores both signs of every direction on one environment sample and steps
along the return-weighted average direction, scaled by the spread of the
returns (the basic ARS update, without elite selection or observation
normalization).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SimulationDiverged
from .policy import zero_policy
from .randomization import D2Distribution, D2Sample, nominal_sample, sample_d2
from .rollout import World, run_batch

MODES = ("randomized", "fixed")


@dataclass
class ARSConfig:
    directions: int = 8
    step_size: float = 0.03
    noise: float = 0.05
    episode_steps: int = 5000
    discount: float = 1.0
    std_floor: float = 1e-6

    def __post_init__(self):
        if self.directions < 1:
            raise ConfigError("ARS needs at least one direction")
        if self.step_size <= 0 or self.noise <= 0:
            raise ConfigError("ARS step size and noise must be positive")
        if self.episode_steps < 1:
            raise ConfigError("episode length must be at least one step")
        if not 0 < self.discount <= 1:
            raise ConfigError("discount must lie in (0, 1]")

    @property
    def rollouts(self) -> int:
        return 2 * self.directions


def ars_update(theta, r_plus, r_minus, deltas, cfg: ARSConfig = None):
    """``theta + step / (N sigma_R) * sum_i (r+_i - r-_i) delta_i``.

    ``sigma_R`` is the standard deviation of all ``2N`` returns, floored
    at ``cfg.std_floor``.
    """
    cfg = cfg or ARSConfig()
    r_plus = np.asarray(r_plus, dtype=float)
    r_minus = np.asarray(r_minus, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    n = len(deltas)
    if r_plus.shape != (n,) or r_minus.shape != (n,):
        raise ValueError(f"need {n} return pairs, got {r_plus.shape} and {r_minus.shape}")
    sigma = max(float(np.std(np.concatenate([r_plus, r_minus]))), cfg.std_floor)
    step = np.tensordot(r_plus - r_minus, deltas, axes=1)
    return np.asarray(theta, dtype=float) + cfg.step_size / (n * sigma) * step


def derived_seed(*key) -> int:
    """Stable 32-bit seed from integers, e.g. ``(master, epoch, index)``."""
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


# stream tags inside one epoch
_SAMPLE, _EVAL_SAMPLE, _DIRECTIONS, _ROLLOUT = 0, 1, 2, 3


@dataclass
class EpochRecord:
    epoch: int
    sample: D2Sample
    eval_sample: D2Sample
    evaluated_return: float = float("nan")
    eval_distance: float = float("nan")
    eval_fell: bool = False
    mean_return: float = float("nan")
    wall_time: float = 0.0


@dataclass
class TrainingLog:
    """``initial_return`` scores the starting policy; ``epochs[e]`` the policy after ``e + 1`` updates."""
    mode: str
    master_seed: int
    initial_return: float = float("nan")
    epochs: list = field(default_factory=list)

    def __len__(self):
        return len(self.epochs)

    @property
    def evaluated_returns(self) -> np.ndarray:
        return np.array([e.evaluated_return for e in self.epochs])


class ARSTrainer:
    """One training run, driven an epoch at a time.

    ``jobs()`` lists the rollouts the next epoch needs: the ``2N``
    perturbations of the current policy plus one evaluation of the current
    policy (which scores the previous epoch's update). ``finish(results)``
    consumes their results in the same order. Several trainers can
    therefore share one lockstep batch, see :func:`train_lockstep`.
    """

    def __init__(self, cfg: ARSConfig, dist: D2Distribution, mode: str = "randomized",
                 master_seed: int = 0, world: World = None, theta0=None, fixed_magnitude=None):
        if mode not in MODES:
            raise ConfigError(f"training mode must be one of {MODES}, got {mode!r}")
        self.cfg, self.dist, self.mode, self.master_seed = cfg, dist, mode, int(master_seed)
        self.world = world or World()
        self.fixed_magnitude = fixed_magnitude
        self.theta = zero_policy() if theta0 is None else np.array(theta0, dtype=float)
        self.epoch = 0
        self.log = TrainingLog(mode, self.master_seed)
        self._clock = time.perf_counter()
        self._pending = None

    def _sample(self, tag: int, epoch: int) -> D2Sample:
        if self.mode == "fixed":
            return nominal_sample(self.dist, self.fixed_magnitude)
        return sample_d2(self.dist, derived_seed(self.master_seed, epoch, tag))

    def training_sample(self, epoch: int) -> D2Sample:
        """The environment the perturbations of ``epoch`` (1-based) are scored on."""
        return self._sample(_SAMPLE, epoch)

    def jobs(self, final: bool = False):
        """``(thetas, samples, seeds)`` for the next epoch; ``final`` asks only for the evaluation."""
        e = self.epoch + 1
        eval_sample = self._sample(_EVAL_SAMPLE, e)
        eval_seed = derived_seed(self.master_seed, e, _EVAL_SAMPLE, 0)
        if final:
            self._pending = (None, None, eval_sample)
            return [self.theta], [eval_sample], [eval_seed]
        n, nu = self.cfg.directions, self.cfg.noise
        rng = np.random.default_rng(derived_seed(self.master_seed, e, _DIRECTIONS))
        deltas = rng.standard_normal((n,) + self.theta.shape)
        sample = self._sample(_SAMPLE, e)
        thetas = [self.theta + nu * d for d in deltas] + [self.theta - nu * d for d in deltas] + [self.theta]
        seeds = [derived_seed(self.master_seed, e, _ROLLOUT, i) for i in range(n)]
        self._pending = (deltas, sample, eval_sample)
        # a direction's two signs share a start so only the policy differs
        return thetas, [sample] * (2 * n) + [eval_sample], seeds + seeds + [eval_seed]

    def finish(self, results) -> None:
        deltas, sample, eval_sample = self._pending
        self._pending = None
        evaluation = results[-1]
        if self.log.epochs:
            rec = self.log.epochs[-1]
            rec.evaluated_return = evaluation.normalized_return
            rec.eval_distance = evaluation.distance
            rec.eval_fell = evaluation.fell
        else:
            self.log.initial_return = evaluation.normalized_return
        if deltas is None:
            return
        n = len(deltas)
        returns = np.array([r.normalized_return for r in results[:2 * n]])
        self.theta = ars_update(self.theta, returns[:n], returns[n:], deltas, self.cfg)
        if not np.all(np.isfinite(self.theta)):
            raise SimulationDiverged("policy update produced non-finite parameters")
        self.epoch += 1
        now = time.perf_counter()
        self.log.epochs.append(EpochRecord(self.epoch, sample, eval_sample, mean_return=float(returns.mean()),
                                           wall_time=now - self._clock))


def train_lockstep(trainers, epochs: int, progress=None):
    """Run ``epochs`` epochs of every trainer, pooling each epoch's rollouts into one batch.

    Rollouts use the first trainer's :class:`World`; all trainers must
    share an episode length. Each trainer's result is identical to
    training it alone.
    """
    trainers = list(trainers)
    if not trainers or epochs <= 0:
        return trainers
    world = trainers[0].world
    steps = trainers[0].cfg.episode_steps
    if any(t.cfg.episode_steps != steps for t in trainers):
        raise ValueError("lockstep trainers must share an episode length")
    for e in range(epochs + 1):
        final = e == epochs
        batches = [t.jobs(final=final) for t in trainers]
        thetas = [th for b in batches for th in b[0]]
        samples = [s for b in batches for s in b[1]]
        seeds = [sd for b in batches for sd in b[2]]
        results = run_batch(world, np.stack(thetas), samples, seeds, steps)
        start = 0
        for t, b in zip(trainers, batches):
            t.finish(results[start:start + len(b[1])])
            start += len(b[1])
        if progress is not None and not final:
            progress(e + 1, trainers)
    return trainers


def train_d2gmbc(cfg: ARSConfig, dist: D2Distribution, mode: str = "randomized", epochs: int = 100,
                 master_seed: int = 0, world: World = None, theta0=None, fixed_magnitude=None,
                 progress=None):
    """Train one policy; returns ``(theta, log)``.

    ``mode="fixed"`` trains on the nominal environment every epoch
    (``fixed_magnitude`` overrides its terrain magnitude, e.g. 0 for flat).
    """
    trainer = ARSTrainer(cfg, dist, mode, master_seed, world, theta0, fixed_magnitude)
    if epochs > 0:
        train_lockstep([trainer], epochs, progress)
    return trainer.theta, trainer.log
