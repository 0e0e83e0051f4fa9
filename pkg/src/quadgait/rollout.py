"""Episode rollouts of the modulated gait, many robots stepped in lockstep.

One control step: observe, run the linear policy, compose the Bezier foot
targets with the policy's gait parameters, add the residuals, pull the
result inside the legs' reach, step the simulator and score the step.
Robots that fall (or diverge, or walk off their terrain) drop out of the
batch; nothing a robot computes depends on which other robots share its
batch, so results are identical however the work is grouped.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .gait import (GaitParams, MotionCommand, PhaseClock, YawMemory, compose_foot_targets,
                   leg_phases)
from .kinematics import clamp_to_reach, default_stand_pose
from .policy import ActionBounds, heading_controller, policy_forward, step_reward, zero_policy
from .randomization import D2Sample, TerrainLayout, apply_d2
from .sim import (FALL_ANGLE, BodyState, MassProperties, RobotModel, SimConfig, _finite,
                  detect_fall, euler_angles, observe, standing_state, step_batch)
from .terrain import TerrainStack

EDGE_MARGIN = 0.6  # m; keep the trunk this far inside its terrain field


@dataclass
class World:
    """Everything about an episode that is not the policy or the D² sample."""
    model: RobotModel = field(default_factory=RobotModel)
    sim: SimConfig = field(default_factory=SimConfig)
    bounds: ActionBounds = field(default_factory=ActionBounds)
    command: MotionCommand = field(default_factory=MotionCommand)
    t_swing: float = 0.15
    t_stance: float = 0.45
    terrain: TerrainLayout = field(default_factory=TerrainLayout)
    max_speed: float = 0.5  # m/s, only used to size terrain fields
    heading_gain: float = 0.2  # yaw (rad) to yaw step (m); 0 disables
    heading_limit: float = 0.02
    fall_angle: float = FALL_ANGLE

    def clock(self) -> PhaseClock:
        return PhaseClock(t_swing=self.t_swing, t_stance=self.t_stance)

    def layout(self, steps: int) -> TerrainLayout:
        return self.terrain.sized_for(steps, self.sim.dt, self.max_speed)


@dataclass
class Trajectory:
    """Per-step record of one rollout. ``targets`` are the generator output before residuals."""
    time: np.ndarray
    phases: np.ndarray
    targets: np.ndarray
    residuals: np.ndarray
    psi: np.ndarray
    delta: np.ndarray
    omega_bar: np.ndarray
    roll: np.ndarray
    pitch: np.ndarray
    reward: np.ndarray
    command: MotionCommand = None
    t_swing: float = 0.15
    t_stance: float = 0.45
    seed: int = 0

    def __len__(self):
        return len(self.time)


@dataclass
class RolloutResult:
    normalized_return: float
    distance: float
    fell: bool
    steps: int
    total_return: float = 0.0
    status: str = "alive"  # alive | fell | diverged | boundary
    trajectory: Trajectory = None


def start_offset(seed: int, cell: float) -> np.ndarray:
    """Start position inside the first terrain cell; the only use of a rollout seed."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-0.5, 0.5, size=2) * cell


def run_batch(world: World, thetas, samples, seeds, steps: int, record: bool = False,
              command: MotionCommand = None, open_loop: GaitParams = None) -> list:
    """Roll out ``len(samples)`` episodes together; returns results in input order.

    ``thetas`` is one ``12x14`` matrix (shared) or a stack ``(B, 12, 14)``.
    With ``open_loop`` set the policy is bypassed: no residuals and fixed
    gait parameters (``thetas`` may then be None).
    """
    samples = list(samples)
    seeds = [int(s) for s in seeds]
    B = len(samples)
    if len(seeds) != B:
        raise ValueError("need one seed per sample")
    if B == 0:
        return []
    thetas = zero_policy() if thetas is None else np.asarray(thetas, dtype=float)
    if thetas.ndim == 2:
        thetas = np.broadcast_to(thetas, (B,) + thetas.shape)
    if thetas.shape[0] != B:
        raise ValueError("need one policy matrix per sample")
    cmd = command or world.command
    cfg, bounds = world.sim, world.bounds
    clock = world.clock()
    stance = default_stand_pose(world.model.geometry)
    legs = world.model.geometry.stacked_legs()
    layout = world.layout(steps)

    terrain_cache = {}
    models, fields = [], []
    for s in samples:
        model, _ = apply_d2(s, world.model, layout)
        key = (s.mesh_magnitude, s.terrain_seed)
        if key not in terrain_cache:
            terrain_cache[key] = layout.generate(s.mesh_magnitude, s.terrain_seed)
        models.append(model)
        fields.append(terrain_cache[key])
    props = MassProperties.from_models(models, [f.friction for f in fields])
    terrain = TerrainStack(fields)
    omega_const = np.full(B, float(cmd.omega_bar))

    def act(theta, obs):
        if open_loop is None:
            return policy_forward(theta, obs, bounds)
        n = obs.shape[0]
        return (np.zeros((n, 12)), GaitParams(np.full(n, float(open_loop.psi)), np.full(n, float(open_loop.delta))))

    def command_for(yaw, omega_base):
        if world.heading_gain > 0.0:
            return omega_base + heading_controller(yaw, world.heading_gain, world.heading_limit)
        return omega_base

    # initial pose: feet already at the first commanded targets
    starts = np.stack([start_offset(sd, layout.cell) for sd in seeds])
    state = BodyState.stack([standing_state(models[b], stance, cfg, fields[b], xy=starts[b])
                             for b in range(B)])
    phases0 = leg_phases(clock, 0.0)
    res0, beta0 = act(thetas, observe(state, cfg=cfg, phases=phases0))
    cmd0 = MotionCommand(cmd.rho, command_for(np.zeros(B), omega_const), cmd.l_span)
    gamma0 = compose_foot_targets(cmd0, beta0, clock, stance, YawMemory.initial(stance, (B,)),
                                  phases=phases0).positions
    feet0, _ = clamp_to_reach(legs, gamma0 + res0.reshape(B, 4, 3))
    state = BodyState.stack([
        standing_state(models[b], stance, cfg, fields[b], xy=starts[b], feet=feet0[b])
        for b in range(B)])

    memory = YawMemory.initial(stance, (B,))
    idx = np.arange(B)  # original index of each live row
    total = np.zeros(B)
    n_steps = np.zeros(B, dtype=int)
    final_x = starts[:, 0].copy()
    status = np.array(["alive"] * B, dtype=object)
    x_lo, x_hi, y_lo, y_hi = terrain.bounds

    if record:
        rec = {k: np.full((B, steps) + shape, np.nan) for k, shape in (
            ("phases", (4,)), ("targets", (4, 3)), ("residuals", (12,)), ("psi", ()), ("delta", ()),
            ("omega_bar", ()), ("roll", ()), ("pitch", ()), ("reward", ()))}

    for k in range(steps):
        if idx.size == 0:
            break
        t = k * cfg.dt
        phases = leg_phases(clock, t)
        obs = observe(state, cfg=cfg, phases=phases)
        res, beta = act(thetas[idx], obs)
        roll, pitch, yaw = euler_angles(state.orientation)
        omega_bar = command_for(yaw, omega_const[idx])
        step_cmd = MotionCommand(cmd.rho, omega_bar, cmd.l_span)
        gamma = compose_foot_targets(step_cmd, beta, clock, stance, memory, phases=phases).positions
        targets, _ = clamp_to_reach(legs, gamma + res.reshape(-1, 4, 3))

        # robots about to leave their terrain stop here, alive
        px, py = state.position[:, 0], state.position[:, 1]
        edge = ((px < x_lo + EDGE_MARGIN) | (px > x_hi - EDGE_MARGIN)
                | (py < y_lo + EDGE_MARGIN) | (py > y_hi - EDGE_MARGIN))
        if np.any(edge):
            status[idx[edge]] = "boundary"
            keep = ~edge
            if not np.any(keep):
                break
            idx, state, props = idx[keep], state.select(keep), props.subset(keep)
            terrain, memory = terrain.subset(np.flatnonzero(keep)), YawMemory(memory.previous[keep])
            targets, gamma, res, beta = targets[keep], gamma[keep], res[keep], _subset_params(beta, keep)
            omega_bar = omega_bar[keep]

        prev = state
        with np.errstate(all="ignore"):
            state, _ = step_batch(state, props, terrain, targets, cfg)
        finite = _finite(state)
        if not np.all(finite):
            state = _patch(state, prev, finite)
        r_new, p_new, _ = euler_angles(state.orientation)
        dx = state.position[:, 0] - prev.position[:, 0]
        reward = step_reward(dx, r_new, p_new, state.angular_velocity)
        fallen = detect_fall(state, terrain, props.trunk_size, world.fall_angle) | ~finite

        total[idx] += reward
        n_steps[idx] += 1
        final_x[idx] = state.position[:, 0]
        if record:
            rec["phases"][idx, k] = phases
            rec["targets"][idx, k] = gamma
            rec["residuals"][idx, k] = res
            rec["psi"][idx, k] = beta.psi
            rec["delta"][idx, k] = beta.delta
            rec["omega_bar"][idx, k] = omega_bar
            rec["roll"][idx, k] = r_new
            rec["pitch"][idx, k] = p_new
            rec["reward"][idx, k] = reward

        if np.any(fallen):
            status[idx[fallen & finite]] = "fell"
            status[idx[~finite]] = "diverged"
            keep = ~fallen
            idx, state, props = idx[keep], state.select(keep), props.subset(keep)
            terrain = terrain.subset(np.flatnonzero(keep)) if idx.size else terrain
            memory = YawMemory(memory.previous[keep])

    results = []
    for b in range(B):
        n = int(n_steps[b])
        traj = None
        if record:
            traj = Trajectory(time=np.arange(n) * cfg.dt,
                              **{key: val[b, :n] for key, val in rec.items()},
                              command=cmd, t_swing=world.t_swing, t_stance=world.t_stance, seed=seeds[b])
        results.append(RolloutResult(
            normalized_return=float(total[b] / n) if n else 0.0,
            distance=float(final_x[b] - starts[b, 0]),
            fell=status[b] in ("fell", "diverged"),
            steps=n,
            total_return=float(total[b]),
            status=str(status[b]),
            trajectory=traj,
        ))
    return results


def _subset_params(beta, keep):
    return replace(beta, psi=beta.psi[keep], delta=beta.delta[keep])


def _patch(state: BodyState, prev: BodyState, finite) -> BodyState:
    """Replace non-finite rows with the previous step's values."""
    out = state.copy()
    for name in ("position", "orientation", "linear_velocity", "angular_velocity",
                 "linear_acceleration", "feet"):
        arr = getattr(out, name)
        arr[~finite] = getattr(prev, name)[~finite]
    return out


def episode_rollout(theta, sample: D2Sample, command: MotionCommand = None, cfg=None,
                    seed: int = 0, world: World = None, record: bool = False,
                    steps: int = None) -> RolloutResult:
    """A single episode of ``cfg.episode_steps`` steps (or ``steps``); see :func:`run_batch`."""
    world = world or World()
    if steps is None:
        steps = getattr(cfg, "episode_steps", 5000)
    theta = zero_policy() if theta is None else theta
    return run_batch(world, theta, [sample], [seed], steps, record=record, command=command)[0]
