"""The ten acceptance criteria, one test each.

Every tolerance and scale is pinned in the constants below. Each test
records a one-line verdict that is printed in the pytest terminal summary
(see conftest.py), so ``pytest -v tests/test_acceptance.py`` ends with one
PASS/FAIL line per criterion.
"""
import time

import numpy as np
import pytest

from quadgait.ars import ARSConfig, ARSTrainer, ars_update, train_lockstep
from quadgait.campaign import EvalCampaignSpec, bucket_report, run_eval_campaign
from quadgait.gait import (SWING_CONTROL_POINTS, TROT_LAGS, GaitParams, PhaseClock, bernstein_basis, leg_phases,
                           swing_curve, trajectory)
from quadgait.io import export_trajectory_log, load_checkpoint, replay_trajectory, save_checkpoint
from quadgait.errors import OutOfReachError
from quadgait.kinematics import (JointAngles, LegGeometry, default_stand_pose, forward_kinematics,
                                 inverse_kinematics)
from quadgait.policy import step_reward, zero_policy
from quadgait.randomization import D2Distribution, D2Sample, nominal_sample
from quadgait.rollout import World, run_batch
from quadgait.sim import RobotModel, SimConfig, released_state, standing_state, step
from quadgait.terrain import dump_terrain, generate_terrain, load_terrain

# 1. curves
PARTITION_TOL = 1e-12
CLOSURE_TOL = 1e-9
DE_CASTELJAU_TOL = 1e-12
DE_CASTELJAU_CASES = 1000
# 2. phases
PHASE_SAMPLES = 10_000
PHASE_CONTINUITY_TOL = 1e-8
# 3. kinematics
IK_CASES = 1000
IK_TOL = 1e-6
# 4. simulator
BALLISTIC_TOL = 1e-6
STAND_SECONDS = 10.0
STAND_DRIFT = 5e-3
# 5. open-loop baseline
FLAT_SECONDS = 10.0
FLAT_MIN_DISTANCE = 1.0
ROUGH_TERRAINS = 20
ROUGH_MAGNITUDE = 0.08
ROUGH_DISTANCE = 5.0
ROUGH_MAX_STEPS = 5000
ROUGH_FALL_FRACTION = 0.8
# 6. learning works
LEARN_SEEDS = (0, 1, 2)
LEARN_EPOCHS = 50
LEARN_EPISODE_STEPS = 2000
# 7. headline ordering
ORDER_SEED = 0
ORDER_EPOCHS = 200
ORDER_EPISODE_STEPS = 2000
ORDER_TRIALS = 100
ORDER_TRIAL_STEPS = 10_000
ORDER_BUCKETS = (5.0, 15.0)
ORDER_CAMPAIGN_SEED = 1000
# 8. reward
REWARD_FIXTURES = [
    # dx, roll, pitch, omega, hand value
    (0.01, 0.0, 0.0, (0.0, 0.0, 0.0), 0.01),
    (0.0, 0.1, 0.1, (1.0, 0.0, 0.0), -10.0 * 0.2 - 0.03),
    (0.005, -0.05, 0.0, (0.0, 0.0, 0.0), 0.005 - 0.5),
    (0.0, 0.0, 0.0, (0.25, -0.5, 0.25), -0.03),
]
# 9. ARS oracle
ARS_DIM = 14
ARS_ITERATIONS = 200
ARS_TARGET = 0.1
ARS_PERMUTATION_TOL = 1e-12
# 10. round trips
ROUND_TRIP_TOL = 1e-9


def de_casteljau(points, u):
    pts = np.array(points, dtype=float)
    while len(pts) > 1:
        pts = (1.0 - u) * pts[:-1] + u * pts[1:]
    return pts[0]


def test_criterion_01_curves(criterion):
    u = np.linspace(0.0, 1.0, 1001)
    partition = np.max(np.abs(sum(bernstein_basis(11, k, u) for k in range(12)) - 1.0))
    tau, psi, delta = 0.035, 0.03, 0.01
    pts = SWING_CONTROL_POINTS * [tau, psi]
    lift = np.array(swing_curve(1.0, tau, psi))
    touch = np.array(swing_curve(np.nextafter(2.0, 0.0), tau, psi))
    endpoints = (np.array_equal(lift, [-tau, 0.0]) and np.array_equal(pts[-1], [tau, 0.0])
                 and np.allclose(touch, [tau, 0.0], rtol=0, atol=CLOSURE_TOL))
    eps = 1e-13
    closure = max(
        np.max(np.abs(np.subtract(trajectory(1.0 - eps, tau, psi, delta), trajectory(1.0, tau, psi, delta)))),
        np.max(np.abs(np.subtract(trajectory(2.0 - eps, tau, psi, delta), trajectory(0.0, tau, psi, delta)))))
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(DE_CASTELJAU_CASES):
        t, p, s = rng.uniform(0, 0.1), rng.uniform(0, 0.1), rng.uniform(0, 1)
        got = swing_curve(1.0 + s, t, p)
        ref = de_casteljau(SWING_CONTROL_POINTS * [t, p], s)
        worst = max(worst, abs(got[0] - ref[0]), abs(got[1] - ref[1]))
    ok = partition < PARTITION_TOL and endpoints and closure < CLOSURE_TOL and worst < DE_CASTELJAU_TOL
    criterion(1, ok, f"partition {partition:.1e}, endpoints {endpoints}, closure {closure:.1e}, "
                     f"de Casteljau {worst:.1e}")
    assert ok


def test_criterion_02_phases(criterion):
    clock = PhaseClock(t_swing=0.15, t_stance=0.45)
    lags_ok = tuple(clock.lags) == (0.0, 0.5, 0.5, 0.0) == TROT_LAGS
    rng = np.random.default_rng(7)
    ph = leg_phases(clock, rng.uniform(0.0, 1000.0, PHASE_SAMPLES))
    pairs_ok = np.array_equal(ph[:, 0], ph[:, 3]) and np.array_equal(ph[:, 1], ph[:, 2])
    # each case boundary of the piecewise phase map, for every leg
    eps = 1e-10
    jump = 0.0
    for lag in clock.lags:
        for b in (0.0, clock.t_stance, clock.t_stride - clock.t_swing, clock.t_stride):
            t = b + lag * clock.t_stride + 5 * clock.t_stride
            d = np.abs(leg_phases(clock, t + eps) - leg_phases(clock, t - eps)) % 2.0
            jump = max(jump, float(np.max(np.minimum(d, 2.0 - d))))
    ok = lags_ok and pairs_ok and jump < PHASE_CONTINUITY_TOL
    criterion(2, ok, f"lags {clock.lags}, diagonal pairs equal {pairs_ok}, max boundary jump {jump:.1e}")
    assert ok


def test_criterion_03_kinematics(criterion):
    rng = np.random.default_rng(3)
    worst = 0.0
    for side in (1.0, -1.0):
        geom = LegGeometry(side=side)
        n = IK_CASES // 2
        angles = JointAngles(rng.uniform(-1.0, 1.0, n), rng.uniform(-1.2, 1.2, n), rng.uniform(0.05, 2.8, n))
        targets = forward_kinematics(geom, angles)
        back = forward_kinematics(geom, inverse_kinematics(geom, targets))
        worst = max(worst, float(np.max(np.abs(back - targets))))
    raised = 0
    for bad in ([0.0, 0.04, -0.5], [0.3, 0.0, 0.0], [0.0, 0.0, -0.01]):
        try:
            inverse_kinematics(LegGeometry(), bad)
        except OutOfReachError:
            raised += 1
    ok = worst < IK_TOL and raised == 3
    criterion(3, ok, f"FK(IK) error {worst:.1e} m over {IK_CASES} targets, unreachable errors {raised}/3")
    assert ok


def test_criterion_04_simulator(criterion):
    model, cfg = RobotModel(), SimConfig()
    stance = default_stand_pose(model.geometry)
    flat = generate_terrain(0.0, (6.0, 6.0), 0.2, seed=0)
    state = released_state([0.0, 0.0, 5.0], model, stance, cfg)
    drop = 0.0
    for n in range(1, 61):
        state = step(state, model, flat, stance.f_stand, cfg)
        drop = max(drop, abs(state.position[2] - (5.0 - 0.5 * cfg.gravity * (n * cfg.dt) ** 2)))
    state = standing_state(model, stance, cfg, flat)
    start = state.position.copy()
    for _ in range(int(round(STAND_SECONDS / cfg.dt))):
        state = step(state, model, flat, stance.f_stand, cfg)
    drift = float(np.linalg.norm(state.position - start))
    # bit-exact across runs and across how the trials are grouped into batches
    dist = D2Distribution()
    world = World()
    rng = np.random.default_rng(0)
    theta = 0.05 * rng.standard_normal((12, 14))
    spec = dict(trials=6, max_steps=500, source="matrix", master_seed=5)

    def outcome(chunk):
        report = run_eval_campaign(EvalCampaignSpec(chunk=chunk, **spec), dist, world, theta=theta)
        return [(t.distance, t.steps, t.status) for t in report.trials]

    first = outcome(6)
    same = all(outcome(chunk) == first for chunk in (6, 4, 1))
    ok = drop < BALLISTIC_TOL and drift < STAND_DRIFT and same
    criterion(4, ok, f"ballistic error {drop:.1e} m, standing drift {drift * 1000:.2f} mm over "
                     f"{STAND_SECONDS:g} s, bit-exact across runs and batch sizes {same}")
    assert ok


def test_criterion_05_open_loop_baseline(criterion):
    world = World()
    dist = D2Distribution()
    steps = int(round(FLAT_SECONDS / world.sim.dt))
    flat = run_batch(world, None, [nominal_sample(dist, magnitude=0.0)], [0], steps, open_loop=GaitParams())[0]
    rough = [D2Sample(dist.base_mass, np.full(8, dist.link_mass), dist.nominal_friction, ROUGH_MAGNITUDE, seed)
             for seed in range(ROUGH_TERRAINS)]
    results = run_batch(world, None, rough, range(ROUGH_TERRAINS), ROUGH_MAX_STEPS, open_loop=GaitParams())
    early = sum(r.fell and r.distance < ROUGH_DISTANCE for r in results)
    fraction = early / ROUGH_TERRAINS
    ok = not flat.fell and flat.distance >= FLAT_MIN_DISTANCE and fraction >= ROUGH_FALL_FRACTION
    criterion(5, ok, f"flat: {flat.distance:.2f} m in {FLAT_SECONDS:g} s ({flat.status}); "
                     f"{ROUGH_MAGNITUDE} m terrain: {early}/{ROUGH_TERRAINS} fell before {ROUGH_DISTANCE:g} m")
    assert ok


@pytest.mark.slow
def test_criterion_06_learning_works(criterion):
    cfg = ARSConfig(episode_steps=LEARN_EPISODE_STEPS)
    world, dist = World(), D2Distribution()
    start = time.perf_counter()
    trainers = [ARSTrainer(cfg, dist, "fixed", seed, world, fixed_magnitude=0.0) for seed in LEARN_SEEDS]
    train_lockstep(trainers, LEARN_EPOCHS)
    pairs = [(t.log.initial_return, t.log.evaluated_returns[-1]) for t in trainers]
    ok = all(after > before for before, after in pairs)
    detail = ", ".join(f"seed {s}: {a:+.3f} -> {b:+.3f}" for s, (a, b) in zip(LEARN_SEEDS, pairs))
    criterion(6, ok, f"{detail} ({(time.perf_counter() - start) / 60:.1f} min)")
    assert ok


@pytest.mark.slow
def test_criterion_07_headline_ordering(criterion):
    cfg = ARSConfig(episode_steps=ORDER_EPISODE_STEPS)
    world, dist = World(), D2Distribution()
    start = time.perf_counter()
    trainers = [ARSTrainer(cfg, dist, mode, ORDER_SEED, world) for mode in ("randomized", "fixed")]
    train_lockstep(trainers, ORDER_EPOCHS)
    spec = dict(trials=ORDER_TRIALS, max_steps=ORDER_TRIAL_STEPS, buckets=ORDER_BUCKETS,
                master_seed=ORDER_CAMPAIGN_SEED)
    d2 = run_eval_campaign(EvalCampaignSpec(source="matrix", **spec), dist, world, theta=trainers[0].theta)
    gmbc = run_eval_campaign(EvalCampaignSpec(source="matrix", **spec), dist, world, theta=trainers[1].theta)
    ol = run_eval_campaign(EvalCampaignSpec(source="open-loop", **spec), dist, world)
    text, _ = bucket_report([d2, gmbc, ol], ["D2-GMBC", "GMBC", "Open-loop"])
    print(text)
    ok = d2.survived >= gmbc.survived > ol.survived and d2.far >= gmbc.far
    criterion(7, ok, f"survived D2-GMBC {d2.survived}, GMBC {gmbc.survived}, open-loop {ol.survived} of "
                     f"{ORDER_TRIALS}; beyond {ORDER_BUCKETS[1]:g} m D2-GMBC {d2.far}, GMBC {gmbc.far} "
                     f"({(time.perf_counter() - start) / 60:.1f} min)")
    assert ok


def test_criterion_08_reward_arithmetic(criterion):
    exact = all(step_reward(dx, r, p, np.array(w)) == v for dx, r, p, w, v in REWARD_FIXTURES)
    # normalized return of a full episode and of one cut short by a fall, against a plain left-to-right sum
    thetas = np.stack([zero_policy(), 3.0 * np.random.default_rng(8).standard_normal((12, 14))])
    sample = nominal_sample(D2Distribution())
    runs = run_batch(World(), thetas, [sample, sample], [0, 1], 400, record=True)
    rollout_ok = [r.status for r in runs] == ["alive", "fell"] and all(
        r.normalized_return == sum(r.trajectory.reward.tolist()) / r.steps and len(r.trajectory) == r.steps
        for r in runs)
    ok = exact and rollout_ok
    criterion(8, ok, f"{len(REWARD_FIXTURES)} fixtures exact {exact}, normalized return = sum/K on full and "
                     f"fallen episodes {rollout_ok}")
    assert ok


def test_criterion_09_ars_oracle(criterion):
    cfg = ARSConfig()
    rng = np.random.default_rng(9)
    star = rng.standard_normal(ARS_DIM)
    d0 = rng.standard_normal(ARS_DIM)
    theta = star + d0 / np.linalg.norm(d0)

    def f(t):
        return -np.sum((t - star) ** 2)

    for _ in range(ARS_ITERATIONS):
        deltas = rng.standard_normal((cfg.directions, ARS_DIM))
        theta = ars_update(theta, [f(theta + cfg.noise * d) for d in deltas],
                           [f(theta - cfg.noise * d) for d in deltas], deltas, cfg)
    distance = float(np.linalg.norm(theta - star))
    worst = 0.0
    for _ in range(100):
        th = rng.standard_normal((12, 14))
        deltas = rng.standard_normal((8, 12, 14))
        rp, rm = rng.standard_normal(8), rng.standard_normal(8)
        perm = rng.permutation(8)
        worst = max(worst, float(np.max(np.abs(ars_update(th, rp, rm, deltas)
                                               - ars_update(th, rp[perm], rm[perm], deltas[perm])))))
    ok = distance < ARS_TARGET and worst < ARS_PERMUTATION_TOL
    criterion(9, ok, f"quadratic: distance {distance:.1e} after {ARS_ITERATIONS} iterations; "
                     f"permutation difference {worst:.1e}")
    assert ok


def test_criterion_10_round_trips(criterion, tmp_path):
    rng = np.random.default_rng(10)
    theta = rng.standard_normal((12, 14)) * 10.0 ** rng.integers(-8, 8, (12, 14))
    save_checkpoint(theta, tmp_path / "policy.txt")
    ckpt = float(np.max(np.abs(load_checkpoint(tmp_path / "policy.txt") - theta)))
    field = generate_terrain(0.08, (5.0, 3.0), 0.2, seed=4)
    dump_terrain(field, tmp_path / "terrain.txt")
    terr = float(np.max(np.abs(load_terrain(tmp_path / "terrain.txt").heights - field.heights)))
    world = World()
    res = run_batch(world, 0.05 * rng.standard_normal((12, 14)), [nominal_sample(D2Distribution())], [1], 300,
                    record=True)[0]
    export_trajectory_log(res, tmp_path / "traj.csv", default_stand_pose(world.model.geometry))
    logged, replayed = replay_trajectory(tmp_path / "traj.csv")
    replay = float(np.max(np.abs(logged - replayed)))
    ok = max(ckpt, terr, replay) < ROUND_TRIP_TOL and len(logged) == res.steps
    criterion(10, ok, f"checkpoint {ckpt:.1e}, terrain {terr:.1e}, trajectory replay {replay:.1e} "
                      f"over {len(logged)} steps")
    assert ok
