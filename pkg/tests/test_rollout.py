from dataclasses import replace

import numpy as np
import pytest

from quadgait.gait import GaitParams
from quadgait.policy import zero_policy
from quadgait.randomization import D2Distribution, D2Sample, TerrainLayout, nominal_sample, sample_d2
from quadgait.rollout import World, episode_rollout, run_batch, start_offset


@pytest.fixture(scope="module")
def world():
    return World()


@pytest.fixture(scope="module")
def flat_sample():
    return nominal_sample(D2Distribution(), magnitude=0.0)


def test_zero_policy_walks_on_flat_ground(world, flat_sample):
    res = episode_rollout(zero_policy(), flat_sample, world=world, steps=600)
    assert res.status == "alive" and not res.fell and res.steps == 600
    assert res.distance > 0.5
    # zero policy is the open-loop gait at the midpoint parameters
    mid = world.bounds.midpoint
    ol = run_batch(world, None, [flat_sample], [0], 600, open_loop=GaitParams(mid.psi, mid.delta))[0]
    assert ol.distance == pytest.approx(res.distance, abs=1e-9)


def test_normalized_return_is_mean_reward(world, flat_sample):
    res = episode_rollout(zero_policy(), flat_sample, world=world, steps=200, record=True)
    rewards = res.trajectory.reward
    assert len(rewards) == res.steps == 200
    assert res.total_return == pytest.approx(np.sum(rewards), rel=1e-12)
    assert res.normalized_return == res.total_return / res.steps


def test_fall_on_first_step(flat_sample):
    world = World(fall_angle=-1.0)  # every posture counts as fallen
    res = episode_rollout(zero_policy(), flat_sample, world=world, steps=100, record=True)
    assert res.fell and res.status == "fell"
    assert res.steps == 1
    assert res.normalized_return == res.trajectory.reward[0] == res.total_return


def test_rollout_is_deterministic(world):
    sample = sample_d2(D2Distribution(), 12)
    theta = 0.05 * np.random.default_rng(0).standard_normal((12, 14))
    a = episode_rollout(theta, sample, world=world, seed=3, steps=300)
    b = episode_rollout(theta, sample, world=world, seed=3, steps=300)
    assert a == b


def test_results_do_not_depend_on_batching(world):
    dist = D2Distribution()
    samples = [sample_d2(dist, s) for s in range(6)]
    thetas = 0.05 * np.random.default_rng(1).standard_normal((6, 12, 14))
    full = run_batch(world, thetas, samples, range(6), 400)
    for order in ([5, 0, 3], [2], [4, 1]):
        part = run_batch(world, thetas[order], [samples[i] for i in order], order, 400)
        for i, r in zip(order, part):
            assert r == full[i]


def test_open_loop_has_no_residuals(world, flat_sample):
    res = run_batch(world, None, [flat_sample], [0], 50, record=True, open_loop=GaitParams())[0]
    assert np.all(res.trajectory.residuals == 0.0)
    assert np.all(res.trajectory.psi == 0.03)


def test_zero_policy_records_zero_residuals(world, flat_sample):
    res = episode_rollout(zero_policy(), flat_sample, world=world, steps=30, record=True)
    assert np.all(res.trajectory.residuals == 0.0)
    assert res.trajectory.targets.shape == (30, 4, 3)


def test_boundary_stops_alive(flat_sample):
    world = World(terrain=TerrainLayout(behind=1.0, ahead=1.5, half_width=1.0), max_speed=0.0)
    res = episode_rollout(zero_policy(), flat_sample, world=world, steps=2000)
    assert res.status == "boundary" and not res.fell
    assert res.steps < 2000


def test_start_offset_within_first_cell():
    offsets = np.array([start_offset(s, 0.2) for s in range(200)])
    assert np.all(np.abs(offsets) <= 0.1)
    assert np.array_equal(start_offset(4, 0.2), start_offset(4, 0.2))


def test_input_validation(world, flat_sample):
    with pytest.raises(ValueError):
        run_batch(world, zero_policy(), [flat_sample], [0, 1], 10)
    with pytest.raises(ValueError):
        run_batch(world, np.zeros((3, 12, 14)), [flat_sample] * 2, [0, 1], 10)
    assert run_batch(world, zero_policy(), [], [], 10) == []


def test_rough_terrain_changes_outcome(world):
    flat = D2Sample(1.1, np.full(8, 0.15), 1.15, 0.0, 3)
    rough = replace(flat, mesh_magnitude=0.08)
    a = episode_rollout(zero_policy(), flat, world=world, steps=300)
    b = episode_rollout(zero_policy(), rough, world=world, steps=300)
    assert a != b
