import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadgait.gait import (LEGS, PRINTED_SWING_CONTROL_POINTS, SWING_CONTROL_POINTS, TROT_LAGS, GaitParams,
                           MotionCommand, PhaseClock, StanceGeometry, YawMemory, bernstein_basis,
                           compose_foot_targets, compute_phi_arc, leg_index, leg_phase, leg_phases,
                           stance_curve, stance_duration, stand_angles, swing_curve, trajectory)
from quadgait.kinematics import RobotGeometry, default_stand_pose


def de_casteljau(points, u):
    """Independent oracle: repeated linear interpolation of the control polygon."""
    pts = np.array(points, dtype=float)
    while len(pts) > 1:
        pts = (1.0 - u) * pts[:-1] + u * pts[1:]
    return pts[0]


def circ_dist(a, b, period=2.0):
    d = np.abs(a - b) % period
    return np.minimum(d, period - d)


@given(st.floats(0.0, 1.0))
def test_bernstein_partition_of_unity(s):
    total = sum(bernstein_basis(11, k, s) for k in range(12))
    assert abs(total - 1.0) < 1e-12


def test_bernstein_known_values():
    assert bernstein_basis(11, 0, 0.0) == 1.0
    assert bernstein_basis(11, 11, 1.0) == 1.0
    assert bernstein_basis(2, 1, 0.5) == 0.5  # 2 * 0.5 * 0.5
    assert bernstein_basis(11, 3, 0.25) == pytest.approx(math.comb(11, 3) * 0.75 ** 8 * 0.25 ** 3, rel=1e-15)


def test_printed_basis_is_not_a_partition():
    total = sum(bernstein_basis(11, k, 0.5, printed=True) for k in range(12))
    assert abs(total - 1.0) > 0.1


def test_bernstein_rejects_bad_index_and_parameter():
    with pytest.raises(ValueError):
        bernstein_basis(11, 12, 0.5)
    with pytest.raises(ValueError):
        bernstein_basis(11, 2, 1.5)


def test_swing_endpoints_are_first_and_last_control_points():
    tau, psi = 0.04, 0.03
    w0 = np.array([bernstein_basis(11, k, 0.0) for k in range(12)])
    w1 = np.array([bernstein_basis(11, k, 1.0) for k in range(12)])
    scale = np.array([tau, psi])
    assert np.allclose(w0 @ SWING_CONTROL_POINTS * scale, [-tau, 0.0], atol=0, rtol=0)
    assert np.allclose(w1 @ SWING_CONTROL_POINTS * scale, [tau, 0.0], atol=0, rtol=0)
    q, z = swing_curve(1.0, tau, psi)
    assert (q, z) == (-tau, 0.0)


def test_printed_table_differs_only_in_c8_to_c10_sign():
    diff = np.flatnonzero(np.any(PRINTED_SWING_CONTROL_POINTS != SWING_CONTROL_POINTS, axis=1))
    assert list(diff) == [8, 9, 10]


@settings(max_examples=50)
@given(st.floats(0.0, 0.1), st.floats(0.0, 0.1), st.floats(0.0, 0.05))
def test_curve_is_closed(tau, psi, delta):
    eps = 1e-13
    # stance end meets swing start, swing end meets stance start
    q_a, z_a = trajectory(1.0 - eps, tau, psi, delta)
    q_b, z_b = trajectory(1.0, tau, psi, delta)
    assert abs(q_a - q_b) < 1e-9 and abs(z_a - z_b) < 1e-9
    q_c, z_c = trajectory(2.0 - eps, tau, psi, delta)
    q_d, z_d = trajectory(0.0, tau, psi, delta)
    assert abs(q_c - q_d) < 1e-9 and abs(z_c - z_d) < 1e-9


def test_swing_matches_de_casteljau_on_random_parameters():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        tau, psi, u = rng.uniform(0, 0.1), rng.uniform(0, 0.1), rng.uniform(0, 1)
        q, z = swing_curve(1.0 + u, tau, psi)
        ref = de_casteljau(SWING_CONTROL_POINTS * [tau, psi], u)
        worst = max(worst, abs(q - ref[0]), abs(z - ref[1]))
    assert worst < 1e-12


def test_stance_curve_values():
    q, z = stance_curve(np.array([0.0, 0.5]), 0.04, 0.01)
    assert np.allclose(q, [0.04, 0.0], atol=1e-15)
    assert z[1] == pytest.approx(0.01)
    # trajectory presses below ground during stance
    _, z_mid = trajectory(0.5, 0.04, 0.03, 0.01)
    assert z_mid == pytest.approx(-0.01)


def test_stance_zero_tau_is_defined():
    q, z = stance_curve(0.3, 0.0, 0.01)
    assert q == 0.0 and np.isfinite(z)


def test_swing_apex_bounded_by_clearance():
    s = np.linspace(1.0, 2.0, 2001, endpoint=False)
    for psi in (0.0, 0.01, 0.05):
        _, z = trajectory(s, 0.035, psi, 0.01)
        assert z.max() <= 1.1 * psi + 1e-15
        assert z.min() >= 0.0


def test_phase_outside_range_rejected():
    with pytest.raises(ValueError):
        trajectory(2.0, 0.03, 0.03, 0.01)
    with pytest.raises(ValueError):
        stance_curve(1.0, 0.03, 0.01)


def test_trot_lags():
    assert TROT_LAGS == (0.0, 0.5, 0.5, 0.0)
    assert PhaseClock().lags == (0.0, 0.5, 0.5, 0.0)


def test_phase_boundaries_continuous():
    clock = PhaseClock(t_swing=0.15, t_stance=0.45)
    eps = 1e-10
    for leg in LEGS:
        lag = clock.lags[leg_index(leg)] * clock.t_stride
        for b in (0.0, clock.t_stance, clock.t_stride - clock.t_swing, clock.t_stride):
            t = b + lag + 3 * clock.t_stride
            lo, _ = leg_phase(clock, leg, t - eps)
            hi, _ = leg_phase(clock, leg, t + eps)
            assert circ_dist(lo, hi) < 1e-8


def test_phase_is_linear_in_each_part():
    clock = PhaseClock(t_swing=0.2, t_stance=0.4)
    s, stance = leg_phase(clock, "FL", 0.2)
    assert s == pytest.approx(0.5) and stance
    s, stance = leg_phase(clock, "FL", 0.5)
    assert s == pytest.approx(1.5) and not stance
    s, _ = leg_phase(clock, "FR", 0.0)  # half a stride behind
    assert s == pytest.approx(0.75)


def test_diagonal_pairs_share_phase():
    clock = PhaseClock(t_swing=0.15, t_stance=0.45)
    t = np.random.default_rng(0).uniform(0, 100, size=10_000)
    ph = leg_phases(clock, t)
    assert np.array_equal(ph[:, 0], ph[:, 3])
    assert np.array_equal(ph[:, 1], ph[:, 2])
    assert np.all((ph >= 0) & (ph < 2))
    # each pair spends exactly one half stride apart
    assert np.all(circ_dist(leg_phases(clock, t + 0.5 * clock.t_stride)[:, 0], ph[:, 1]) < 1e-9)


def test_clock_advance_wraps():
    clock = PhaseClock(t_swing=0.1, t_stance=0.3)
    for _ in range(5):
        clock.advance(0.1)
    assert clock.t_elapse_fl == pytest.approx(0.1)
    assert leg_phase(clock, 0)[0] == pytest.approx(leg_phase(clock, 0, 0.1)[0])


def test_stance_duration():
    assert stance_duration(0.035, 0.175) == pytest.approx(0.4)
    assert stance_duration(0.0, 1.0) == 1e-3
    with pytest.raises(ValueError):
        stance_duration(0.03, 0.0)


def test_command_and_params_validation():
    with pytest.raises(ValueError):
        MotionCommand(rho=2.0)
    with pytest.raises(ValueError):
        MotionCommand(l_span=-0.01)
    with pytest.raises(ValueError):
        GaitParams(psi=-0.01)
    with pytest.raises(ValueError):
        leg_index("XX")


def test_stand_angles_signs():
    xy = np.array([[0.1, 0.1], [0.1, -0.1], [-0.1, 0.1], [-0.1, -0.1]])
    assert np.allclose(stand_angles(xy), [-np.pi / 4, np.pi / 4, np.pi / 4, -np.pi / 4])


@pytest.fixture
def stance():
    return default_stand_pose(RobotGeometry())


def test_compose_straight_walk_stays_in_sagittal_plane(stance):
    clock = PhaseClock(t_swing=0.15, t_stance=0.45)
    mem = YawMemory.initial(stance)
    params = GaitParams(0.03, 0.01)
    for t in np.arange(0, 1.2, 0.01):
        pos = compose_foot_targets(MotionCommand(0.0, 0.0, 0.035), params, clock, stance, mem, t=t).positions
        assert np.allclose(pos[:, 1], stance.f_stand[:, 1], atol=1e-15)
        s = leg_phases(clock, t)
        q, z = trajectory(s, 0.035, 0.03, 0.01)
        assert np.allclose(pos[:, 0], q, atol=1e-15)
        # the yaw curve with a zero step still contributes its height profile
        assert np.allclose(pos[:, 2] - stance.f_stand[:, 2], 2 * z, atol=1e-15)


def test_compose_rho_rotates_translation(stance):
    clock = PhaseClock()
    s = np.full(4, 0.25)
    a = compose_foot_targets(MotionCommand(0.0, 0.0, 0.03), GaitParams(), clock, stance,
                             YawMemory.initial(stance), phases=s).positions - stance.f_stand
    b = compose_foot_targets(MotionCommand(0.5 * np.pi, 0.0, 0.03), GaitParams(), clock, stance,
                             YawMemory.initial(stance), phases=s).positions - stance.f_stand
    assert np.allclose(b[:, 0], 0.0, atol=1e-15)
    assert np.allclose(b[:, 1], a[:, 0])
    assert np.allclose(b[:, 2], a[:, 2])


def test_compose_updates_memory_and_phi_arc(stance):
    mem = YawMemory.initial(stance)
    phi0 = compute_phi_arc(None, mem, stance)
    assert np.allclose(phi0, stance.phi_stand + 0.5 * np.pi)
    out = compose_foot_targets(MotionCommand(0.0, 0.01, 0.0), GaitParams(), PhaseClock(), stance, mem,
                               phases=np.full(4, 0.2)).positions
    assert np.array_equal(mem.previous, out)
    g = out - stance.f_stand
    expect = np.arctan2(g[:, 1], g[:, 0]) + stance.phi_stand + 0.5 * np.pi
    assert np.allclose(compute_phi_arc(None, mem, stance), expect)
    assert compute_phi_arc("FR", mem, stance) == pytest.approx(expect[1])


def test_compose_batch_matches_single(stance):
    rng = np.random.default_rng(3)
    psi = rng.uniform(0.005, 0.06, 5)
    delta = rng.uniform(0, 0.02, 5)
    phases = rng.uniform(0, 2, (5, 4))
    batch = compose_foot_targets(MotionCommand(0.0, 0.0, 0.035), GaitParams(psi, delta), PhaseClock(), stance,
                                 YawMemory.initial(stance, (5,)), phases=phases).positions
    for b in range(5):
        single = compose_foot_targets(MotionCommand(0.0, 0.0, 0.035), GaitParams(psi[b], delta[b]), PhaseClock(),
                                      stance, YawMemory.initial(stance), phases=phases[b]).positions
        assert np.array_equal(single, batch[b])


def test_compose_clamps_when_legs_given(stance):
    legs = RobotGeometry().stacked_legs()
    out = compose_foot_targets(MotionCommand(0.0, 0.0, 0.5), GaitParams(), PhaseClock(), stance,
                               YawMemory.initial(stance), phases=np.zeros(4), legs=legs)
    assert out.clamped.all()
    assert out.flat.shape == (12,)


def test_stance_geometry_from_positions():
    geom = StanceGeometry.from_positions(np.zeros(12) - 0.2)
    assert geom.f_stand.shape == (4, 3) and geom.phi_stand.shape == (4,)
