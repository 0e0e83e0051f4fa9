"""Open-loop Bezier trot generator.

Each foot follows a closed planar curve: a sinusoidal stance sweep for
phase ``s`` in [0, 1) and a degree-11 Bezier swing for ``s`` in [1, 2).
Two such planar curves (translation and yaw) are rotated into 3D and added
to the leg's rest position.

All curve functions broadcast over numpy arrays so a batch of robots can be
evaluated in lockstep. Leg order everywhere is ``LEGS``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LEGS = ("FL", "FR", "BL", "BR")
TROT_LAGS = (0.0, 0.5, 0.5, 0.0)

# phi_stand sign per leg: + for FR/BL, - for FL/BR
_STAND_SIGN = np.array([-1.0, 1.0, 1.0, -1.0])

SWING_DEGREE = 11

# Control points as multiples of (tau, psi). Symmetric about q = 0; the
# swing starts at (-tau, 0) where stance ends and lands at (tau, 0).
SWING_CONTROL_POINTS = np.array([
    [-1.0, 0.0],
    [-1.4, 0.0],
    [-1.5, 0.9],
    [-1.5, 0.9],
    [-1.5, 0.9],
    [0.0, 0.9],
    [0.0, 0.9],
    [0.0, 1.1],
    [1.5, 1.1],
    [1.5, 1.1],
    [1.4, 0.0],
    [1.0, 0.0],
])

# Same table with c8-c10 on the negative side, as it is commonly printed.
PRINTED_SWING_CONTROL_POINTS = SWING_CONTROL_POINTS.copy()
PRINTED_SWING_CONTROL_POINTS[8:11, 0] *= -1.0

G_EPS = 1e-9  # below this |g_xy| the yaw step angle is defined as 0


def leg_index(leg) -> int:
    if isinstance(leg, (int, np.integer)):
        if not 0 <= leg < 4:
            raise ValueError(f"leg index out of range: {leg}")
        return int(leg)
    try:
        return LEGS.index(leg)
    except ValueError:
        raise ValueError(f"unknown leg {leg!r}; expected one of {LEGS}") from None


def bernstein_basis(n: int, k: int, s, printed: bool = False):
    """Bernstein polynomial ``C(n,k) (1-s)^(n-k) s^k``.

    With ``printed=True`` the ``s^k`` factor is replaced by a bare ``s``,
    which is how the formula is sometimes typeset. That variant is kept only
    for comparison; it is not a partition of unity.
    """
    if not 0 <= k <= n:
        raise ValueError(f"Bernstein index k={k} outside [0, {n}]")
    s = np.asarray(s, dtype=float)
    if np.any((s < 0.0) | (s > 1.0)):
        raise ValueError("Bernstein parameter must lie in [0, 1]")
    power = 1 if printed else k
    out = math.comb(n, k) * (1.0 - s) ** (n - k) * s ** power
    return float(out) if out.ndim == 0 else out


_COMB11 = np.array([math.comb(SWING_DEGREE, k) for k in range(SWING_DEGREE + 1)], dtype=float)
_K11 = np.arange(SWING_DEGREE + 1, dtype=float)


def _basis_matrix(u):
    """All 12 degree-11 basis values, shape ``u.shape + (12,)``."""
    u = np.asarray(u, dtype=float)[..., None]
    return _COMB11 * (1.0 - u) ** (SWING_DEGREE - _K11) * u ** _K11


def stance_curve(s, tau, delta):
    """Stance sweep: returns ``(q, z) = (tau (1-2s), delta cos(pi (1-2s) / 2))``.

    The tau/tau ratio inside the cosine has been cancelled, so ``tau = 0`` is
    fine. ``z`` is returned with the positive sign; :func:`trajectory` turns
    it into a downward penetration.
    """
    s = np.asarray(s, dtype=float)
    if np.any((s < 0.0) | (s >= 1.0)):
        raise ValueError("stance phase must lie in [0, 1)")
    w = 1.0 - 2.0 * s
    return tau * w, delta * np.cos(0.5 * np.pi * w)


def swing_curve(s, tau, psi, points=SWING_CONTROL_POINTS):
    """Degree-11 Bezier swing evaluated at ``s - 1``, s in [1, 2)."""
    s = np.asarray(s, dtype=float)
    if np.any((s < 1.0) | (s >= 2.0)):
        raise ValueError("swing phase must lie in [1, 2)")
    basis = _basis_matrix(s - 1.0)
    q_unit = basis @ points[:, 0]
    z_unit = basis @ points[:, 1]
    return tau * q_unit, psi * z_unit


def trajectory(s, tau, psi, delta, points=SWING_CONTROL_POINTS):
    """Closed planar foot curve over s in [0, 2), z up.

    Stance (s < 1) presses ``delta`` below nominal ground at mid-stance;
    swing (s >= 1) rises to at most ``1.1 psi``. Arguments broadcast.
    """
    s = np.asarray(s, dtype=float)
    if np.any((s < 0.0) | (s >= 2.0)):
        raise ValueError("gait phase must lie in [0, 2)")
    stance = s < 1.0
    w = 1.0 - 2.0 * np.where(stance, s, 0.0)
    basis = _basis_matrix(np.clip(s - 1.0, 0.0, 1.0))
    q_unit = np.where(stance, w, basis @ points[:, 0])
    z_stance = -np.cos(0.5 * np.pi * w)
    z_swing = basis @ points[:, 1]
    q = tau * q_unit
    z = np.where(stance, delta * z_stance, psi * z_swing)
    return q, z


@dataclass
class MotionCommand:
    """Steering input: rotation ``rho``, yaw step ``omega_bar`` (m), half stride ``l_span`` (m).

    ``omega_bar`` is fed to the curve generator as a step length, so a yaw
    rate command has to be scaled to meters by the caller.
    """
    rho: float = 0.0
    omega_bar: float = 0.0
    l_span: float = 0.035

    def __post_init__(self):
        if np.any(np.abs(self.rho) > 0.5 * np.pi + 1e-12):
            raise ValueError("rho must lie in [-pi/2, pi/2]")
        if np.any(np.asarray(self.l_span) < 0.0):
            raise ValueError("l_span must be non-negative")


@dataclass
class GaitParams:
    """Clearance height ``psi`` and virtual penetration depth ``delta``, meters."""
    psi: float = 0.03
    delta: float = 0.01

    def __post_init__(self):
        if np.any(np.asarray(self.psi) < 0.0) or np.any(np.asarray(self.delta) < 0.0):
            raise ValueError("psi and delta must be non-negative")


def stance_duration(l_span: float, step_velocity: float, minimum: float = 1e-3) -> float:
    """``T_stance = 2 L_span / v_d``, floored so a zero stride keeps a valid clock."""
    if step_velocity <= 0:
        raise ValueError("step velocity must be positive")
    return max(2.0 * l_span / step_velocity, minimum)


@dataclass
class PhaseClock:
    t_swing: float = 0.2
    t_stance: float = 0.2
    lags: tuple = TROT_LAGS
    t_elapse_fl: float = 0.0

    def __post_init__(self):
        if self.t_swing <= 0 or self.t_stance <= 0:
            raise ValueError("swing and stance durations must be positive")
        if len(self.lags) != 4 or any(not 0.0 <= lag < 1.0 for lag in self.lags):
            raise ValueError("need four phase lags in [0, 1)")

    @property
    def t_stride(self) -> float:
        return self.t_swing + self.t_stance

    def advance(self, dt: float) -> None:
        # no contact sensing: the front-left reference simply resets every stride
        self.t_elapse_fl += dt
        if self.t_elapse_fl >= self.t_stride:
            self.t_elapse_fl -= self.t_stride

    def elapsed(self, t=None):
        if t is None:
            return self.t_elapse_fl
        return np.mod(t, self.t_stride)


def _normalize_leg_clock(t_leg, clock: PhaseClock):
    t_st, t_sw, t_stride = clock.t_stance, clock.t_swing, clock.t_stride
    conditions = [
        (t_leg >= 0.0) & (t_leg < t_st),
        (t_leg >= -t_stride) & (t_leg < -t_sw),
        (t_leg >= -t_sw) & (t_leg < 0.0),
        (t_leg >= t_st) & (t_leg < t_stride),
    ]
    choices = [
        t_leg / t_st,
        (t_leg + t_stride) / t_st,
        (t_leg + t_sw) / t_sw + 1.0,
        (t_leg - t_st) / t_sw + 1.0,
    ]
    s = np.select(conditions, choices, default=0.0)
    # guard against rounding at the 2 -> 0 seam
    return np.where(s >= 2.0, 0.0, s)


def leg_phase(clock: PhaseClock, leg, t=None):
    """Phase of one leg and whether it is in stance.

    ``t`` is absolute time in seconds (``None`` uses the clock's own elapsed
    counter). Returns ``(s, in_stance)`` with s in [0, 2).
    """
    i = leg_index(leg)
    t_leg = clock.elapsed(t) - clock.lags[i] * clock.t_stride
    s = _normalize_leg_clock(np.asarray(t_leg, dtype=float), clock)
    return (float(s) if np.ndim(s) == 0 else s), s < 1.0


def leg_phases(clock: PhaseClock, t=None):
    """Phases of all four legs, shape ``np.shape(t) + (4,)``."""
    elapsed = np.asarray(clock.elapsed(t), dtype=float)[..., None]
    t_leg = elapsed - np.asarray(clock.lags) * clock.t_stride
    return _normalize_leg_clock(t_leg, clock)


def stand_angles(xy) -> np.ndarray:
    """Per-leg rest angle from rest positions given as ``(4, 2+)`` x/y.

    ``arctan(|y| / |x|)``, positive for FR/BL and negative for FL/BR.
    """
    xy = np.asarray(xy, dtype=float)
    return _STAND_SIGN * np.arctan2(np.abs(xy[:, 1]), np.abs(xy[:, 0]))


@dataclass
class StanceGeometry:
    """Rest foot positions (hip frame, ``(4, 3)``) and rest angles (``(4,)``)."""
    f_stand: np.ndarray
    phi_stand: np.ndarray

    @classmethod
    def from_positions(cls, f_stand, reference_xy=None) -> "StanceGeometry":
        f_stand = np.asarray(f_stand, dtype=float).reshape(4, 3)
        ref = f_stand if reference_xy is None else np.asarray(reference_xy, dtype=float)
        return cls(f_stand, stand_angles(ref))


@dataclass
class YawMemory:
    """Previous composed foot position per leg, hip frame, shape ``(..., 4, 3)``."""
    previous: np.ndarray

    @classmethod
    def initial(cls, stance: StanceGeometry, batch_shape=()) -> "YawMemory":
        prev = np.broadcast_to(stance.f_stand, tuple(batch_shape) + (4, 3)).copy()
        return cls(prev)


def compute_phi_arc(leg, yaw_memory: YawMemory, stance: StanceGeometry):
    """Direction the yaw curve is laid along for ``leg`` (``None`` = all four)."""
    g = yaw_memory.previous - stance.f_stand
    gx, gy = g[..., 0], g[..., 1]
    g_ang = np.where(np.hypot(gx, gy) < G_EPS, 0.0, np.arctan2(gy, gx))
    phi = g_ang + stance.phi_stand + 0.5 * np.pi
    if leg is None:
        return phi
    out = phi[..., leg_index(leg)]
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class FootTargets:
    """Hip-frame foot positions ``(..., 4, 3)`` plus a per-leg clamp flag."""
    positions: np.ndarray
    clamped: np.ndarray

    @property
    def flat(self) -> np.ndarray:
        return self.positions.reshape(self.positions.shape[:-2] + (12,))


def compose_foot_targets(cmd: MotionCommand, params: GaitParams, clock: PhaseClock,
                         stance: StanceGeometry, yaw_memory: YawMemory, t=None,
                         legs=None, phases=None) -> FootTargets:
    """Per-leg 3D foot targets ``f_tr + f_yaw + f_stand``.

    Command and gait fields may be arrays of shape ``(B,)`` to evaluate a
    batch. ``yaw_memory`` is updated in place with the result. If ``legs``
    (a stacked :class:`~quadgait.kinematics.LegGeometry`) is given, targets
    outside the reachable set are pulled back onto it and flagged.
    """
    if phases is None:
        phases = leg_phases(clock, t)

    def col(x):
        return np.asarray(x, dtype=float)[..., None]

    rho, omega_bar, l_span = col(cmd.rho), col(cmd.omega_bar), col(cmd.l_span)
    psi, delta = col(params.psi), col(params.delta)

    q_tr, z_tr = trajectory(phases, l_span, psi, delta)
    q_yaw, z_yaw = trajectory(phases, omega_bar, psi, delta)
    phi = compute_phi_arc(None, yaw_memory, stance)

    x = q_tr * np.cos(rho) + q_yaw * np.cos(phi)
    y = q_tr * np.sin(rho) + q_yaw * np.sin(phi)
    z = z_tr + z_yaw
    pos = np.stack(np.broadcast_arrays(x, y, z), axis=-1) + stance.f_stand
    yaw_memory.previous = pos.copy()

    clamped = np.zeros(pos.shape[:-1], dtype=bool)
    if legs is not None:
        from .kinematics import clamp_to_reach
        pos, clamped = clamp_to_reach(legs, pos)
    return FootTargets(pos, clamped)
