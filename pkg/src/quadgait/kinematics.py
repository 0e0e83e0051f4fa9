"""Closed-form kinematics for a 3-DOF leg: hip abduction, hip pitch, knee.

Hip frame: x forward, y left, z up. Abduction rotates about x; hip pitch and
knee rotate about the abducted leg's lateral axis. With all joints at zero
the leg hangs straight down, offset sideways by ``l_abd``:

    foot = (0, side * l_abd, -(l_upper + l_lower))

Positive knee swings the foot forward, so the knee sits behind the hip-foot
line ("knee backward"); IK always returns that branch (knee >= 0).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, OutOfReachError
from .gait import LEGS, StanceGeometry, stand_angles

_REACH_TOL = 1e-12


@dataclass
class LegGeometry:
    """Link lengths in meters. ``side`` is +1 for a left leg, -1 for a right leg.

    Fields may be ``(4,)`` arrays to describe all legs at once (see
    :meth:`RobotGeometry.stacked_legs`).
    """
    l_abd: float = 0.04
    l_upper: float = 0.11
    l_lower: float = 0.11
    side: float = 1.0

    def __post_init__(self):
        for name in ("l_abd", "l_upper", "l_lower"):
            if np.any(np.asarray(getattr(self, name)) <= 0):
                raise ConfigError(f"leg length {name} must be positive")

    @property
    def max_reach(self):
        return self.l_upper + self.l_lower

    @property
    def min_reach(self):
        return np.abs(self.l_upper - self.l_lower)

    def mirrored(self) -> "LegGeometry":
        return LegGeometry(self.l_abd, self.l_upper, self.l_lower, -np.asarray(self.side))


@dataclass
class JointLimits:
    abduction: tuple = (-0.5 * np.pi, 0.5 * np.pi)
    hip_pitch: tuple = (-np.pi, np.pi)
    knee: tuple = (0.0, np.pi)


@dataclass
class JointAngles:
    abduction: np.ndarray
    hip_pitch: np.ndarray
    knee: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.abduction, self.hip_pitch, self.knee), axis=-1)

    def within(self, limits: JointLimits, tol: float = 1e-12) -> bool:
        ok = True
        for name in ("abduction", "hip_pitch", "knee"):
            lo, hi = getattr(limits, name)
            v = np.asarray(getattr(self, name))
            ok &= bool(np.all((v >= lo - tol) & (v <= hi + tol)))
        return ok


@dataclass
class RobotGeometry:
    """Hip placement (body length x width), per-leg geometry and standing height.

    Defaults are plumbing values sized so a 0.2 m stand is comfortably inside
    the 0.22 m reach.
    """
    body_length: float = 0.25
    body_width: float = 0.15
    legs: tuple = None
    standing_height: float = 0.2

    def __post_init__(self):
        if self.legs is None:
            self.legs = tuple(LegGeometry(side=s) for s in (1.0, -1.0, 1.0, -1.0))
        if len(self.legs) != 4:
            raise ConfigError("robot needs exactly four legs")
        if self.body_length <= 0 or self.body_width <= 0 or self.standing_height <= 0:
            raise ConfigError("body dimensions and standing height must be positive")

    @property
    def hip_offsets(self) -> np.ndarray:
        """Hip positions in the body frame, ``(4, 3)`` in ``LEGS`` order."""
        hx, hy = 0.5 * self.body_length, 0.5 * self.body_width
        return np.array([[hx, hy, 0.0], [hx, -hy, 0.0], [-hx, hy, 0.0], [-hx, -hy, 0.0]])

    def stacked_legs(self) -> LegGeometry:
        return LegGeometry(
            np.array([leg.l_abd for leg in self.legs], dtype=float),
            np.array([leg.l_upper for leg in self.legs], dtype=float),
            np.array([leg.l_lower for leg in self.legs], dtype=float),
            np.array([leg.side for leg in self.legs], dtype=float),
        )


def forward_kinematics(geom: LegGeometry, angles: JointAngles, limits: JointLimits = None):
    """Foot position in the hip frame, shape ``broadcast(angles) + (3,)``."""
    if limits is not None and not angles.within(limits):
        raise ValueError("joint angles outside limits")
    a, h, k = angles.abduction, angles.hip_pitch, angles.knee
    xp = geom.l_upper * np.sin(h) + geom.l_lower * np.sin(h + k)
    zp = -(geom.l_upper * np.cos(h) + geom.l_lower * np.cos(h + k))
    y0 = geom.side * geom.l_abd
    ca, sa = np.cos(a), np.sin(a)
    y = y0 * ca - zp * sa
    z = y0 * sa + zp * ca
    return np.stack(np.broadcast_arrays(xp, y, z), axis=-1)


def _leg_plane(geom: LegGeometry, target):
    target = np.asarray(target, dtype=float)
    x, y, z = target[..., 0], target[..., 1], target[..., 2]
    d2 = y * y + z * z - geom.l_abd ** 2
    return x, y, z, d2


def clamp_to_reach(geom: LegGeometry, target):
    """Pull targets onto the reachable set.

    Returns ``(clamped, flag)``; ``flag`` marks entries that moved. Points
    inside the abduction cylinder are pushed out radially in the yz plane;
    the leg-plane distance is then clipped to ``[|l_u - l_l|, l_u + l_l]``.
    """
    target = np.asarray(target, dtype=float)
    x, y, z, d2 = _leg_plane(geom, target)
    r_yz = np.hypot(y, z)
    inside = d2 < 0.0
    # degenerate yz = 0: push straight down
    safe = r_yz > 0.0
    scale_yz = np.where(inside, geom.l_abd * (1.0 + _REACH_TOL) / np.where(safe, r_yz, 1.0), 1.0)
    y = np.where(inside & ~safe, 0.0, y * scale_yz)
    z = np.where(inside & ~safe, -geom.l_abd * (1.0 + _REACH_TOL), z * scale_yz)
    zp = -np.sqrt(np.maximum(y * y + z * z - geom.l_abd ** 2, 0.0))
    r = np.hypot(x, zp)
    r_max = geom.max_reach * (1.0 - _REACH_TOL)
    r_min = geom.min_reach * (1.0 + _REACH_TOL)
    r_new = np.clip(r, r_min, r_max)
    moved = inside | (r != r_new)
    s = np.where(r > 0.0, r_new / np.where(r > 0.0, r, 1.0), 1.0)
    x_new = np.where(r > 0.0, x * s, 0.0)
    zp_new = np.where(r > 0.0, zp * s, -r_new)
    # map the adjusted leg-plane depth back through the current abduction
    a = np.arctan2(z, y) - np.arctan2(zp, geom.side * geom.l_abd)
    y0 = geom.side * geom.l_abd
    y_new = y0 * np.cos(a) - zp_new * np.sin(a)
    z_new = y0 * np.sin(a) + zp_new * np.cos(a)
    out = np.stack(np.broadcast_arrays(x_new, y_new, z_new), axis=-1)
    out = np.where(moved[..., None], out, target)
    return out, moved


def reachable(geom: LegGeometry, target):
    x, _, _, d2 = _leg_plane(geom, target)
    zp = -np.sqrt(np.maximum(d2, 0.0))
    r = np.hypot(x, zp)
    return (d2 >= -_REACH_TOL * geom.l_abd ** 2) & (r <= geom.max_reach * (1 + _REACH_TOL)) & (r >= geom.min_reach * (1 - _REACH_TOL))


def inverse_kinematics(geom: LegGeometry, target) -> JointAngles:
    """Joint angles reaching ``target`` on the knee-backward branch.

    Raises :class:`OutOfReachError` (carrying the nearest reachable point)
    if any target cannot be reached.
    """
    target = np.asarray(target, dtype=float)
    ok = reachable(geom, target)
    if not np.all(ok):
        nearest, _ = clamp_to_reach(geom, target)
        raise OutOfReachError("foot target outside leg reach", nearest=nearest)
    x, y, z, d2 = _leg_plane(geom, target)
    zp = -np.sqrt(np.maximum(d2, 0.0))
    y0 = geom.side * geom.l_abd
    abduction = np.arctan2(z, y) - np.arctan2(zp, y0)
    abduction = (abduction + np.pi) % (2 * np.pi) - np.pi
    lu, ll = geom.l_upper, geom.l_lower
    r2 = x * x + zp * zp
    cos_knee = np.clip((r2 - lu * lu - ll * ll) / (2 * lu * ll), -1.0, 1.0)
    knee = np.arccos(cos_knee)
    hip = np.arctan2(x, -zp) - np.arctan2(ll * np.sin(knee), lu + ll * np.cos(knee))
    return JointAngles(abduction, hip, knee)


def default_stand_pose(geom: RobotGeometry) -> StanceGeometry:
    """Rest feet straight below each hip (plus abduction offset) at standing height.

    Rest angles come from the feet's position relative to the body center,
    since in the hip frame every rest foot lies on the y axis.
    """
    legs = geom.stacked_legs()
    h = geom.standing_height
    if np.any(h > legs.max_reach * (1 + _REACH_TOL)) or np.any(h < legs.min_reach):
        raise ConfigError(f"standing height {h} m is not reachable by every leg")
    f_stand = np.stack([np.zeros(4), legs.side * legs.l_abd, np.full(4, -h)], axis=-1)
    body_xy = geom.hip_offsets + f_stand
    return StanceGeometry(f_stand, stand_angles(body_xy))
