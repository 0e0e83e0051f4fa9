"""Lightweight quadruped simulator: one floating trunk, kinematic point feet.

Legs are massless for the dynamics (their link masses are lumped into the
trunk) and each foot is placed exactly at its commanded hip-frame target.
Feet touching the heightfield get a penalty spring-damper normal force and
a Coulomb-limited tangential force. Velocity-dependent contact forces are
integrated implicitly (a 6x6 solve per robot per step), the spring and
gravity explicitly; positions use the updated velocity.

Velocities are stored on the half step (leapfrog): ``v[n]`` is the velocity
over ``[t_n - dt, t_n]``. A body released from rest therefore starts with
``v = -g dt / 2``, see :func:`released_state`; with that convention free
fall reproduces ``g t^2 / 2`` exactly.

Every function works on a batch: arrays carry a leading robot axis ``B``.
Robots never interact, and each one's arithmetic is independent of the
batch it is stepped in.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SimulationDiverged
from .gait import PhaseClock, leg_phases
from .kinematics import RobotGeometry
from .terrain import TerrainField, TerrainStack, surface

FALL_ANGLE = np.deg2rad(60.0)


@dataclass
class SimConfig:
    dt: float = 0.01
    stiffness: float = 2000.0  # N/m per foot
    damping: float = 50.0  # N s/m per foot
    gravity: float = 9.81
    tangential_damping: float = 30.0  # N s/m, stick regularization
    friction_iterations: int = 4
    accel_includes_gravity: bool = True
    accel_in_g: bool = True  # observation reports specific force in units of g

    def __post_init__(self):
        if self.dt <= 0 or self.stiffness <= 0 or self.damping <= 0:
            raise ValueError("dt, stiffness and damping must be positive")


@dataclass
class RobotModel:
    base_mass: float = 1.1
    link_masses: np.ndarray = field(default_factory=lambda: np.full(8, 0.15))
    foot_friction: float = 1.15
    geometry: RobotGeometry = field(default_factory=RobotGeometry)
    trunk_size: tuple = (0.30, 0.15, 0.05)

    def __post_init__(self):
        self.link_masses = np.asarray(self.link_masses, dtype=float)
        if self.base_mass <= 0 or np.any(self.link_masses <= 0):
            raise ValueError("masses must be positive")
        if self.foot_friction <= 0:
            raise ValueError("friction must be positive")

    @property
    def total_mass(self) -> float:
        return float(self.base_mass + self.link_masses.sum())

    def inertia(self) -> np.ndarray:
        """Body-frame inertia about the trunk center.

        Solid box for the base; each leg's upper/lower link is a point mass
        a quarter / three quarters of the way down the rest leg.
        """
        lx, ly, lz = self.trunk_size
        m = self.base_mass
        inertia = np.diag([m * (ly ** 2 + lz ** 2), m * (lx ** 2 + lz ** 2), m * (lx ** 2 + ly ** 2)]) / 12.0
        hips = self.geometry.hip_offsets
        legs = self.geometry.stacked_legs()
        h = self.geometry.standing_height
        for i in range(4):
            for j, frac in enumerate((0.25, 0.75)):
                r = hips[i] + np.array([0.0, legs.side[i] * legs.l_abd[i], -frac * h])
                inertia += self.link_masses[2 * i + j] * (r @ r * np.eye(3) - np.outer(r, r))
        return inertia


@dataclass
class BodyState:
    """Trunk state. Orientation is a unit quaternion ``(w, x, y, z)``.

    ``linear_velocity`` is world frame (half-step, see module docs);
    ``angular_velocity`` and ``linear_acceleration`` (specific force, as an
    IMU reads it) are body frame. ``feet`` holds the current body-frame foot
    positions relative to the trunk center, shape ``(..., 4, 3)``.
    """
    position: np.ndarray
    orientation: np.ndarray
    linear_velocity: np.ndarray
    angular_velocity: np.ndarray
    linear_acceleration: np.ndarray
    feet: np.ndarray

    def copy(self) -> "BodyState":
        return BodyState(*(np.array(getattr(self, f)) for f in _STATE_FIELDS))

    def select(self, index) -> "BodyState":
        return BodyState(*(getattr(self, f)[index] for f in _STATE_FIELDS))

    @property
    def batched(self) -> bool:
        return np.ndim(self.position) == 2

    @classmethod
    def stack(cls, states) -> "BodyState":
        return cls(*(np.stack([getattr(s, f) for s in states]) for f in _STATE_FIELDS))


_STATE_FIELDS = ("position", "orientation", "linear_velocity", "angular_velocity",
                 "linear_acceleration", "feet")


# -- rotations -------------------------------------------------------------

def quat_to_matrix(q):
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def quat_multiply(a, b):
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def quat_from_rotvec(rv):
    angle = np.sqrt(rv[..., 0] ** 2 + rv[..., 1] ** 2 + rv[..., 2] ** 2)
    half = 0.5 * angle
    # sin(x/2)/x with its series near zero
    k = np.where(angle > 1e-8, np.sin(half) / np.where(angle > 1e-8, angle, 1.0), 0.5 - angle ** 2 / 48.0)
    return np.concatenate([np.cos(half)[..., None], rv * k[..., None]], axis=-1)


def quat_from_euler(roll=0.0, pitch=0.0, yaw=0.0):
    cr, sr = np.cos(0.5 * roll), np.sin(0.5 * roll)
    cp, sp = np.cos(0.5 * pitch), np.sin(0.5 * pitch)
    cy, sy = np.cos(0.5 * yaw), np.sin(0.5 * yaw)
    return np.stack([
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    ], axis=-1)


def euler_angles(q):
    """Roll, pitch, yaw (ZYX convention) of quaternion(s) ``q``."""
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    roll = np.arctan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y))
    pitch = np.arcsin(np.clip(2 * (w * y - z * x), -1.0, 1.0))
    yaw = np.arctan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z))
    return roll, pitch, yaw


def _rotate(R, v):
    """``R @ v`` for ``R (B,3,3)`` and ``v (B,...,3)``.

    Written out elementwise (never a BLAS call), so a robot's result does
    not depend on the batch it sits in.
    """
    R = R.reshape(R.shape[:1] + (1,) * (v.ndim - 2) + (3, 3))
    return np.stack([R[..., i, 0] * v[..., 0] + R[..., i, 1] * v[..., 1] + R[..., i, 2] * v[..., 2]
                     for i in range(3)], axis=-1)


def _rotate_t(R, v):
    return _rotate(np.swapaxes(R, -1, -2), v)


def _cross(a, b):
    return np.stack([
        a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
        a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
        a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
    ], axis=-1)


def _skew(r):
    z = np.zeros(r.shape[:-1])
    return np.stack([
        np.stack([z, -r[..., 2], r[..., 1]], axis=-1),
        np.stack([r[..., 2], z, -r[..., 0]], axis=-1),
        np.stack([-r[..., 1], r[..., 0], z], axis=-1),
    ], axis=-2)


def _matmul3(A, B):
    return A[..., :, 0, None] * B[..., None, 0, :] + A[..., :, 1, None] * B[..., None, 1, :] \
        + A[..., :, 2, None] * B[..., None, 2, :]


# -- batched physical parameters ------------------------------------------

@dataclass
class MassProperties:
    """Per-robot arrays derived from :class:`RobotModel` (leading axis B)."""
    mass: np.ndarray
    inertia: np.ndarray
    friction: np.ndarray
    hips: np.ndarray
    trunk_size: tuple

    @classmethod
    def from_models(cls, models, terrain_friction=None) -> "MassProperties":
        models = list(models)
        mu = np.array([m.foot_friction for m in models], dtype=float)
        if terrain_friction is not None:
            mu = mu * np.asarray(terrain_friction, dtype=float)
        return cls(
            mass=np.array([m.total_mass for m in models]),
            inertia=np.stack([m.inertia() for m in models]),
            friction=mu,
            hips=models[0].geometry.hip_offsets,
            trunk_size=models[0].trunk_size,
        )

    def subset(self, index) -> "MassProperties":
        return replace(self, mass=self.mass[index], inertia=self.inertia[index], friction=self.friction[index])


def _as_stack(field):
    if isinstance(field, TerrainStack):
        return field
    return TerrainStack([field])


# -- stepping --------------------------------------------------------------

def step_batch(state: BodyState, props: MassProperties, terrain: TerrainStack,
               targets: np.ndarray, cfg: SimConfig):
    """Advance every robot in the batch by one step.

    ``targets`` are hip-frame foot positions ``(B, 4, 3)``. Returns the new
    state and the per-foot normal force magnitudes ``(B, 4)``. Non-finite
    results are left in place for the caller to detect.
    """
    dt, k, c, ct = cfg.dt, cfg.stiffness, cfg.damping, cfg.tangential_damping
    pos, quat, v = state.position, state.orientation, state.linear_velocity
    B = pos.shape[0]
    R = quat_to_matrix(quat)
    feet_new = props.hips + targets
    r = _rotate(R, feet_new)
    v_rel = _rotate(R, (feet_new - state.feet) / dt)
    w = _rotate(R, state.angular_velocity)
    foot_w = pos[:, None, :] + r

    with np.errstate(invalid="ignore"):
        inside = terrain.contains(foot_w[..., 0], foot_w[..., 1]) & np.all(np.isfinite(foot_w), axis=-1)
    if not np.all(inside):
        raise ValueError("foot left the terrain field")
    h, hx, hy = terrain.surface(foot_w[..., 0], foot_w[..., 1])
    inv = 1.0 / np.sqrt(1.0 + hx * hx + hy * hy)
    n = np.stack([-hx * inv, -hy * inv, inv], axis=-1)
    depth = (h - foot_w[..., 2]) * inv
    active = depth > 0.0

    I_w = _matmul3(_matmul3(R, props.inertia), np.swapaxes(R, -1, -2))
    M = np.zeros((B, 6, 6))
    M[:, 0, 0] = M[:, 1, 1] = M[:, 2, 2] = props.mass
    M[:, 3:, 3:] = I_w
    u = np.concatenate([v, w], axis=-1)

    gyro = -_cross(w, _rotate(I_w, w))
    base_force = np.zeros((B, 6))
    base_force[:, 2] = -props.mass * cfg.gravity
    base_force[:, 3:] = gyro
    rhs0 = (M @ u[..., None])[..., 0] + dt * base_force

    nn = n[..., :, None] * n[..., None, :]
    eye = np.eye(3)
    S = _skew(r)
    mu = props.friction[:, None]
    slip = np.zeros_like(active)
    f_slip = np.zeros_like(r)
    spring = (k * depth)[..., None] * n
    settled = np.zeros(B, dtype=bool)
    u_out, normal_out, active_out = np.zeros((B, 6)), np.zeros(active.shape), active.copy()

    # per foot D = a nn^T + b I, so every product below is a reweighting of these
    nnS = _matmul3(nn, S)
    Snn = _matmul3(S, nn)
    SnnS = _matmul3(Snn, S)
    SS = _matmul3(S, S)
    nnv = _rotate_d(nn, v_rel)

    for _ in range(max(cfg.friction_iterations, 1)):
        stick = active & ~slip
        b = ct * stick * active
        a = c * active - b
        a4, b4 = a[..., None, None], b[..., None, None]
        A = M.copy()
        A[:, :3, :3] += dt * ((a4 * nn).sum(axis=1) + b.sum(axis=1)[:, None, None] * eye)
        A[:, :3, 3:] -= dt * (a4 * nnS + b4 * S).sum(axis=1)
        A[:, 3:, :3] += dt * (a4 * Snn + b4 * S).sum(axis=1)
        A[:, 3:, 3:] -= dt * (a4 * SnnS + b4 * SS).sum(axis=1)
        F0 = (spring - a[..., None] * nnv - b[..., None] * v_rel + f_slip) * active[..., None]
        rhs = rhs0.copy()
        rhs[:, :3] += dt * F0.sum(axis=1)
        rhs[:, 3:] += dt * _cross(r, F0).sum(axis=1)
        u_new = np.linalg.solve(A, rhs[..., None])[..., 0]

        v_foot = u_new[:, None, :3] + _cross(u_new[:, None, 3:], r) + v_rel
        vn = np.sum(v_foot * n, axis=-1)
        normal = k * depth - c * vn
        vt = v_foot - vn[..., None] * n
        t_stick = -ct * vt
        t_mag = np.sqrt(np.sum(t_stick * t_stick, axis=-1))
        new_active = active & (normal > 0.0)
        new_slip = slip | (new_active & (t_mag > mu * normal))
        vt_mag = np.sqrt(np.sum(vt * vt, axis=-1))
        # newly slipping contacts push along the force stick would have needed
        direction = np.where((slip & (vt_mag > 1e-12))[..., None], -vt / np.maximum(vt_mag, 1e-300)[..., None],
                             t_stick / np.maximum(t_mag, 1e-300)[..., None])
        f_slip = np.where(new_slip[..., None], (mu * np.maximum(normal, 0.0))[..., None] * direction, 0.0)
        # each robot iterates until its own contact set settles, whatever else is in the batch
        live = ~settled
        u_out[live], normal_out[live], active_out[live] = u_new[live], normal[live], new_active[live]
        settled |= ~(np.any(new_active != active, axis=1) | np.any(new_slip != slip, axis=1))
        active, slip = new_active, new_slip
        if np.all(settled):
            break

    u_new, normal, active = u_out, normal_out, active_out
    normal_force = np.where(active, np.maximum(normal, 0.0), 0.0)
    v_new, w_new = u_new[:, :3], u_new[:, 3:]
    pos_new = pos + dt * v_new
    q_new = quat_multiply(quat_from_rotvec(w_new * dt), quat)
    q_new = q_new / np.sqrt(np.sum(q_new * q_new, axis=-1, keepdims=True))
    R_new = quat_to_matrix(q_new)
    accel = (v_new - v) / dt
    accel[:, 2] += cfg.gravity
    new_state = BodyState(
        position=pos_new,
        orientation=q_new,
        linear_velocity=v_new,
        angular_velocity=_rotate_t(R_new, w_new),
        linear_acceleration=_rotate_t(R_new, accel),
        feet=feet_new,
    )
    return new_state, normal_force


def _rotate_d(D, v):
    """``D @ v`` for per-foot matrices ``D (B,4,3,3)`` and vectors ``v (B,4,3)``."""
    return D[..., 0] * v[..., None, 0] + D[..., 1] * v[..., None, 1] + D[..., 2] * v[..., None, 2]


def step(state: BodyState, model, field, foot_targets, cfg: SimConfig = None) -> BodyState:
    """One simulator step for a single robot (or a batch, if ``state`` is batched).

    ``model`` is a :class:`RobotModel` (or :class:`MassProperties` for a
    batch) and ``field`` a :class:`TerrainField` or :class:`TerrainStack`.
    Raises :class:`SimulationDiverged` on a non-finite result.
    """
    cfg = cfg or SimConfig()
    targets = getattr(foot_targets, "positions", foot_targets)
    single = not state.batched
    if single:
        state = state.select(np.newaxis)
        targets = np.asarray(targets)[None]
    props = model if isinstance(model, MassProperties) else MassProperties.from_models(
        [model], None if isinstance(field, TerrainStack) else [field.friction])
    new, _ = step_batch(state, props, _as_stack(field), targets, cfg)
    if not _finite(new).all():
        raise SimulationDiverged("simulator state became non-finite")
    return new.select(0) if single else new


def _finite(state: BodyState):
    ok = np.ones(state.position.shape[:-1], dtype=bool)
    for f in _STATE_FIELDS:
        arr = getattr(state, f)
        ok &= np.all(np.isfinite(arr.reshape(arr.shape[:ok.ndim] + (-1,))), axis=-1)
    return ok


# -- initial states, observation, falls -------------------------------------

def standing_state(model: RobotModel, stance, cfg: SimConfig = None, field=None,
                   xy=(0.0, 0.0), yaw: float = 0.0, feet=None) -> BodyState:
    """Level trunk at the static equilibrium height above its feet.

    ``feet`` are hip-frame foot positions ``(4, 3)`` (default: the rest
    pose). Starting a gait from its own first targets avoids a step-0 jump.
    On uneven ground the trunk is placed above the mean terrain height under
    the feet, so some feet start slightly in the air or in the ground.
    """
    cfg = cfg or SimConfig()
    hip_feet = stance.f_stand if feet is None else np.asarray(feet, dtype=float)
    feet = model.geometry.hip_offsets + hip_feet
    q = quat_from_euler(0.0, 0.0, yaw)
    R = quat_to_matrix(q[None])[0]
    base = 0.0
    if field is not None:
        foot_xy = (R @ feet.T).T[:, :2] + np.asarray(xy, dtype=float)
        base = float(np.mean(surface(field, foot_xy[:, 0], foot_xy[:, 1])[0]))
    sag = model.total_mass * cfg.gravity / (4 * cfg.stiffness)
    z = base - float(np.mean(hip_feet[:, 2])) - sag
    return BodyState(
        position=np.array([xy[0], xy[1], z], dtype=float),
        orientation=q,
        linear_velocity=np.zeros(3),
        angular_velocity=np.zeros(3),
        linear_acceleration=np.array([0.0, 0.0, cfg.gravity]),
        feet=feet.copy(),
    )


def released_state(position, model: RobotModel, stance, cfg: SimConfig = None,
                   orientation=None) -> BodyState:
    """Trunk at rest at ``position`` with nothing holding it (half-step velocity set)."""
    cfg = cfg or SimConfig()
    return BodyState(
        position=np.asarray(position, dtype=float),
        orientation=np.array([1.0, 0.0, 0.0, 0.0]) if orientation is None else np.asarray(orientation, float),
        linear_velocity=np.array([0.0, 0.0, 0.5 * cfg.gravity * cfg.dt]),
        angular_velocity=np.zeros(3),
        linear_acceleration=np.zeros(3),
        feet=model.geometry.hip_offsets + stance.f_stand,
    )


def observe(state: BodyState, clock: PhaseClock = None, t=None, cfg: SimConfig = None,
            phases=None) -> np.ndarray:
    """Observation ``[roll, pitch, omega(3), accel(3), S_FL, S_FR, S_BL, S_BR]``.

    Leg phases are mapped from [0, 2) to [-1, 1). With
    ``cfg.accel_includes_gravity`` off, gravity is removed from the
    accelerometer reading; with ``cfg.accel_in_g`` it is divided by g, so a
    level robot at rest reads (0, 0, 1).
    """
    cfg = cfg or SimConfig()
    roll, pitch, _ = euler_angles(state.orientation)
    accel = np.asarray(state.linear_acceleration, dtype=float)
    if not cfg.accel_includes_gravity:
        R = quat_to_matrix(np.asarray(state.orientation))
        accel = accel - cfg.gravity * R[..., 2, :]
    if cfg.accel_in_g:
        accel = accel / cfg.gravity
    if phases is None:
        phases = leg_phases(clock, t)
    phases = np.broadcast_to(phases, np.shape(roll) + (4,))
    return np.concatenate([
        np.stack([roll, pitch], axis=-1),
        state.angular_velocity,
        accel,
        phases - 1.0,
    ], axis=-1)


def trunk_probe_points(trunk_size) -> np.ndarray:
    """Bottom-face corners and center of the trunk box, body frame."""
    lx, ly, lz = (0.5 * s for s in trunk_size)
    return np.array([[lx, ly, -lz], [lx, -ly, -lz], [-lx, ly, -lz], [-lx, -ly, -lz], [0.0, 0.0, -lz]])


def detect_fall(state: BodyState, field, trunk_size=(0.30, 0.15, 0.05), limit: float = FALL_ANGLE):
    """True where roll or pitch exceeds ``limit`` or the trunk's underside touches terrain."""
    roll, pitch, _ = euler_angles(state.orientation)
    tilted = (np.abs(roll) > limit) | (np.abs(pitch) > limit)
    single = not state.batched
    pos = state.position[None] if single else state.position
    q = state.orientation[None] if single else state.orientation
    stack = _as_stack(field)
    if single and len(stack) != 1:
        raise ValueError("single state needs a single terrain")
    grounded = np.zeros(pos.shape[0], dtype=bool)
    # only robots whose trunk could reach the highest point of their field need a lookup
    near = np.flatnonzero(pos[:, 2] - 0.5 * float(np.sum(np.asarray(trunk_size))) <= stack.peak)
    if near.size:
        pts = pos[near, None, :] + _rotate(quat_to_matrix(q[near]), np.broadcast_to(
            trunk_probe_points(trunk_size), (near.size, 5, 3)))
        sub = stack if near.size == len(stack) else stack.subset(near)
        inside = sub.contains(pts[..., 0], pts[..., 1])
        px = np.where(inside, pts[..., 0], sub.bounds[0])
        py = np.where(inside, pts[..., 1], sub.bounds[2])
        h, _, _ = sub.surface(px, py)
        grounded[near] = np.any(inside & (pts[..., 2] <= h), axis=-1)
    out = tilted | (grounded[0] if single else grounded)
    return bool(out) if single else out


def mechanical_energy(state: BodyState, model: RobotModel, field: TerrainField, cfg: SimConfig = None) -> float:
    """Kinetic + gravitational + contact-spring energy of a single robot."""
    cfg = cfg or SimConfig()
    m = model.total_mass
    v, w = state.linear_velocity, state.angular_velocity
    kinetic = 0.5 * m * v @ v + 0.5 * w @ model.inertia() @ w
    R = quat_to_matrix(state.orientation[None])[0]
    feet = state.position + state.feet @ R.T
    h, hx, hy = surface(field, feet[:, 0], feet[:, 1])
    depth = np.maximum((h - feet[:, 2]) / np.sqrt(1 + hx * hx + hy * hy), 0.0)
    return float(kinetic + m * cfg.gravity * state.position[2] + 0.5 * cfg.stiffness * np.sum(depth ** 2))
