"""Linear gait-modulation policy and the per-step reward."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PolicyError
from .gait import GaitParams

OBS_DIM = 12
ACT_DIM = 14
N_RESIDUALS = 12


@dataclass
class ActionBounds:
    """Remap ranges for the policy outputs (meters)."""
    psi: tuple = (0.005, 0.06)
    delta: tuple = (0.0, 0.02)
    residual: float = 0.01  # well under l_span, so residuals shape the trot without cancelling it

    def __post_init__(self):
        self.psi = tuple(float(v) for v in self.psi)
        self.delta = tuple(float(v) for v in self.delta)
        for name in ("psi", "delta"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo < hi:
                raise ConfigError(f"{name} range must satisfy 0 <= low < high")
        if self.residual <= 0:
            raise ConfigError("residual bound must be positive")

    @property
    def midpoint(self) -> GaitParams:
        return GaitParams(0.5 * sum(self.psi), 0.5 * sum(self.delta))


def zero_policy() -> np.ndarray:
    return np.zeros((OBS_DIM, ACT_DIM))


def raw_output(theta, obs) -> np.ndarray:
    """``theta^T o`` before clipping; ``theta (..., 12, 14)``, ``obs (..., 12)``."""
    theta = np.asarray(theta, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if theta.shape[-2:] != (OBS_DIM, ACT_DIM):
        raise PolicyError(f"policy matrix must be {OBS_DIM}x{ACT_DIM}, got {theta.shape[-2:]}")
    if obs.shape[-1] != OBS_DIM:
        raise PolicyError(f"observation must have {OBS_DIM} entries, got {obs.shape[-1]}")
    if not np.all(np.isfinite(obs)):
        raise PolicyError("observation contains non-finite values")
    # explicit sum over the observation axis keeps each row independent of batch size
    out = theta[..., 0, :] * obs[..., 0, None]
    for i in range(1, OBS_DIM):
        out = out + theta[..., i, :] * obs[..., i, None]
    return out


def _remap(u, lo, hi):
    return lo + 0.5 * (u + 1.0) * (hi - lo)


def policy_forward(theta, obs, bounds: ActionBounds = None):
    """Residuals ``(..., 12)`` (FL, FR, BL, BR xyz) and gait parameters.

    The raw output is clipped to [-1, 1]; the first 12 channels scale to
    ``±bounds.residual`` and the last two map affinely onto the psi and
    delta ranges.
    """
    bounds = bounds or ActionBounds()
    a = np.clip(raw_output(theta, obs), -1.0, 1.0)
    residuals = bounds.residual * a[..., :N_RESIDUALS]
    psi = _remap(a[..., N_RESIDUALS], *bounds.psi)
    delta = _remap(a[..., N_RESIDUALS + 1], *bounds.delta)
    return residuals, GaitParams(psi, delta)


def step_reward(dx, roll, pitch, omega):
    """``dx - 10 (|roll| + |pitch|) - 0.03 sum |omega|``."""
    omega = np.asarray(omega, dtype=float)
    return dx - 10.0 * (np.abs(roll) + np.abs(pitch)) - 0.03 * np.sum(np.abs(omega), axis=-1)


def heading_controller(yaw, gain: float, limit: float = np.inf):
    """Proportional yaw-step command ``-gain * yaw`` saturated at ``±limit``."""
    return np.clip(-gain * np.asarray(yaw, dtype=float), -limit, limit)
