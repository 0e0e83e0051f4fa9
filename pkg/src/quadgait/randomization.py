"""Per-episode dynamics and terrain randomization (the D² sample)."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .sim import RobotModel
from .terrain import TerrainField, generate_terrain

N_LINKS = 8


@dataclass
class D2Distribution:
    """Randomization ranges.

    Masses are Gaussian with standard deviation ``spread * nominal``, clipped
    to ``clip_sigma`` standard deviations and kept positive. Friction and
    terrain magnitude are uniform. The ``nominal_*`` fields define the single
    environment used by fixed-mode training.
    """
    base_mass: float = 1.1
    base_mass_spread: float = 0.2
    link_mass: float = 0.15
    link_mass_spread: float = 0.2
    friction: tuple = (0.8, 1.5)
    magnitude: tuple = (0.0, 0.08)
    clip_sigma: float = 3.0
    nominal_friction: float = 1.15
    nominal_magnitude: float = 0.04
    nominal_terrain_seed: int = 0

    def __post_init__(self):
        self.friction = tuple(float(v) for v in self.friction)
        self.magnitude = tuple(float(v) for v in self.magnitude)
        if self.base_mass <= 0 or self.link_mass <= 0:
            raise ConfigError("nominal masses must be positive")
        if self.base_mass_spread < 0 or self.link_mass_spread < 0 or self.clip_sigma < 0:
            raise ConfigError("mass spreads and clip width must be non-negative")
        lo, hi = self.friction
        if not 0 < lo <= hi:
            raise ConfigError("friction range must satisfy 0 < low <= high")
        lo, hi = self.magnitude
        if not 0 <= lo <= hi:
            raise ConfigError("terrain magnitude range must satisfy 0 <= low <= high")
        if self.nominal_friction <= 0 or self.nominal_magnitude < 0:
            raise ConfigError("nominal friction must be positive and nominal magnitude non-negative")


@dataclass
class D2Sample:
    base_mass: float
    link_masses: np.ndarray
    friction: float
    mesh_magnitude: float
    terrain_seed: int

    def __post_init__(self):
        self.link_masses = np.asarray(self.link_masses, dtype=float)

    def as_row(self) -> dict:
        """Flat dict for CSV logs."""
        row = {"base_mass": self.base_mass}
        row.update({f"link_mass_{i}": float(m) for i, m in enumerate(self.link_masses)})
        row.update(friction=self.friction, mesh_magnitude=self.mesh_magnitude, terrain_seed=self.terrain_seed)
        return row

    def __eq__(self, other):
        if not isinstance(other, D2Sample):
            return NotImplemented
        return (self.base_mass == other.base_mass and np.array_equal(self.link_masses, other.link_masses)
                and self.friction == other.friction and self.mesh_magnitude == other.mesh_magnitude
                and self.terrain_seed == other.terrain_seed)


def _clipped_gaussian(rng, nominal, spread, clip_sigma, size=None):
    sd = spread * nominal
    x = rng.normal(nominal, sd, size=size)
    lo = max(nominal - clip_sigma * sd, np.nextafter(0.0, 1.0))
    return np.clip(x, lo, nominal + clip_sigma * sd)


def sample_d2(dist: D2Distribution, seed) -> D2Sample:
    """One randomized environment, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    base = float(_clipped_gaussian(rng, dist.base_mass, dist.base_mass_spread, dist.clip_sigma))
    links = _clipped_gaussian(rng, dist.link_mass, dist.link_mass_spread, dist.clip_sigma, size=N_LINKS)
    friction = float(rng.uniform(*dist.friction))
    magnitude = float(rng.uniform(*dist.magnitude))
    terrain_seed = int(rng.integers(2 ** 31 - 1))
    return D2Sample(base, links, friction, magnitude, terrain_seed)


def nominal_sample(dist: D2Distribution, magnitude: float = None) -> D2Sample:
    """The fixed environment: nominal masses, ``nominal_friction``, ``nominal_magnitude``."""
    return D2Sample(
        base_mass=dist.base_mass,
        link_masses=np.full(N_LINKS, dist.link_mass),
        friction=dist.nominal_friction,
        mesh_magnitude=dist.nominal_magnitude if magnitude is None else magnitude,
        terrain_seed=dist.nominal_terrain_seed,
    )


@dataclass
class TerrainLayout:
    """How a terrain field is laid out around an episode start at the origin.

    The field spans ``behind`` meters back and ``ahead`` meters forward in x,
    and ``half_width`` to each side in y.
    """
    cell: float = 0.2
    behind: float = 10.0
    ahead: float = 30.0
    half_width: float = 15.0

    def __post_init__(self):
        if self.cell <= 0 or self.behind <= 0 or self.ahead <= 0 or self.half_width <= 0:
            raise ConfigError("terrain layout sizes must be positive")

    def sized_for(self, steps: int, dt: float, max_speed: float) -> "TerrainLayout":
        """Same layout with ``ahead`` stretched to cover ``steps`` at ``max_speed``."""
        reach = self.behind + max_speed * steps * dt
        return replace(self, ahead=max(self.ahead, reach))

    def generate(self, magnitude: float, seed: int, friction: float = 1.0) -> TerrainField:
        extent = (self.behind + self.ahead, 2 * self.half_width)
        return generate_terrain(magnitude, extent, self.cell, seed,
                                origin=(-self.behind, -self.half_width), friction=friction)


def apply_d2(sample: D2Sample, model: RobotModel, layout: TerrainLayout = None):
    """Model with the sample's masses and friction, plus its terrain.

    Friction is carried by the model; the returned terrain has friction 1.
    """
    layout = layout or TerrainLayout()
    new_model = replace(model, base_mass=float(sample.base_mass),
                        link_masses=np.array(sample.link_masses, dtype=float),
                        foot_friction=float(sample.friction))
    return new_model, layout.generate(sample.mesh_magnitude, sample.terrain_seed)
