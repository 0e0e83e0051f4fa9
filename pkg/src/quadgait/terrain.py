"""Heightfield terrain on a uniform lattice with bilinear interpolation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatError

FORMAT_TAG = "quadgait-terrain"
FORMAT_VERSION = 1


@dataclass
class TerrainField:
    """Heights ``(ny, nx)`` over x in ``[x0, x0 + (nx-1) cell]`` and likewise for y."""
    heights: np.ndarray
    cell: float
    origin: tuple = (0.0, 0.0)
    friction: float = 1.0
    seed: int = 0
    magnitude: float = 0.0

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=float)
        if self.heights.ndim != 2 or min(self.heights.shape) < 2:
            raise ConfigError("terrain needs a 2D lattice of at least 2x2 heights")
        if self.cell <= 0:
            raise ConfigError("terrain cell size must be positive")
        if not np.all(np.isfinite(self.heights)):
            raise ConfigError("terrain heights must be finite")
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @property
    def extent(self) -> tuple:
        ny, nx = self.heights.shape
        return ((nx - 1) * self.cell, (ny - 1) * self.cell)

    @property
    def bounds(self) -> tuple:
        ex, ey = self.extent
        x0, y0 = self.origin
        return (x0, x0 + ex, y0, y0 + ey)

    def contains(self, x, y):
        x_lo, x_hi, y_lo, y_hi = self.bounds
        return (x >= x_lo) & (x <= x_hi) & (y >= y_lo) & (y <= y_hi)


def generate_terrain(magnitude: float, extent, cell: float, seed: int,
                     origin=None, friction: float = 1.0) -> TerrainField:
    """Random heightfield: every vertex uniform in ``[-magnitude/2, magnitude/2]``.

    ``extent`` is a side length or an ``(x, y)`` pair. By default the field is
    centered on the world origin.
    """
    ex, ey = (extent, extent) if np.isscalar(extent) else extent
    if ex <= 0 or ey <= 0 or cell <= 0:
        raise ConfigError("terrain extent and cell size must be positive")
    if magnitude < 0:
        raise ConfigError("terrain magnitude must be non-negative")
    nx = int(round(ex / cell)) + 1
    ny = int(round(ey / cell)) + 1
    if origin is None:
        origin = (-0.5 * (nx - 1) * cell, -0.5 * (ny - 1) * cell)
    if magnitude == 0:
        heights = np.zeros((ny, nx))
    else:
        rng = np.random.default_rng(seed)
        heights = rng.uniform(-0.5 * magnitude, 0.5 * magnitude, size=(ny, nx))
    return TerrainField(heights, cell, origin, friction, seed, magnitude)


def _locate(field: TerrainField, x, y):
    if not np.all(field.contains(x, y)):
        raise ValueError("terrain query outside the field extent")
    ny, nx = field.heights.shape
    fx = (np.asarray(x, dtype=float) - field.origin[0]) / field.cell
    fy = (np.asarray(y, dtype=float) - field.origin[1]) / field.cell
    ix = np.clip(np.floor(fx).astype(np.intp), 0, nx - 2)
    iy = np.clip(np.floor(fy).astype(np.intp), 0, ny - 2)
    return ix, iy, fx - ix, fy - iy


def _bilinear(h00, h10, h01, h11, u, v):
    h = (h00 * (1 - u) + h10 * u) * (1 - v) + (h01 * (1 - u) + h11 * u) * v
    dhdu = (h10 - h00) * (1 - v) + (h11 - h01) * v
    dhdv = (h01 - h00) * (1 - u) + (h11 - h10) * u
    return h, dhdu, dhdv


def height_at(field: TerrainField, x, y):
    """Bilinear height; raises ``ValueError`` outside the field."""
    ix, iy, u, v = _locate(field, x, y)
    H = field.heights
    h, _, _ = _bilinear(H[iy, ix], H[iy, ix + 1], H[iy + 1, ix], H[iy + 1, ix + 1], u, v)
    return float(h) if np.ndim(h) == 0 else h


def surface(field: TerrainField, x, y):
    """Height and its x/y slopes at each query point."""
    ix, iy, u, v = _locate(field, x, y)
    H = field.heights
    h, du, dv = _bilinear(H[iy, ix], H[iy, ix + 1], H[iy + 1, ix], H[iy + 1, ix + 1], u, v)
    return h, du / field.cell, dv / field.cell


class TerrainStack:
    """Several same-shaped fields queried together; row ``b`` of a query uses field ``b``."""

    def __init__(self, fields, _heights=None):
        fields = list(fields)
        first = fields[0]
        for f in fields[1:]:
            if f.heights.shape != first.heights.shape or f.cell != first.cell or f.origin != first.origin:
                raise ValueError("stacked terrains must share lattice shape, cell and origin")
        self.fields = fields
        self.heights = np.stack([f.heights for f in fields]) if _heights is None else _heights
        self.peak = self.heights.reshape(len(fields), -1).max(axis=1)
        self.cell = first.cell
        self.origin = first.origin
        self.bounds = first.bounds

    def __len__(self):
        return len(self.fields)

    def subset(self, index) -> "TerrainStack":
        index = np.atleast_1d(index)
        return TerrainStack([self.fields[i] for i in index], self.heights[index])

    def contains(self, x, y):
        x_lo, x_hi, y_lo, y_hi = self.bounds
        return (x >= x_lo) & (x <= x_hi) & (y >= y_lo) & (y <= y_hi)

    def surface(self, x, y):
        """``x``, ``y`` have shape ``(B, ...)``; returns height and slopes."""
        if not np.all(self.contains(x, y)):
            raise ValueError("terrain query outside the field extent")
        _, ny, nx = self.heights.shape
        fx = (x - self.origin[0]) / self.cell
        fy = (y - self.origin[1]) / self.cell
        ix = np.clip(np.floor(fx).astype(np.intp), 0, nx - 2)
        iy = np.clip(np.floor(fy).astype(np.intp), 0, ny - 2)
        u, v = fx - ix, fy - iy
        b = np.arange(x.shape[0]).reshape((-1,) + (1,) * (x.ndim - 1))
        H = self.heights
        h, du, dv = _bilinear(H[b, iy, ix], H[b, iy, ix + 1], H[b, iy + 1, ix], H[b, iy + 1, ix + 1], u, v)
        return h, du / self.cell, dv / self.cell


def dump_terrain(field: TerrainField, path) -> None:
    """Plain-text grid: a few ``key value`` header lines, then row-major heights."""
    ny, nx = field.heights.shape
    with open(path, "w") as fh:
        fh.write(f"{FORMAT_TAG} {FORMAT_VERSION}\n")
        fh.write(f"extent {field.extent[0]!r} {field.extent[1]!r}\n")
        fh.write(f"cell {field.cell!r}\n")
        fh.write(f"seed {field.seed}\n")
        fh.write(f"origin {field.origin[0]!r} {field.origin[1]!r}\n")
        fh.write(f"magnitude {field.magnitude!r}\n")
        fh.write(f"friction {field.friction!r}\n")
        fh.write(f"shape {ny} {nx}\n")
        np.savetxt(fh, field.heights, fmt="%.17g")


def load_terrain(path) -> TerrainField:
    with open(path) as fh:
        tag = fh.readline().split()
        if len(tag) != 2 or tag[0] != FORMAT_TAG or int(tag[1]) != FORMAT_VERSION:
            raise FormatError(f"{path}: not a terrain dump")
        header = {}
        for _ in range(7):
            key, *vals = fh.readline().split()
            header[key] = vals
        heights = np.loadtxt(fh, ndmin=2)
    ny, nx = (int(v) for v in header["shape"])
    if heights.shape != (ny, nx):
        raise FormatError(f"{path}: expected {ny}x{nx} heights, found {heights.shape}")
    return TerrainField(
        heights,
        cell=float(header["cell"][0]),
        origin=tuple(float(v) for v in header["origin"]),
        friction=float(header["friction"][0]),
        seed=int(header["seed"][0]),
        magnitude=float(header["magnitude"][0]),
    )
