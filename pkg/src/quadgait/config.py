"""Key-value configuration files.

Format: ``[section]`` headers, then ``key = value`` lines where the value
is a Python literal (number, tuple, quoted or bare word). ``#`` and ``;``
start comments. Missing keys keep their defaults; unknown sections or keys
are errors, reported with the offending line.
"""
from __future__ import annotations

import ast
from dataclasses import dataclass, field, replace

import numpy as np

from .ars import MODES, ARSConfig
from .campaign import EvalCampaignSpec
from .errors import ConfigError
from .gait import MotionCommand
from .kinematics import LegGeometry, RobotGeometry
from .policy import ActionBounds
from .randomization import D2Distribution, TerrainLayout
from .rollout import World
from .sim import RobotModel, SimConfig


@dataclass
class Config:
    world: World = field(default_factory=World)
    ars: ARSConfig = field(default_factory=ARSConfig)
    dist: D2Distribution = field(default_factory=D2Distribution)
    campaign: EvalCampaignSpec = field(default_factory=EvalCampaignSpec)
    mode: str = "randomized"
    epochs: int = 200
    seed: int = 0


# section -> keys, in the order print-config writes them
SECTIONS = {
    "run": ("seed", "mode", "epochs"),
    "robot": ("body_length", "body_width", "standing_height", "l_abd", "l_upper", "l_lower", "trunk_size"),
    "sim": ("dt", "stiffness", "damping", "gravity", "tangential_damping", "friction_iterations",
            "accel_includes_gravity", "accel_in_g", "fall_angle_deg"),
    "gait": ("t_swing", "t_stance", "rho", "omega_bar", "l_span", "heading_gain", "heading_limit"),
    "bounds": ("psi", "delta", "residual"),
    "ars": ("directions", "step_size", "noise", "episode_steps", "discount", "std_floor"),
    "d2": ("base_mass", "base_mass_spread", "link_mass", "link_mass_spread", "friction", "magnitude",
           "clip_sigma", "nominal_friction", "nominal_magnitude", "nominal_terrain_seed"),
    "terrain": ("cell", "behind", "ahead", "half_width", "max_speed"),
    "eval": ("trials", "max_steps", "buckets", "chunk", "magnitude"),
}


def flatten(cfg: Config) -> dict:
    """``{section: {key: value}}`` for every configurable value."""
    w = cfg.world
    geom = w.model.geometry
    leg = geom.legs[0]
    out = {
        "run": dict(seed=cfg.seed, mode=cfg.mode, epochs=cfg.epochs),
        "robot": dict(body_length=geom.body_length, body_width=geom.body_width,
                      standing_height=geom.standing_height, l_abd=leg.l_abd, l_upper=leg.l_upper,
                      l_lower=leg.l_lower, trunk_size=tuple(w.model.trunk_size)),
        "sim": {k: getattr(w.sim, k) for k in SECTIONS["sim"] if k != "fall_angle_deg"},
        "gait": dict(t_swing=w.t_swing, t_stance=w.t_stance, rho=w.command.rho,
                     omega_bar=w.command.omega_bar, l_span=w.command.l_span,
                     heading_gain=w.heading_gain, heading_limit=w.heading_limit),
        "bounds": dict(psi=w.bounds.psi, delta=w.bounds.delta, residual=w.bounds.residual),
        "ars": {k: getattr(cfg.ars, k) for k in SECTIONS["ars"]},
        "d2": {k: getattr(cfg.dist, k) for k in SECTIONS["d2"]},
        "terrain": dict(cell=w.terrain.cell, behind=w.terrain.behind, ahead=w.terrain.ahead,
                        half_width=w.terrain.half_width, max_speed=w.max_speed),
        "eval": dict(trials=cfg.campaign.trials, max_steps=cfg.campaign.max_steps,
                     buckets=cfg.campaign.buckets, chunk=cfg.campaign.chunk, magnitude=cfg.campaign.magnitude),
    }
    out["sim"]["fall_angle_deg"] = float(np.rad2deg(w.fall_angle))
    return out


def build(values: dict) -> Config:
    """Inverse of :func:`flatten`; raises ``ConfigError``/``ValueError`` on invalid values."""
    run, rob, sim, gait = values["run"], values["robot"], values["sim"], values["gait"]
    if run["mode"] not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    legs = tuple(LegGeometry(rob["l_abd"], rob["l_upper"], rob["l_lower"], side) for side in (1.0, -1.0, 1.0, -1.0))
    geometry = RobotGeometry(rob["body_length"], rob["body_width"], legs, rob["standing_height"])
    dist = D2Distribution(**values["d2"])
    model = RobotModel(base_mass=dist.base_mass, link_masses=np.full(8, dist.link_mass),
                       foot_friction=dist.nominal_friction, geometry=geometry,
                       trunk_size=tuple(float(v) for v in rob["trunk_size"]))
    sim_cfg = SimConfig(**{k: v for k, v in sim.items() if k != "fall_angle_deg"})
    ter = dict(values["terrain"])
    max_speed = float(ter.pop("max_speed"))
    world = World(model=model, sim=sim_cfg, bounds=ActionBounds(**values["bounds"]),
                  command=MotionCommand(gait["rho"], gait["omega_bar"], gait["l_span"]),
                  t_swing=gait["t_swing"], t_stance=gait["t_stance"], terrain=TerrainLayout(**ter),
                  max_speed=max_speed, heading_gain=gait["heading_gain"], heading_limit=gait["heading_limit"],
                  fall_angle=float(np.deg2rad(sim["fall_angle_deg"])))
    world.clock()  # validates the timing
    campaign = EvalCampaignSpec(master_seed=int(run["seed"]), **values["eval"])
    return Config(world, ARSConfig(**values["ars"]), dist, campaign, run["mode"], int(run["epochs"]), int(run["seed"]))


def _literal(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        if text.replace("-", "").replace("_", "").isalnum():
            return text  # bare word, e.g. mode = fixed
        raise


def parse_config(text: str, source: str = "<config>") -> Config:
    values = flatten(Config())
    where = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{source}: malformed section header {raw.strip()!r}", line=lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"{source}: unknown section [{section}]", line=lineno)
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not key or not value:
            raise ConfigError(f"{source}: expected 'key = value', got {raw.strip()!r}", line=lineno)
        if section is None:
            raise ConfigError(f"{source}: key {key!r} outside any section", line=lineno)
        if key not in SECTIONS[section]:
            raise ConfigError(f"{source}: unknown key {key!r} in [{section}]", line=lineno)
        try:
            values[section][key] = _literal(value)
        except (ValueError, SyntaxError):
            raise ConfigError(f"{source}: cannot parse value {value!r} for {key}", line=lineno) from None
        where[(section, key)] = lineno
    try:
        return build(values)
    except (ConfigError, ValueError, TypeError) as exc:
        line = max(where.values()) if len(where) == 1 else None
        raise ConfigError(f"{source}: invalid configuration: {exc}", line=line) from None


def load_config(path=None) -> Config:
    """Configuration from ``path``; ``None`` gives all defaults."""
    if path is None:
        return Config()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def dump_config(cfg: Config) -> str:
    """Every value in the file format, readable back by :func:`parse_config`."""
    lines = []
    for section, values in flatten(cfg).items():
        lines.append(f"[{section}]")
        for key in SECTIONS[section]:
            v = values[key]
            if isinstance(v, np.generic):
                v = v.item()
            lines.append(f"{key} = {v!r}")
        lines.append("")
    return "\n".join(lines)


def with_seed(cfg: Config, seed: int) -> Config:
    return replace(cfg, seed=int(seed), campaign=replace(cfg.campaign, master_seed=int(seed)))
