"""Bezier-curve trot gaits, linear gait-modulation policies and D² randomized ARS training."""
from .ars import ARSConfig, ARSTrainer, ars_update, train_d2gmbc, train_lockstep
from .campaign import CampaignReport, EvalCampaignSpec, bucket_report, run_eval_campaign
from .config import Config, load_config
from .errors import ConfigError, FormatError, OutOfReachError, PolicyError, SimulationDiverged
from .gait import LEGS, GaitParams, MotionCommand, PhaseClock, compose_foot_targets, leg_phases, trajectory
from .kinematics import RobotGeometry, forward_kinematics, inverse_kinematics
from .policy import ActionBounds, policy_forward, step_reward
from .randomization import D2Distribution, D2Sample, apply_d2, nominal_sample, sample_d2
from .rollout import RolloutResult, World, episode_rollout, run_batch
from .sim import BodyState, RobotModel, SimConfig, step
from .terrain import TerrainField, generate_terrain

__version__ = "0.1.0"
