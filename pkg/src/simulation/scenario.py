"""
Scenario definition and JSON loading.

A scenario fixes everything a closed-loop run needs: the arm, the desired
sweep, the obstacle, the filter gains and the integration settings.
"""

import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional

import numpy as np

from config.ecbf_config import EFFORT_METRICS, END_TOL
from src.control.ctc import CtcGains
from src.control.trajectory import TrajectorySpec, sample_trajectory
from src.manipulator.kinematics import forward_kinematics
from src.manipulator.model import ConfigurationError, JointState, RobotModel, load_robot_model
from src.safety.cbf_filter import CbfParams, ClearanceSpec, Obstacle, safety_h

logger = logging.getLogger(__name__)

AUTO_CENTER = "auto"


class UnsafeInitialStateError(ValueError):
    """Raised when the initial end-effector position is not strictly inside the safe set."""


@dataclass(frozen=True, eq=False)
class Scenario:
    """One closed-loop experiment."""

    robot: RobotModel
    trajectory: TrajectorySpec
    obstacle: Obstacle
    clearance: ClearanceSpec
    cbf: CbfParams
    gains: CtcGains = field(default_factory=CtcGains)
    wrist_lock: bool = True
    dt: float = 1e-3
    duration: float = 12.0
    initial_state: Optional[JointState] = None
    effort_metric: str = EFFORT_METRICS['TAU_SAFE']
    cbf_enabled: bool = True
    end_tol: float = END_TOL

    def __post_init__(self):
        if self.initial_state is None:
            start = sample_trajectory(self.trajectory, 0.0)
            object.__setattr__(self, 'initial_state', JointState(start.q_d, np.zeros_like(start.q_d)))
        self.validate()

    def validate(self) -> None:
        """
        Check the scenario invariants.

        Raises:
            ConfigurationError: For inconsistent settings
            UnsafeInitialStateError: If h at the initial end-effector position is not positive
        """
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.duration < self.trajectory.duration:
            raise ConfigurationError(
                f"Run duration {self.duration} is shorter than the trajectory duration {self.trajectory.duration}"
            )
        if self.trajectory.n_joints != self.robot.n_joints:
            raise ConfigurationError(
                f"Trajectory has {self.trajectory.n_joints} joints, robot has {self.robot.n_joints}"
            )
        if self.effort_metric not in EFFORT_METRICS.values():
            raise ConfigurationError(
                f"effort_metric must be one of {sorted(EFFORT_METRICS.values())}, got {self.effort_metric!r}"
            )
        if self.end_tol < 0:
            raise ConfigurationError(f"end_tol must be non-negative, got {self.end_tol}")
        if self.wrist_lock and self.robot.n_joints < 4:
            raise ConfigurationError("wrist_lock needs an arm with at least four joints")
        self.initial_state.check(self.robot)

        h0 = safety_h(forward_kinematics(self.robot, self.initial_state.q), self.obstacle, self.clearance)
        if not h0 > 0:
            raise UnsafeInitialStateError(
                f"Initial state is outside the safe set: h(x0) = {h0:.6g} for r_o = {self.obstacle.radius}"
            )

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def with_params(self, kappa1: float, kappa2: float) -> "Scenario":
        return replace(self, cbf=CbfParams(kappa1, kappa2))

    def with_radius(self, r_o: float) -> "Scenario":
        return replace(self, obstacle=Obstacle(self.obstacle.center, r_o))

    def with_overrides(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "robot": self.robot.to_dict(),
            "trajectory": self.trajectory.to_dict(),
            "obstacle": self.obstacle.to_dict(),
            "clearance": self.clearance.to_dict(),
            "cbf": {"kappa1": self.cbf.kappa1, "kappa2": self.cbf.kappa2},
            "gains": self.gains.to_dict(),
            "wrist_lock": self.wrist_lock,
            "dt": self.dt,
            "duration": self.duration,
            "initial_state": {"q": self.initial_state.q.tolist(), "dq": self.initial_state.dq.tolist()},
            "effort_metric": self.effort_metric,
            "cbf_enabled": self.cbf_enabled,
            "end_tol": self.end_tol
        }


def mid_sweep_position(robot: RobotModel, trajectory: TrajectorySpec) -> np.ndarray:
    """Nominal end-effector position halfway through the sweep."""
    sample = sample_trajectory(trajectory, 0.5 * trajectory.duration)
    return forward_kinematics(robot, sample.q_d)


def _resolve_obstacle(data: Dict[str, Any], robot: RobotModel, trajectory: TrajectorySpec) -> Obstacle:
    if "radius" not in data:
        raise ConfigurationError("Missing 'radius' in obstacle block")
    center = data.get("center", AUTO_CENTER)
    if isinstance(center, str):
        if center != AUTO_CENTER:
            raise ConfigurationError(f"Obstacle center must be a 3-vector or '{AUTO_CENTER}', got {center!r}")
        center = mid_sweep_position(robot, trajectory)
    offset = np.asarray(data.get("center_offset", [0.0, 0.0, 0.0]), dtype=float)
    if offset.shape != (3,):
        raise ConfigurationError("center_offset must be a 3-vector")
    return Obstacle(np.asarray(center, dtype=float) + offset, float(data["radius"]))


def scenario_from_dict(data: Dict[str, Any], base_dir: str = ".", robot: Optional[RobotModel] = None) -> Scenario:
    """
    Build a Scenario from its JSON representation.

    Args:
        data: Parsed scenario file
        base_dir: Directory against which a relative robot_model path is resolved
        robot: Robot model to use instead of the one named in the file

    Returns:
        Scenario: Validated scenario
    """
    if robot is None:
        if "robot_model" not in data:
            raise ConfigurationError("Scenario needs a 'robot_model' path")
        robot = load_robot_model(os.path.join(base_dir, data["robot_model"]))

    for key in ("trajectory", "obstacle", "cbf"):
        if key not in data:
            raise ConfigurationError(f"Missing '{key}' block in scenario")

    trajectory = TrajectorySpec.from_dict(data["trajectory"])
    if trajectory.n_joints != robot.n_joints:
        raise ConfigurationError(
            f"home_posture has {trajectory.n_joints} entries, robot has {robot.n_joints} joints"
        )

    cbf = data["cbf"]
    initial = data.get("initial_state")
    initial_state = None
    if initial is not None:
        q = initial.get("q")
        if q is None:
            raise ConfigurationError("initial_state needs 'q'")
        initial_state = JointState(q, initial.get("dq", np.zeros(len(q))))

    clearance = data.get("clearance", {})
    return Scenario(
        robot=robot,
        trajectory=trajectory,
        obstacle=_resolve_obstacle(data["obstacle"], robot, trajectory),
        clearance=ClearanceSpec(float(clearance.get("r_ee", 0.1)), float(clearance.get("r_pad", 0.05))),
        cbf=CbfParams(float(cbf["kappa1"]), float(cbf["kappa2"])),
        gains=CtcGains.from_dict(data.get("gains", {})),
        wrist_lock=bool(data.get("wrist_lock", True)),
        dt=float(data.get("dt", 1e-3)),
        duration=float(data.get("duration", trajectory.duration)),
        initial_state=initial_state,
        effort_metric=data.get("effort_metric", EFFORT_METRICS['TAU_SAFE']),
        cbf_enabled=bool(data.get("cbf_enabled", True)),
        end_tol=float(data.get("end_tol", END_TOL))
    )


def load_scenario(path: str, robot: Optional[RobotModel] = None) -> Scenario:
    """
    Load a scenario file.

    Args:
        path: Path to the scenario JSON
        robot: Optional robot model overriding the file's robot_model

    Returns:
        Scenario: Validated scenario
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Scenario file not found: {path}")
    with open(path, 'r') as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Scenario file {path} is not valid JSON: {e}")
    logger.debug(f"Loaded scenario {path}")
    return scenario_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)), robot=robot)
