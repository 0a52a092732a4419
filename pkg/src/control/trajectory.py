"""
Desired joint trajectory: a single joint swept with quintic time scaling while
the other joints hold a home posture.
"""

from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from src.manipulator.model import ConfigurationError


@dataclass(frozen=True, eq=False)
class TrajectorySpec:
    """Sweep of one joint from theta_start to theta_end over duration seconds."""

    sweep_joint: int
    theta_start: float
    theta_end: float
    duration: float
    home_posture: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'home_posture', np.asarray(self.home_posture, dtype=float).reshape(-1))
        if not self.duration > 0:
            raise ConfigurationError(f"Trajectory duration must be positive, got {self.duration}")
        if not 0 <= self.sweep_joint < self.home_posture.size:
            raise ConfigurationError(
                f"sweep_joint {self.sweep_joint} outside 0..{self.home_posture.size - 1}"
            )

    @property
    def n_joints(self) -> int:
        return self.home_posture.size

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrajectorySpec":
        try:
            return cls(
                sweep_joint=int(data["sweep_joint"]),
                theta_start=float(data["theta_start"]),
                theta_end=float(data["theta_end"]),
                duration=float(data["duration"]),
                home_posture=data["home_posture"]
            )
        except KeyError as e:
            raise ConfigurationError(f"Missing {e} in trajectory block")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sweep_joint": self.sweep_joint,
            "theta_start": self.theta_start,
            "theta_end": self.theta_end,
            "duration": self.duration,
            "home_posture": self.home_posture.tolist()
        }


@dataclass(frozen=True, eq=False)
class TrajectorySample:
    """Desired joint position, velocity and acceleration at one instant."""

    q_d: np.ndarray
    dq_d: np.ndarray
    ddq_d: np.ndarray


def quintic_scaling(tau: float):
    """
    s(tau) = 10 tau^3 - 15 tau^4 + 6 tau^5 and its first two derivatives.

    Zero velocity and acceleration at both ends.
    """
    s = tau ** 3 * (10.0 - 15.0 * tau + 6.0 * tau ** 2)
    ds = 30.0 * tau ** 2 * (1.0 - 2.0 * tau + tau ** 2)
    dds = 60.0 * tau * (1.0 - 3.0 * tau + 2.0 * tau ** 2)
    return s, ds, dds


def sample_trajectory(spec: TrajectorySpec, t: float) -> TrajectorySample:
    """
    Evaluate the desired trajectory at time t (clamped to the end state).

    Args:
        spec: Trajectory description
        t: Time in seconds, t >= 0

    Returns:
        TrajectorySample: q_d, dq_d, ddq_d
    """
    tau = min(max(t / spec.duration, 0.0), 1.0)
    s, ds, dds = quintic_scaling(tau)
    delta = spec.theta_end - spec.theta_start

    q_d = spec.home_posture.copy()
    dq_d = np.zeros_like(q_d)
    ddq_d = np.zeros_like(q_d)

    j = spec.sweep_joint
    q_d[j] = spec.theta_start + delta * s
    dq_d[j] = delta * ds / spec.duration
    ddq_d[j] = delta * dds / spec.duration ** 2
    return TrajectorySample(q_d=q_d, dq_d=dq_d, ddq_d=ddq_d)
