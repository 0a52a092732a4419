"""
Computed-torque nominal controller.

tau = bias(q, dq) + M(q) (ddq_d - kd (dq - dq_d) - kp (q - q_d)), which turns
the closed loop into e_ddot + kd e_dot + kp e = 0 for the joint error e.
"""

from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from src.control.trajectory import TrajectorySample
from src.manipulator.dynamics import DynamicsTerms, compute_terms
from src.manipulator.model import ConfigurationError, JointState, RobotModel


@dataclass(frozen=True)
class CtcGains:
    """Scalar PD gains shared by all joints."""

    kp: float = 100.0
    kd: float = 20.0

    def __post_init__(self):
        if not (self.kp > 0 and self.kd > 0):
            raise ConfigurationError(f"CTC gains must be positive, got kp={self.kp}, kd={self.kd}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CtcGains":
        return cls(kp=float(data.get("kp", 100.0)), kd=float(data.get("kd", 20.0)))

    def to_dict(self) -> Dict[str, Any]:
        return {"kp": self.kp, "kd": self.kd}


def ctc_torque_arrays(terms: DynamicsTerms, q: np.ndarray, dq: np.ndarray,
                      sample: TrajectorySample, gains: CtcGains) -> np.ndarray:
    """Computed torque for (..., n) joint arrays; batched terms give one torque per state."""
    qdd_ref = sample.ddq_d - gains.kd * (dq - sample.dq_d) - gains.kp * (q - sample.q_d)
    return terms.bias + (terms.mass @ qdd_ref[..., np.newaxis])[..., 0]


def ctc_torque_from_terms(terms: DynamicsTerms, state: JointState,
                          sample: TrajectorySample, gains: CtcGains) -> np.ndarray:
    """Computed torque using already evaluated dynamics terms."""
    return ctc_torque_arrays(terms, state.q, state.dq, sample, gains)


def ctc_torque(model: RobotModel, state: JointState, sample: TrajectorySample,
               gains: CtcGains) -> np.ndarray:
    """
    Nominal computed-torque control.

    Args:
        model: Robot model
        state: Measured joint state
        sample: Desired trajectory sample
        gains: PD gains

    Returns:
        np.ndarray: Joint torque tau_nom
    """
    model.check_vector(sample.q_d, "q_d")
    return ctc_torque_from_terms(compute_terms(model, state), state, sample, gains)
