"""
Robot model types for serial revolute arms described by standard DH parameters.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Sequence

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_GRAVITY = (0.0, 0.0, -9.81)
# Number of distal joints that form the wrist
WRIST_JOINTS = 3


class ConfigurationError(ValueError):
    """Raised for invalid model, scenario or search configuration."""


@dataclass(frozen=True, eq=False)
class LinkSpec:
    """
    One link of a serial arm.

    Standard (distal) DH convention: frame i sits at the far end of link i and
    the link transform is Rz(theta) Tz(d) Tx(a) Rx(alpha). The centre of mass
    and inertia (about the centre of mass) are expressed in frame i.
    """

    dh_a: float
    dh_alpha: float
    dh_d: float
    dh_theta_offset: float
    mass: float
    com: np.ndarray
    inertia: np.ndarray

    def __post_init__(self):
        com = np.asarray(self.com, dtype=float).reshape(3)
        inertia = np.asarray(self.inertia, dtype=float).reshape(3, 3)
        object.__setattr__(self, 'com', com)
        object.__setattr__(self, 'inertia', inertia)
        self.validate()

    def validate(self) -> None:
        """Check mass positivity and physical consistency of the inertia."""
        if not self.mass > 0:
            raise ConfigurationError(f"Link mass must be positive, got {self.mass}")
        if not np.all(np.isfinite(self.com)) or not np.all(np.isfinite(self.inertia)):
            raise ConfigurationError("Link centre of mass and inertia must be finite")
        if not np.allclose(self.inertia, self.inertia.T, atol=1e-12):
            raise ConfigurationError("Link inertia must be symmetric")

        moments = np.linalg.eigvalsh(self.inertia)
        if moments[0] < -1e-12:
            raise ConfigurationError(f"Link inertia must be positive semidefinite, eigenvalues {moments}")
        a, b, c = moments
        if a + b < c - 1e-12:
            raise ConfigurationError(f"Principal moments {moments} violate the triangle inequality")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.dh_a,
            "alpha": self.dh_alpha,
            "d": self.dh_d,
            "theta_offset": self.dh_theta_offset,
            "mass": self.mass,
            "com": self.com.tolist(),
            "inertia": self.inertia.tolist()
        }


@dataclass(frozen=True, eq=False)
class LinkArrays:
    """Link parameters stacked into arrays, one row per link."""

    dh_a: np.ndarray
    dh_d: np.ndarray
    dh_theta_offset: np.ndarray
    cos_alpha: np.ndarray
    sin_alpha: np.ndarray
    mass: np.ndarray
    com: np.ndarray
    inertia: np.ndarray
    # lower[i, j] is True when joint j moves link i
    lower: np.ndarray


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Kinematic and inertial description of an n-joint serial arm."""

    links: Sequence[LinkSpec]
    gravity: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_GRAVITY))
    friction: np.ndarray = None
    name: str = "robot"

    def __post_init__(self):
        object.__setattr__(self, 'links', tuple(self.links))
        object.__setattr__(self, 'gravity', np.asarray(self.gravity, dtype=float).reshape(3))
        friction = np.zeros(len(self.links)) if self.friction is None else self.friction
        object.__setattr__(self, 'friction', np.asarray(friction, dtype=float).reshape(-1))
        self.validate()

    @property
    def n_joints(self) -> int:
        return len(self.links)

    @cached_property
    def arrays(self) -> LinkArrays:
        alpha = np.array([link.dh_alpha for link in self.links])
        return LinkArrays(
            dh_a=np.array([link.dh_a for link in self.links]),
            dh_d=np.array([link.dh_d for link in self.links]),
            dh_theta_offset=np.array([link.dh_theta_offset for link in self.links]),
            cos_alpha=np.cos(alpha),
            sin_alpha=np.sin(alpha),
            mass=np.array([link.mass for link in self.links]),
            com=np.array([link.com for link in self.links]),
            inertia=np.array([link.inertia for link in self.links]),
            lower=np.tril(np.ones((self.n_joints, self.n_joints), dtype=bool))
        )

    def validate(self) -> None:
        if self.n_joints < 1:
            raise ConfigurationError("A robot model needs at least one link")
        if self.friction.shape != (self.n_joints,):
            raise ConfigurationError(
                f"friction has {self.friction.size} entries, expected {self.n_joints}"
            )
        if np.any(self.friction < 0):
            raise ConfigurationError("Joint friction coefficients must be non-negative")

    def check_vector(self, values, name: str = "q") -> np.ndarray:
        """
        Convert a joint-space vector and verify its length.

        Args:
            values: Array-like joint vector
            name: Name used in the error message

        Returns:
            np.ndarray: Float vector of length n_joints
        """
        vector = np.asarray(values, dtype=float)
        if vector.shape != (self.n_joints,):
            raise ConfigurationError(
                f"{name} has shape {vector.shape}, expected ({self.n_joints},)"
            )
        return vector

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "n_joints": self.n_joints,
            "gravity": self.gravity.tolist(),
            "friction": self.friction.tolist(),
            "links": [link.to_dict() for link in self.links]
        }


@dataclass(frozen=True, eq=False)
class JointState:
    """Joint positions (rad) and velocities (rad/s)."""

    q: np.ndarray
    dq: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(-1)
        dq = np.asarray(self.dq, dtype=float).reshape(-1)
        if q.shape != dq.shape:
            raise ConfigurationError(f"q and dq lengths differ: {q.size} vs {dq.size}")
        object.__setattr__(self, 'q', q)
        object.__setattr__(self, 'dq', dq)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.dq)))

    def check(self, model: RobotModel) -> "JointState":
        model.check_vector(self.q, "q")
        model.check_vector(self.dq, "dq")
        return self


def _require(data: Dict[str, Any], key: str, where: str):
    if key not in data:
        raise ConfigurationError(f"Missing '{key}' in {where}")
    return data[key]


def robot_model_from_dict(data: Dict[str, Any]) -> RobotModel:
    """
    Build a RobotModel from its JSON representation.

    Args:
        data: Parsed robot model file

    Returns:
        RobotModel: The validated model
    """
    raw_links = _require(data, "links", "robot model")
    links: List[LinkSpec] = []
    for index, raw in enumerate(raw_links):
        where = f"links[{index}]"
        links.append(LinkSpec(
            dh_a=float(_require(raw, "a", where)),
            dh_alpha=float(_require(raw, "alpha", where)),
            dh_d=float(_require(raw, "d", where)),
            dh_theta_offset=float(raw.get("theta_offset", 0.0)),
            mass=float(_require(raw, "mass", where)),
            com=raw.get("com", [0.0, 0.0, 0.0]),
            inertia=raw.get("inertia", np.zeros((3, 3)).tolist())
        ))

    n_joints = data.get("n_joints", len(links))
    if n_joints != len(links):
        raise ConfigurationError(f"n_joints is {n_joints} but {len(links)} links are listed")

    return RobotModel(
        links=links,
        gravity=data.get("gravity", DEFAULT_GRAVITY),
        friction=data.get("friction"),
        name=data.get("name", "robot")
    )


def load_robot_model(path: str) -> RobotModel:
    """
    Load a robot model file.

    Args:
        path: Path to the JSON model file

    Returns:
        RobotModel: The validated model
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Robot model file not found: {path}")

    with open(path, 'r', encoding='utf-8') as f:
        data = json.load(f)

    model = robot_model_from_dict(data)
    logger.debug(f"Loaded {model.n_joints}-joint model '{model.name}' from {path}")
    return model
