"""
Manipulator Package

Kinematics and rigid-body dynamics for serial revolute arms described by
standard DH parameters.
"""

from .model import ConfigurationError, JointState, LinkSpec, RobotModel, load_robot_model
from .kinematics import forward_kinematics, jacobian, jdot_qdot
from .dynamics import (
    DynamicsTerms,
    bias_forces,
    compute_terms,
    forward_dynamics,
    gravity_torques,
    inverse_dynamics,
    kinetic_energy,
    mass_matrix
)

__all__ = [
    'ConfigurationError', 'JointState', 'LinkSpec', 'RobotModel', 'load_robot_model',
    'forward_kinematics', 'jacobian', 'jdot_qdot',
    'DynamicsTerms', 'bias_forces', 'compute_terms', 'forward_dynamics',
    'gravity_torques', 'inverse_dynamics', 'kinetic_energy', 'mass_matrix'
]
