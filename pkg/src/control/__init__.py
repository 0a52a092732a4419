"""
Control Package

Desired joint trajectories and the computed-torque nominal controller.
"""

from .trajectory import TrajectorySample, TrajectorySpec, sample_trajectory
from .ctc import CtcGains, ctc_torque, ctc_torque_arrays, ctc_torque_from_terms

__all__ = [
    'TrajectorySample', 'TrajectorySpec', 'sample_trajectory',
    'CtcGains', 'ctc_torque', 'ctc_torque_arrays', 'ctc_torque_from_terms'
]
