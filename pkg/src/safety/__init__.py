"""
Safety Package

Dense active-set QP solver and the exponential control barrier function filter
built on it.
"""

from .qp_solver import ActiveSetSolver, QpProblem, QpSolution, QpStatus, kkt_residuals, solve
from .cbf_filter import (
    CbfDiagnostics,
    CbfFilter,
    CbfParams,
    ClearanceSpec,
    FilterFault,
    Obstacle,
    assemble_constraint,
    filter_torque,
    lie_derivative_1,
    project_batch,
    safety_h
)

__all__ = [
    'ActiveSetSolver', 'QpProblem', 'QpSolution', 'QpStatus', 'kkt_residuals', 'solve',
    'CbfDiagnostics', 'CbfFilter', 'CbfParams', 'ClearanceSpec', 'FilterFault', 'Obstacle',
    'assemble_constraint', 'filter_torque', 'lie_derivative_1', 'project_batch', 'safety_h'
]
