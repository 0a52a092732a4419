"""
Rigid-body dynamics of serial arms: M(q) q_ddot + bias(q, q_dot) = tau.

The bias term is the total non-inertial joint torque (velocity products,
viscous friction and gravity). Both terms come from one Newton-Euler pass in
the world frame: link wrenches from velocity_pass are mapped to joint torques
through the per-link centre-of-mass Jacobians, and the same Jacobians give
M = sum_i m_i Jv_i^T Jv_i + Jw_i^T I_i Jw_i. Every per-link quantity is an
array over all links at once, and over a batch of states when the inputs
carry leading axes.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.manipulator.kinematics import (
    chain_frames,
    cross_rows,
    jacobian_from_frames,
    velocity_pass
)
from src.manipulator.model import JointState, RobotModel


def _joint_major(per_link: np.ndarray) -> np.ndarray:
    """(..., link, joint, 3) -> (..., joint, 3 * link), so sums over links become matmuls."""
    swapped = np.swapaxes(per_link, -3, -2)
    return swapped.reshape(swapped.shape[:-2] + (swapped.shape[-2] * 3,))


def _apply(matrix: np.ndarray, vector: np.ndarray) -> np.ndarray:
    return (matrix @ vector[..., np.newaxis])[..., 0]


def _mass_and_bias(model: RobotModel, rotations: np.ndarray, origins: np.ndarray,
                   dq: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Mass matrix, bias torque and end-effector J_dot q_dot from one set of frames.

    Returns:
        tuple: (M (..., n, n), bias (..., n), J_dot q_dot (..., 3))
    """
    arrays = model.arrays
    lower = arrays.lower[:, :, np.newaxis]
    axes = rotations[..., :-1, :, 2]
    link_rot = rotations[..., 1:, :, :]

    com_offsets = _apply(link_rot, arrays.com)
    com_pos = origins[..., 1:, :] + com_offsets
    inertia = link_rot @ arrays.inertia @ np.swapaxes(link_rot, -1, -2)

    # (link, joint, xyz) Jacobians of every centre of mass
    levers = com_pos[..., :, np.newaxis, :] - origins[..., np.newaxis, :-1, :]
    jac_v = cross_rows(axes[..., np.newaxis, :, :], levers) * lower
    jac_w = axes[..., np.newaxis, :, :] * lower
    stacked_v = _joint_major(jac_v)
    stacked_w = _joint_major(jac_w)

    mass = ((stacked_v * np.repeat(arrays.mass, 3)) @ np.swapaxes(stacked_v, -1, -2)
            + _joint_major(jac_w @ inertia) @ np.swapaxes(stacked_w, -1, -2))
    mass = 0.5 * (mass + np.swapaxes(mass, -1, -2))

    omega, alpha, acc = velocity_pass(rotations, origins, dq)
    acc_com = (acc + cross_rows(alpha, com_offsets)
               + cross_rows(omega, cross_rows(omega, com_offsets)) - model.gravity)
    forces = arrays.mass[:, np.newaxis] * acc_com
    moments = _apply(inertia, alpha) + cross_rows(omega, _apply(inertia, omega))
    flat = forces.shape[:-2] + (-1,)
    bias = (_apply(stacked_v, forces.reshape(flat))
            + _apply(stacked_w, moments.reshape(flat))
            + model.friction * dq)
    return mass, bias, acc[..., -1, :].copy()


def inverse_dynamics(model: RobotModel, state: JointState, qdd) -> np.ndarray:
    """
    Joint torques realising the given accelerations.

    Args:
        model: Robot model
        state: Joint positions and velocities
        qdd: Joint accelerations (rad/s^2)

    Returns:
        np.ndarray: tau = M(q) qdd + bias(q, dq)
    """
    state.check(model)
    qdd = model.check_vector(qdd, "qdd")
    rotations, origins = chain_frames(model, state.q)
    mass, bias, _ = _mass_and_bias(model, rotations, origins, state.dq)
    return mass @ qdd + bias


def mass_matrix(model: RobotModel, q) -> np.ndarray:
    """Joint-space inertia matrix M(q), symmetric positive-definite."""
    q = model.check_vector(q, "q")
    rotations, origins = chain_frames(model, q)
    return _mass_and_bias(model, rotations, origins, np.zeros_like(q))[0]


def bias_forces(model: RobotModel, state: JointState) -> np.ndarray:
    """
    Total non-inertial torque C(q, dq) dq + D dq + g(q).

    Args:
        model: Robot model
        state: Joint positions and velocities

    Returns:
        np.ndarray: Torque such that tau = M(q) qdd + bias_forces
    """
    state.check(model)
    rotations, origins = chain_frames(model, state.q)
    return _mass_and_bias(model, rotations, origins, state.dq)[1]


def gravity_torques(model: RobotModel, q) -> np.ndarray:
    """Gravity torque vector g(q): the bias at rest."""
    q = model.check_vector(q, "q")
    return bias_forces(model, JointState(q, np.zeros_like(q)))


def accelerations_unchecked(model: RobotModel, q: np.ndarray, dq: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """forward_dynamics without validation, for (..., n) float arrays; used inside the integrator."""
    rotations, origins = chain_frames(model, q)
    mass, bias, _ = _mass_and_bias(model, rotations, origins, dq)
    return np.linalg.solve(mass, (tau - bias)[..., np.newaxis])[..., 0]


def forward_dynamics(model: RobotModel, state: JointState, tau) -> np.ndarray:
    """Joint accelerations qdd = M^-1 (tau - bias)."""
    state.check(model)
    tau = model.check_vector(tau, "tau")
    return accelerations_unchecked(model, state.q, state.dq, tau)


def kinetic_energy(model: RobotModel, state: JointState) -> float:
    """0.5 dq^T M(q) dq."""
    state.check(model)
    return float(0.5 * state.dq @ mass_matrix(model, state.q) @ state.dq)


@dataclass(frozen=True, eq=False)
class DynamicsTerms:
    """
    Every model quantity the controller and safety filter need at one state,
    or at a batch of states stacked along leading axes.

    mass_inv is computed from mass when not given, once per state, and shared
    by the integrator and the filter.
    """

    mass: np.ndarray
    bias: np.ndarray
    jacobian: np.ndarray
    jdot_qdot: np.ndarray
    ee_pos: np.ndarray
    ee_vel: np.ndarray
    mass_inv: np.ndarray = None

    def __post_init__(self):
        if self.mass_inv is None:
            inverse = np.linalg.inv(self.mass)
            object.__setattr__(self, 'mass_inv', 0.5 * (inverse + np.swapaxes(inverse, -1, -2)))

    def accelerations(self, tau: np.ndarray) -> np.ndarray:
        return _apply(self.mass_inv, tau - self.bias)


def terms_unchecked(model: RobotModel, q: np.ndarray, dq: np.ndarray) -> DynamicsTerms:
    """compute_terms for (..., n) float arrays that are already known to be valid."""
    rotations, origins = chain_frames(model, q)
    mass, bias, jdot_qdot = _mass_and_bias(model, rotations, origins, dq)
    jac = jacobian_from_frames(rotations, origins)
    return DynamicsTerms(
        mass=mass,
        bias=bias,
        jacobian=jac,
        jdot_qdot=jdot_qdot,
        ee_pos=origins[..., -1, :].copy(),
        ee_vel=_apply(jac, dq)
    )


def compute_terms(model: RobotModel, state: JointState) -> DynamicsTerms:
    """
    Evaluate M, M^-1, bias, J, J_dot q_dot and end-effector position/velocity
    from a single set of link frames.
    """
    state.check(model)
    return terms_unchecked(model, state.q, state.dq)
