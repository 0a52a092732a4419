"""
Forward kinematics and end-effector Jacobians for standard-DH serial arms.

All quantities are expressed in the world (base) frame. Only the linear
end-effector velocity is modelled; orientation is not part of the safety
function and is left out.

The frame-level helpers accept joint arrays with leading batch axes, so one
call evaluates many arm states at once.
"""

from typing import Tuple

import numpy as np

from src.manipulator.model import JointState, RobotModel

_IDENTITY = np.eye(3)


def cross_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product along the last axis of two (..., 3) arrays."""
    ax, ay, az = a[..., 0], a[..., 1], a[..., 2]
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    return np.stack((ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx), axis=-1)


def link_transforms(model: RobotModel, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Local transform of every link, Rz(theta) Tz(d) Tx(a) Rx(alpha).

    Args:
        model: Robot model
        q: Joint angles (rad) of shape (..., n), added to the theta offsets

    Returns:
        Tuple of rotations (..., n, 3, 3) and translations (..., n, 3), each
        from frame i-1 to frame i
    """
    arrays = model.arrays
    theta = q + arrays.dh_theta_offset
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = arrays.cos_alpha, arrays.sin_alpha

    rotations = np.empty(theta.shape + (3, 3))
    rotations[..., 0, 0] = ct
    rotations[..., 0, 1] = -st * ca
    rotations[..., 0, 2] = st * sa
    rotations[..., 1, 0] = st
    rotations[..., 1, 1] = ct * ca
    rotations[..., 1, 2] = -ct * sa
    rotations[..., 2, 0] = 0.0
    rotations[..., 2, 1] = sa
    rotations[..., 2, 2] = ca
    shifts = np.stack((arrays.dh_a * ct, arrays.dh_a * st, np.broadcast_to(arrays.dh_d, theta.shape)), axis=-1)
    return rotations, shifts


def chain_frames(model: RobotModel, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """link_frames without input validation; q may carry leading batch axes."""
    local, shifts = link_transforms(model, q)
    n = model.n_joints
    batch = q.shape[:-1]
    rotations = np.empty(batch + (n + 1, 3, 3))
    origins = np.empty(batch + (n + 1, 3))
    rotations[..., 0, :, :] = _IDENTITY
    origins[..., 0, :] = 0.0
    for i in range(n):
        step = rotations[..., i, :, :] @ shifts[..., i, :, np.newaxis]
        origins[..., i + 1, :] = origins[..., i, :] + step[..., 0]
        rotations[..., i + 1, :, :] = rotations[..., i, :, :] @ local[..., i, :, :]
    return rotations, origins


def link_frames(model: RobotModel, q) -> Tuple[np.ndarray, np.ndarray]:
    """
    World rotations and origins of every DH frame.

    Index 0 is the base frame; index i is the frame at the distal end of link i.
    Joint i rotates about the z axis of frame i-1.

    Returns:
        Tuple of rotations (n+1, 3, 3) and origins (n+1, 3)
    """
    q = model.check_vector(q, "q")
    return chain_frames(model, q)


def forward_kinematics(model: RobotModel, q) -> np.ndarray:
    """End-effector position (m): origin of the last DH frame."""
    _, origins = link_frames(model, q)
    return origins[-1].copy()


def jacobian_from_frames(rotations: np.ndarray, origins: np.ndarray) -> np.ndarray:
    """Linear-velocity Jacobian columns z_{i-1} x (o_n - o_{i-1}), shape (..., 3, n)."""
    axes = rotations[..., :-1, :, 2]
    arms = origins[..., -1:, :] - origins[..., :-1, :]
    return np.swapaxes(cross_rows(axes, arms), -1, -2)


def jacobian(model: RobotModel, q) -> np.ndarray:
    """
    Linear-velocity Jacobian of the end-effector.

    Args:
        model: Robot model
        q: Joint angles

    Returns:
        np.ndarray: 3 x n matrix with eta_dot = J q_dot
    """
    rotations, origins = link_frames(model, q)
    return jacobian_from_frames(rotations, origins)


def velocity_pass(rotations: np.ndarray, origins: np.ndarray,
                  dq: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Link velocities and velocity-product accelerations with q_ddot = 0.

    Every recursion of the outward Newton-Euler pass is a running sum, so each
    is one cumulative sum over the links.

    Returns:
        Tuple (omega, alpha, acc), each (..., n, 3): angular velocity and
        angular acceleration of link i, and linear acceleration of frame i+1's
        origin for a fixed base
    """
    axes = rotations[..., :-1, :, 2]
    spin = axes * dq[..., np.newaxis]
    omega = np.cumsum(spin, axis=-2)
    omega_prev = np.empty_like(omega)
    omega_prev[..., 0, :] = 0.0
    omega_prev[..., 1:, :] = omega[..., :-1, :]
    alpha = np.cumsum(cross_rows(omega_prev, spin), axis=-2)

    arms = origins[..., 1:, :] - origins[..., :-1, :]
    acc = np.cumsum(cross_rows(alpha, arms) + cross_rows(omega, cross_rows(omega, arms)), axis=-2)
    return omega, alpha, acc


def jdot_qdot(model: RobotModel, state: JointState) -> np.ndarray:
    """
    End-effector linear acceleration for the current velocities with q_ddot = 0.

    Computed exactly by propagating angular velocity, angular acceleration and
    origin acceleration down the chain.

    Args:
        model: Robot model
        state: Joint positions and velocities

    Returns:
        np.ndarray: J_dot(q) q_dot in m/s^2
    """
    state.check(model)
    rotations, origins = link_frames(model, state.q)
    _, _, acc = velocity_pass(rotations, origins, state.dq)
    return acc[-1].copy()
