"""
Exponential control barrier function filter for end-effector obstacle avoidance.

The safety function is h = |p_ee - c|^2 - r_m^2 with r_m = r_o + r_ee + r_pad.
h has relative degree two with respect to joint torque, so the filter enforces

    h_ddot + kappa2 h_dot + kappa1 h >= 0

on the closed loop with tau = tau_nom - tau_qp. Substituting the manipulator
dynamics gives one linear inequality A tau_qp <= b per obstacle, and the filter
returns the minimum-norm tau_qp that satisfies it.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from config.ecbf_config import FAULT_TYPES, QP_MAX_ITER, QP_TOL
from src.manipulator.dynamics import DynamicsTerms, compute_terms
from src.manipulator.model import WRIST_JOINTS, ConfigurationError, JointState, RobotModel
from src.safety.qp_solver import ActiveSetSolver, QpProblem, QpStatus

logger = logging.getLogger(__name__)

# Infinity-norm above which the filter counts as active
ACTIVE_EPS = 1e-12


class FilterFault(RuntimeError):
    """Raised when the safety QP has no optimal solution."""

    def __init__(self, status: QpStatus, message: str = ""):
        self.status = status
        self.fault = (FAULT_TYPES['QP_INFEASIBLE'] if status == QpStatus.INFEASIBLE
                      else FAULT_TYPES['QP_ITERATION_LIMIT'])
        super().__init__(message or f"Safety QP failed with status {status.value}")


@dataclass(frozen=True, eq=False)
class Obstacle:
    """Spherical obstacle."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, 'center', np.asarray(self.center, dtype=float).reshape(3))
        if not self.radius > 0:
            raise ConfigurationError(f"Obstacle radius must be positive, got {self.radius}")

    def to_dict(self) -> Dict[str, Any]:
        return {"center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True)
class ClearanceSpec:
    """End-effector clearance radius and extra padding, both in metres."""

    r_ee: float = 0.1
    r_pad: float = 0.05

    def __post_init__(self):
        if self.r_ee < 0 or self.r_pad < 0:
            raise ConfigurationError(f"Clearance radii must be non-negative, got {self.r_ee}, {self.r_pad}")

    def r_m(self, obstacle: Obstacle) -> float:
        return obstacle.radius + self.r_ee + self.r_pad

    def to_dict(self) -> Dict[str, Any]:
        return {"r_ee": self.r_ee, "r_pad": self.r_pad}


@dataclass(frozen=True)
class CbfParams:
    """ECBF gains kappa1 (on h) and kappa2 (on h_dot)."""

    kappa1: float
    kappa2: float

    def __post_init__(self):
        if not (self.kappa1 > 0 and self.kappa2 > 0):
            raise ConfigurationError(
                f"ECBF gains must be positive, got kappa1={self.kappa1}, kappa2={self.kappa2}"
            )


@dataclass(frozen=True, eq=False)
class CbfDiagnostics:
    """Per-step filter internals, logged next to the trajectory."""

    h: float
    lfh: float
    A: np.ndarray
    b: float
    tau_qp: np.ndarray
    active: bool


def safety_h(ee_pos, obstacle: Obstacle, clearance: ClearanceSpec) -> float:
    """
    Squared-distance safety function.

    Args:
        ee_pos: End-effector position (m)
        obstacle: Spherical obstacle
        clearance: End-effector clearance

    Returns:
        float: |ee_pos - center|^2 - r_m^2, non-negative outside the inflated obstacle
    """
    sep = np.asarray(ee_pos, dtype=float) - obstacle.center
    return float(sep @ sep - clearance.r_m(obstacle) ** 2)


def lie_derivative_1(ee_pos, ee_vel, obstacle: Obstacle) -> float:
    """First time derivative of h: 2 sep . v."""
    sep = np.asarray(ee_pos, dtype=float) - obstacle.center
    return float(2.0 * sep @ np.asarray(ee_vel, dtype=float))


def constraint_from_terms(terms: DynamicsTerms, tau_nom: np.ndarray, obstacle: Obstacle,
                          clearance: ClearanceSpec, params: CbfParams) -> Tuple[np.ndarray, float, float, float]:
    """
    ECBF inequality A tau_qp <= b for one obstacle.

    Returns:
        tuple: (A as an n-vector, b, h, L_f h)
    """
    sep = terms.ee_pos - obstacle.center
    s_n = 2.0 * sep
    # A = S_n J M^-1, using the symmetry of M
    row = terms.mass_inv @ (terms.jacobian.T @ s_n)

    h = float(sep @ sep - clearance.r_m(obstacle) ** 2)
    lfh = float(s_n @ terms.ee_vel)
    drift = (2.0 * float(terms.ee_vel @ terms.ee_vel)
             + float(s_n @ terms.jdot_qdot)
             + float(row @ (tau_nom - terms.bias)))
    b = drift + params.kappa2 * lfh + params.kappa1 * h
    return row, b, h, lfh


def assemble_constraint(model: RobotModel, state: JointState, tau_nom, obstacle: Obstacle,
                        clearance: ClearanceSpec, params: CbfParams):
    """
    Build the ECBF-QP constraint at a state.

    Args:
        model: Robot model
        state: Joint state
        tau_nom: Nominal torque
        obstacle: Spherical obstacle
        clearance: End-effector clearance
        params: ECBF gains

    Returns:
        tuple: (A of shape (1, n), b, CbfDiagnostics with tau_qp = 0)
    """
    tau_nom = model.check_vector(tau_nom, "tau_nom")
    terms = compute_terms(model, state)
    row, b, h, lfh = constraint_from_terms(terms, tau_nom, obstacle, clearance, params)
    diagnostics = CbfDiagnostics(h=h, lfh=lfh, A=row[np.newaxis, :], b=b,
                                 tau_qp=np.zeros(model.n_joints), active=False)
    return row[np.newaxis, :], b, diagnostics


def wrist_lock_rows(n_joints: int) -> np.ndarray:
    """Equality rows selecting the last three joints."""
    if n_joints < WRIST_JOINTS + 1:
        raise ConfigurationError(f"Wrist lock needs at least {WRIST_JOINTS + 1} joints, model has {n_joints}")
    return np.eye(n_joints)[n_joints - WRIST_JOINTS:]


class CbfFilter:
    """
    Minimum-norm torque correction subject to the ECBF constraints.

    Holds a warm-started QP solver, so one instance serves one simulation.
    """

    def __init__(self, clearance: ClearanceSpec, params: CbfParams, wrist_lock: bool = False,
                 tol: float = QP_TOL, max_iter: int = QP_MAX_ITER):
        self.clearance = clearance
        self.params = params
        self.wrist_lock = wrist_lock
        self.solver = ActiveSetSolver(tol=tol, max_iter=max_iter)

    def apply(self, terms: DynamicsTerms, tau_nom: np.ndarray,
              obstacles: Sequence[Obstacle]) -> Tuple[np.ndarray, CbfDiagnostics]:
        """
        Filter a nominal torque.

        Args:
            terms: Dynamics terms at the current state
            tau_nom: Nominal torque
            obstacles: Obstacles to avoid (scenarios use one)

        Returns:
            tuple: (tau_safe, diagnostics of the obstacle with the smallest h)

        Raises:
            FilterFault: If the QP is infeasible or hits the iteration limit
        """
        n = tau_nom.size
        rows, rhs, hs, lfhs = [], [], [], []
        for obstacle in obstacles:
            row, b, h, lfh = constraint_from_terms(terms, tau_nom, obstacle, self.clearance, self.params)
            rows.append(row)
            rhs.append(b)
            hs.append(h)
            lfhs.append(lfh)
        A = np.array(rows).reshape(-1, n)
        b = np.array(rhs)
        closest = int(np.argmin(hs))

        if np.all(b >= 0.0):
            tau_qp = np.zeros(n)
            tau_safe = tau_nom.copy()
        else:
            A_eq = wrist_lock_rows(n) if self.wrist_lock else None
            b_eq = np.zeros(WRIST_JOINTS) if self.wrist_lock else None
            problem = QpProblem(H=np.eye(n), f=np.zeros(n), A_ineq=A, b_ineq=b, A_eq=A_eq, b_eq=b_eq)
            solution = self.solver.solve(problem)
            if not solution.optimal:
                logger.warning(f"Safety QP failed: status={solution.status.value}, h={hs[closest]:.6g}, b={b}")
                raise FilterFault(solution.status)
            tau_qp = solution.x
            tau_safe = tau_nom - tau_qp

        diagnostics = CbfDiagnostics(
            h=hs[closest],
            lfh=lfhs[closest],
            A=A[closest:closest + 1],
            b=float(b[closest]),
            tau_qp=tau_qp,
            active=bool(np.max(np.abs(tau_qp)) > ACTIVE_EPS)
        )
        return tau_safe, diagnostics


def filter_torque(model: RobotModel, state: JointState, tau_nom, obstacle: Obstacle,
                  clearance: ClearanceSpec, params: CbfParams, wrist_lock: bool = False,
                  solver: Optional[CbfFilter] = None) -> Tuple[np.ndarray, CbfDiagnostics]:
    """
    Safe torque tau_nom - tau_qp for a single obstacle.

    Args:
        model: Robot model
        state: Joint state
        tau_nom: Nominal torque
        obstacle: Spherical obstacle
        clearance: End-effector clearance
        params: ECBF gains
        wrist_lock: Keep the filter off the last three joints
        solver: Existing filter whose warm start is reused; it must have been
            built with the same clearance, gains and wrist lock

    Returns:
        tuple: (tau_safe, CbfDiagnostics)

    Raises:
        ConfigurationError: If solver was built with different settings
    """
    tau_nom = model.check_vector(tau_nom, "tau_nom")
    if wrist_lock:
        wrist_lock_rows(model.n_joints)
    if solver is not None and (solver.clearance != clearance or solver.params != params
                               or solver.wrist_lock != wrist_lock):
        raise ConfigurationError(
            f"Filter settings {solver.clearance}, {solver.params}, wrist_lock={solver.wrist_lock} "
            f"differ from the requested {clearance}, {params}, wrist_lock={wrist_lock}"
        )
    cbf = solver or CbfFilter(clearance, params, wrist_lock=wrist_lock)
    return cbf.apply(compute_terms(model, state), tau_nom, [obstacle])


def project_batch(terms: DynamicsTerms, tau_nom: np.ndarray, centers: np.ndarray, r_m: np.ndarray,
                  kappa1: np.ndarray, kappa2: np.ndarray,
                  wrist_lock: bool = False) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Minimum-norm corrections for a batch of states, one obstacle each.

    With a single inequality the QP optimum is the projection onto the
    half-space: tau_qp = a b / |a|^2 when b < 0, else zero, where a is the
    constraint row with the wrist entries removed under the wrist lock.

    Args:
        terms: Batched dynamics terms, leading axis B
        tau_nom: Nominal torques (B, n)
        centers: Obstacle centres (B, 3)
        r_m: Inflated obstacle radii (B,)
        kappa1: ECBF gains on h (B,)
        kappa2: ECBF gains on h_dot (B,)
        wrist_lock: Keep the correction off the last three joints

    Returns:
        tuple: (tau_qp (B, n), h (B,), infeasible (B,) boolean mask)
    """
    sep = terms.ee_pos - centers
    s_n = 2.0 * sep
    pull = (np.swapaxes(terms.jacobian, -1, -2) @ s_n[..., np.newaxis])
    rows = (terms.mass_inv @ pull)[..., 0]

    h = np.sum(sep * sep, axis=-1) - r_m ** 2
    lfh = np.sum(s_n * terms.ee_vel, axis=-1)
    drift = (2.0 * np.sum(terms.ee_vel * terms.ee_vel, axis=-1)
             + np.sum(s_n * terms.jdot_qdot, axis=-1)
             + np.sum(rows * (tau_nom - terms.bias), axis=-1))
    b = drift + kappa2 * lfh + kappa1 * h

    if wrist_lock:
        rows = rows.copy()
        rows[..., -WRIST_JOINTS:] = 0.0
    norm2 = np.sum(rows * rows, axis=-1)
    violated = b < 0.0
    infeasible = violated & (np.sqrt(norm2) <= QP_TOL)
    solvable = violated & ~infeasible
    scale = np.zeros_like(b)
    scale[solvable] = b[solvable] / norm2[solvable]
    return rows * scale[..., np.newaxis], h, infeasible
