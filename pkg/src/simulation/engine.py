"""
Closed-loop simulation of the filtered arm.

Fixed-step RK4 on (q, dq) with the control torque held constant over each
step. Every step logs the state, both torques, the actual and desired
end-effector positions and h; run metrics accumulate alongside.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from config.ecbf_config import (
    EFFORT_METRICS,
    FAULT_TYPES,
    FLOAT_FORMAT,
    RESULT_COLUMNS,
    trajectory_columns
)
from src.control.ctc import ctc_torque_arrays, ctc_torque_from_terms
from src.control.trajectory import sample_trajectory
from src.manipulator.dynamics import DynamicsTerms, accelerations_unchecked, compute_terms, terms_unchecked
from src.manipulator.kinematics import chain_frames
from src.manipulator.model import WRIST_JOINTS, ConfigurationError, JointState, RobotModel
from src.safety.cbf_filter import CbfFilter, FilterFault, project_batch, safety_h
from src.simulation.scenario import Scenario
from src.simulation.scoring import RunRecord

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class RunResult:
    """Trajectory log and metrics of one simulation."""

    log: np.ndarray
    columns: List[str]
    n_joints: int
    min_h: float
    run_ctrl: float
    run_tsep: float
    final_err: float
    good_run: bool = False
    fault: Optional[str] = None
    r_o: float = 0.0
    kappa1: float = 0.0
    kappa2: float = 0.0
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.log, columns=self.columns)

    @property
    def times(self) -> np.ndarray:
        return self.log[:, 0]

    @property
    def joint_angles(self) -> np.ndarray:
        return self.log[:, 1:1 + self.n_joints]

    @property
    def tau_qp(self) -> np.ndarray:
        start = 1 + 3 * self.n_joints
        return self.log[:, start:start + self.n_joints]

    @property
    def ee_path(self) -> np.ndarray:
        start = 1 + 4 * self.n_joints
        return self.log[:, start:start + 3]

    @property
    def ee_desired(self) -> np.ndarray:
        start = 4 + 4 * self.n_joints
        return self.log[:, start:start + 3]

    @property
    def h(self) -> np.ndarray:
        return self.log[:, -1]

    def summary(self, score: float = 0.0) -> Dict[str, Any]:
        return {
            'r_o': self.r_o,
            'kappa1': self.kappa1,
            'kappa2': self.kappa2,
            'min_h': self.min_h,
            'run_ctrl': self.run_ctrl,
            'run_tsep': self.run_tsep,
            'final_err': self.final_err,
            'good_run': self.good_run,
            'score': score
        }


def rk4_step_unchecked(model: RobotModel, q: np.ndarray, dq: np.ndarray, tau: np.ndarray, dt: float,
                       qdd: Optional[np.ndarray] = None):
    """rk4_step for float arrays of shape (..., n); every leading index is an independent arm."""

    def accel(q_s, dq_s):
        return accelerations_unchecked(model, q_s, dq_s, tau)

    k1q = dq
    k1v = accel(q, dq) if qdd is None else qdd
    k2q = dq + 0.5 * dt * k1v
    k2v = accel(q + 0.5 * dt * k1q, k2q)
    k3q = dq + 0.5 * dt * k2v
    k3v = accel(q + 0.5 * dt * k2q, k3q)
    k4q = dq + dt * k3v
    k4v = accel(q + dt * k3q, k4q)

    q_next = q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    dq_next = dq + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return q_next, dq_next


def rk4_step(model: RobotModel, q: np.ndarray, dq: np.ndarray, tau: np.ndarray, dt: float,
             qdd: Optional[np.ndarray] = None):
    """
    One RK4 step of q_ddot = M^-1 (tau - bias) with tau held constant.

    Args:
        qdd: Acceleration at (q, dq) when already known

    Returns:
        tuple: (q, dq) after dt
    """
    tau = model.check_vector(tau, "tau")
    return rk4_step_unchecked(model, q, dq, tau, dt, qdd=qdd)


def evaluate_good_run(result: Union[RunResult, RunRecord], end_tol: float) -> bool:
    """
    A run is good when it never enters the inflated obstacle, ends within
    end_tol of the desired end point (inclusive) and did not fault.
    """
    return bool(result.fault is None and result.min_h >= 0.0 and result.final_err <= end_tol)


def simulate(scenario: Scenario) -> RunResult:
    """
    Integrate one scenario.

    Args:
        scenario: Validated scenario

    Returns:
        RunResult: Log and metrics; faults are tagged on the result and the
        partial log is kept
    """
    model = scenario.robot
    n = model.n_joints
    dt = scenario.dt
    obstacles = [scenario.obstacle]
    cbf = CbfFilter(scenario.clearance, scenario.cbf, wrist_lock=scenario.wrist_lock) if scenario.cbf_enabled else None
    use_tau_qp = scenario.effort_metric == EFFORT_METRICS['TAU_QP']

    q = scenario.initial_state.q.copy()
    dq = scenario.initial_state.dq.copy()
    rows = []
    run_ctrl = 0.0
    run_tsep = 0.0
    fault = None
    steps = scenario.n_steps

    for k in range(steps + 1):
        t = k * dt
        state = JointState(q, dq)
        terms = compute_terms(model, state)
        sample = sample_trajectory(scenario.trajectory, t)
        ee_des = chain_frames(model, sample.q_d)[1][-1]
        tau_nom = ctc_torque_from_terms(terms, state, sample, scenario.gains)
        h = safety_h(terms.ee_pos, scenario.obstacle, scenario.clearance)

        if cbf is not None:
            try:
                tau_safe, diagnostics = cbf.apply(terms, tau_nom, obstacles)
            except FilterFault as e:
                logger.warning(f"Run aborted at t={t:.3f}s: {e}")
                fault = e.fault
                break
            tau_qp = diagnostics.tau_qp
        else:
            tau_safe = tau_nom
            tau_qp = np.zeros(n)

        rows.append(np.concatenate([[t], q, dq, tau_nom, tau_qp, terms.ee_pos, ee_des, [h]]))
        if k == steps:
            break

        effort = tau_qp if use_tau_qp else tau_safe
        run_ctrl += float(np.linalg.norm(effort)) * dt
        run_tsep += float(np.linalg.norm(terms.ee_pos - ee_des)) * dt

        try:
            q, dq = rk4_step_unchecked(model, q, dq, tau_safe, dt, qdd=terms.accelerations(tau_safe))
        except np.linalg.LinAlgError:
            q = np.full(n, np.nan)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(dq))):
            logger.warning(f"Non-finite state after t={t:.3f}s")
            fault = FAULT_TYPES['NON_FINITE']
            break

    columns = trajectory_columns(n)
    log = np.array(rows) if rows else np.empty((0, len(columns)))
    if rows:
        min_h = float(np.min(log[:, -1]))
        final_err = float(np.linalg.norm(log[-1, -7:-4] - log[-1, -4:-1]))
    else:
        min_h = float('nan')
        final_err = float('inf')

    result = RunResult(
        log=log,
        columns=columns,
        n_joints=n,
        min_h=min_h,
        run_ctrl=run_ctrl,
        run_tsep=run_tsep,
        final_err=final_err,
        fault=fault,
        r_o=scenario.obstacle.radius,
        kappa1=scenario.cbf.kappa1,
        kappa2=scenario.cbf.kappa2,
        meta={'cbf_enabled': scenario.cbf_enabled, 'wrist_lock': scenario.wrist_lock,
              'effort_metric': scenario.effort_metric}
    )
    result.good_run = evaluate_good_run(result, scenario.end_tol)
    logger.debug(
        f"Run r_o={result.r_o} kappa=({result.kappa1}, {result.kappa2}): min_h={min_h:.4g}, "
        f"final_err={final_err:.4g}, fault={fault}"
    )
    return result


def _check_batch(scenarios: Sequence[Scenario]) -> Scenario:
    first = scenarios[0]
    for other in scenarios[1:]:
        shared = (
            other.robot is first.robot,
            other.trajectory is first.trajectory,
            other.dt == first.dt,
            other.n_steps == first.n_steps,
            other.gains == first.gains,
            other.clearance == first.clearance,
            other.wrist_lock == first.wrist_lock,
            other.effort_metric == first.effort_metric,
            other.cbf_enabled == first.cbf_enabled,
            np.array_equal(other.initial_state.q, first.initial_state.q),
            np.array_equal(other.initial_state.dq, first.initial_state.dq)
        )
        if not all(shared):
            raise ConfigurationError("Batched runs may differ only in obstacle, ECBF gains and end tolerance")
    return first


def simulate_batch(scenarios: Sequence[Scenario]) -> List[RunRecord]:
    """
    Integrate runs that share everything but the obstacle and ECBF gains, in lockstep.

    Every step evaluates the dynamics of all running arms in one pass. The
    correction is the single-obstacle half-space projection, which is the
    optimum of the safety QP; only run summaries are kept. A run that faults
    leaves the batch and the others continue.

    Args:
        scenarios: Scenarios from one base scenario via with_radius/with_params

    Returns:
        list: RunRecords in input order

    Raises:
        ConfigurationError: If the scenarios differ in anything else
    """
    if not scenarios:
        return []
    base = _check_batch(scenarios)
    model = base.robot
    n = model.n_joints
    dt = base.dt
    steps = base.n_steps
    size = len(scenarios)
    use_tau_qp = base.effort_metric == EFFORT_METRICS['TAU_QP']

    centers = np.array([s.obstacle.center for s in scenarios])
    r_m = np.array([s.clearance.r_m(s.obstacle) for s in scenarios])
    kappa1 = np.array([s.cbf.kappa1 for s in scenarios])
    kappa2 = np.array([s.cbf.kappa2 for s in scenarios])

    alive = np.arange(size)
    q = np.tile(base.initial_state.q, (size, 1))
    dq = np.tile(base.initial_state.dq, (size, 1))
    min_h = np.full(size, np.inf)
    last_err = np.full(size, np.inf)
    run_ctrl = np.zeros(size)
    run_tsep = np.zeros(size)
    faults: List[Optional[str]] = [None] * size
    logged = np.zeros(size, dtype=bool)

    def drop(mask: np.ndarray, fault: str, t: float) -> np.ndarray:
        for index in alive[mask]:
            faults[index] = fault
            logger.warning(f"Run r_o={scenarios[index].obstacle.radius} kappa=({kappa1[index]}, {kappa2[index]}) "
                           f"aborted at t={t:.3f}s: {fault}")
        return ~mask

    for k in range(steps + 1):
        t = k * dt
        sample = sample_trajectory(base.trajectory, t)
        ee_des = chain_frames(model, sample.q_d)[1][-1]
        terms = terms_unchecked(model, q, dq)
        tau_nom = ctc_torque_arrays(terms, q, dq, sample, base.gains)

        if base.cbf_enabled:
            tau_qp, h, infeasible = project_batch(terms, tau_nom, centers[alive], r_m[alive],
                                                  kappa1[alive], kappa2[alive], wrist_lock=base.wrist_lock)
            if np.any(infeasible):
                keep = drop(infeasible, FAULT_TYPES['QP_INFEASIBLE'], t)
                alive, q, dq, tau_nom, tau_qp, h = alive[keep], q[keep], dq[keep], tau_nom[keep], tau_qp[keep], h[keep]
                terms = _select_terms(terms, keep)
                if not alive.size:
                    break
        else:
            sep = terms.ee_pos - centers[alive]
            h = np.sum(sep * sep, axis=-1) - r_m[alive] ** 2
            tau_qp = np.zeros_like(tau_nom)
        tau_safe = tau_nom - tau_qp

        err = np.linalg.norm(terms.ee_pos - ee_des, axis=-1)
        min_h[alive] = np.minimum(min_h[alive], h)
        last_err[alive] = err
        logged[alive] = True
        if k == steps:
            break

        effort = tau_qp if use_tau_qp else tau_safe
        run_ctrl[alive] += np.linalg.norm(effort, axis=-1) * dt
        run_tsep[alive] += err * dt

        try:
            q, dq = rk4_step_unchecked(model, q, dq, tau_safe, dt, qdd=terms.accelerations(tau_safe))
        except np.linalg.LinAlgError:
            q = np.full_like(q, np.nan)
        finite = np.all(np.isfinite(q), axis=-1) & np.all(np.isfinite(dq), axis=-1)
        if not np.all(finite):
            keep = drop(~finite, FAULT_TYPES['NON_FINITE'], t)
            alive, q, dq = alive[keep], q[keep], dq[keep]
            if not alive.size:
                break

    records = []
    for index, scenario in enumerate(scenarios):
        if not logged[index]:
            min_h[index] = np.nan
        record = RunRecord(
            r_o=scenario.obstacle.radius,
            kappa1=scenario.cbf.kappa1,
            kappa2=scenario.cbf.kappa2,
            min_h=float(min_h[index]),
            run_ctrl=float(run_ctrl[index]),
            run_tsep=float(run_tsep[index]),
            final_err=float(last_err[index]),
            good_run=False,
            fault=faults[index]
        )
        record.good_run = evaluate_good_run(record, scenario.end_tol)
        records.append(record)
    logger.debug(f"Batch of {size} runs finished, {sum(f is None for f in faults)} without fault")
    return records


def _select_terms(terms: DynamicsTerms, keep: np.ndarray) -> DynamicsTerms:
    return DynamicsTerms(
        mass=terms.mass[keep],
        bias=terms.bias[keep],
        jacobian=terms.jacobian[keep],
        jdot_qdot=terms.jdot_qdot[keep],
        ee_pos=terms.ee_pos[keep],
        ee_vel=terms.ee_vel[keep],
        mass_inv=terms.mass_inv[keep]
    )


def wrist_deviation(result: RunResult, reference: RunResult) -> float:
    """
    Largest absolute difference of the three distal joint angles between two runs.

    Args:
        result: Run under test
        reference: Run to compare against, usually the unfiltered one

    Returns:
        float: max |q_wrist - q_wrist_ref| over the common time span (rad)
    """
    rows = min(len(result.log), len(reference.log))
    if rows == 0:
        return 0.0
    wrist = result.joint_angles[:rows, -WRIST_JOINTS:]
    wrist_ref = reference.joint_angles[:rows, -WRIST_JOINTS:]
    return float(np.max(np.abs(wrist - wrist_ref)))


def write_trajectory(result: RunResult, path: str) -> str:
    """Write the per-step log as CSV."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    result.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_summary(result: RunResult, path: str, score: float = 0.0) -> str:
    """Write a one-row results CSV for a single run."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame = pd.DataFrame([result.summary(score)], columns=RESULT_COLUMNS)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path
