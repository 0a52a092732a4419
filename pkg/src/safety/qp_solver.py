"""
Dense convex QP solver.

    min 1/2 x^T H x + f^T x
    s.t. A_ineq x <= b_ineq
         A_eq x = b_eq

Primal active-set method. A feasible starting point comes from a Phase-1
problem posed in the null space of the equality constraints; its optimal slack
decides infeasibility. Problems here are tiny (a handful of variables, a few
constraints), so everything is dense NumPy.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import FrozenSet, Iterable, List, Optional, Tuple

import numpy as np

from config.ecbf_config import QP_MAX_ITER, QP_TOL
from src.manipulator.model import ConfigurationError

logger = logging.getLogger(__name__)

# Step length below which an equality-constrained subproblem counts as stationary
STEP_EPS = 1e-12
# Curvature of the decision variables in the Phase-1 problem
PHASE1_RIDGE = 1e-10
# Largest move accepted from the final KKT re-solve
PROXIMITY = 1e-6


class QpStatus(str, Enum):
    OPTIMAL = 'optimal'
    INFEASIBLE = 'infeasible'
    ITERATION_LIMIT = 'iteration_limit'


def _scale(values: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0


@dataclass(frozen=True, eq=False)
class QpProblem:
    """
    Problem data. Omitted constraint blocks default to empty.

    H must be symmetric positive semidefinite and A_eq full row rank.
    """

    H: np.ndarray
    f: np.ndarray
    A_ineq: Optional[np.ndarray] = None
    b_ineq: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = H.shape[0]
        f = np.asarray(self.f, dtype=float).reshape(-1)
        A_ineq, b_ineq = self._block(self.A_ineq, self.b_ineq, n, "inequality")
        A_eq, b_eq = self._block(self.A_eq, self.b_eq, n, "equality")
        for name, value in (('H', H), ('f', f), ('A_ineq', A_ineq), ('b_ineq', b_ineq),
                            ('A_eq', A_eq), ('b_eq', b_eq)):
            object.__setattr__(self, name, value)
        self.validate()

    @staticmethod
    def _block(matrix, vector, n: int, label: str) -> Tuple[np.ndarray, np.ndarray]:
        if matrix is None:
            return np.zeros((0, n)), np.zeros(0)
        matrix = np.asarray(matrix, dtype=float).reshape(-1, n)
        vector = np.asarray(vector, dtype=float).reshape(-1)
        if vector.size != matrix.shape[0]:
            raise ConfigurationError(
                f"{label} block has {matrix.shape[0]} rows but {vector.size} right-hand sides"
            )
        return matrix, vector

    @property
    def n_vars(self) -> int:
        return self.H.shape[0]

    def validate(self) -> None:
        n = self.n_vars
        if self.H.shape != (n, n) or self.f.size != n:
            raise ConfigurationError(f"H must be square and f of length {n}")
        if not np.allclose(self.H, self.H.T, atol=1e-12 * _scale(self.H)):
            raise ConfigurationError("H must be symmetric")
        eigenvalues = np.linalg.eigvalsh(self.H)
        if eigenvalues[0] < -1e-10 * _scale(eigenvalues):
            raise ConfigurationError(f"H must be positive semidefinite, smallest eigenvalue {eigenvalues[0]}")
        r = self.A_eq.shape[0]
        if r > n:
            raise ConfigurationError(f"{r} equality constraints exceed {n} variables")
        if r and np.linalg.matrix_rank(self.A_eq) < r:
            raise ConfigurationError("A_eq must have full row rank")

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.H @ x + self.f @ x)


@dataclass(frozen=True, eq=False)
class QpSolution:
    """Solver output; multipliers are only meaningful when status is optimal."""

    x: np.ndarray
    active_set: FrozenSet[int]
    objective: float
    status: QpStatus
    iterations: int = 0
    lambda_ineq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nu_eq: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def optimal(self) -> bool:
        return self.status == QpStatus.OPTIMAL


def _solve_kkt(H: np.ndarray, g: np.ndarray, A_work: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Step of the equality-constrained subproblem min 1/2 p^T H p + g^T p, A_work p = 0.

    Returns (p, mu) with H p + g + A_work^T mu = 0.
    """
    n = H.shape[0]
    m = A_work.shape[0]
    kkt = np.block([
        [H, A_work.T],
        [A_work, np.zeros((m, m))]
    ])
    rhs = np.concatenate([-g, np.zeros(m)])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def _independent(rows: np.ndarray, candidate: np.ndarray) -> bool:
    if rows.shape[0] == 0:
        return bool(np.linalg.norm(candidate) > 1e-12)
    stacked = np.vstack([rows, candidate])
    return np.linalg.matrix_rank(stacked, tol=1e-10 * _scale(stacked)) > rows.shape[0]


def _initial_working_set(A_eq: np.ndarray, A_ineq: np.ndarray, slack: np.ndarray,
                         threshold: float, preferred: Iterable[int] = ()) -> List[int]:
    """Greedy linearly independent subset of the tight or violated inequalities."""
    working: List[int] = []
    rows = A_eq.copy()
    tight = [i for i in np.argsort(slack) if slack[i] <= threshold]
    for i in list(preferred) + tight:
        if i in working:
            continue
        if _independent(rows, A_ineq[i]):
            working.append(int(i))
            rows = np.vstack([rows, A_ineq[i]])
    return working


def _active_set_loop(H, f, A_ineq, b_ineq, A_eq, x, working: List[int], tol: float, max_iter: int):
    """
    Primal active-set iterations from a feasible x.

    Returns (x, working, lambda_ineq, nu_eq, status, iterations).
    """
    n_eq = A_eq.shape[0]
    p_count = A_ineq.shape[0]
    lambda_ineq = np.zeros(p_count)
    nu_eq = np.zeros(n_eq)

    for iteration in range(1, max_iter + 1):
        A_work = np.vstack([A_eq, A_ineq[working]]) if working else A_eq
        g = H @ x + f
        step, mu = _solve_kkt(H, g, A_work)

        if np.max(np.abs(step)) <= STEP_EPS * _scale(x):
            nu_eq = mu[:n_eq]
            multipliers = mu[n_eq:]
            if not working or np.min(multipliers) >= -tol:
                lambda_ineq = np.zeros(p_count)
                lambda_ineq[working] = np.maximum(multipliers, 0.0)
                return x, working, lambda_ineq, nu_eq, QpStatus.OPTIMAL, iteration
            dropped = working.pop(int(np.argmin(multipliers)))
            logger.debug(f"Dropping constraint {dropped} from the working set")
            continue

        alpha = 1.0
        blocking = None
        rates = A_ineq @ step
        for i in range(p_count):
            if i in working or rates[i] <= STEP_EPS:
                continue
            slack = max(0.0, b_ineq[i] - A_ineq[i] @ x)
            ratio = slack / rates[i]
            if ratio < alpha:
                alpha = ratio
                blocking = i
        x = x + alpha * step
        if blocking is not None:
            working.append(blocking)
            logger.debug(f"Constraint {blocking} blocks the step at alpha={alpha:.3e}")

    return x, working, lambda_ineq, nu_eq, QpStatus.ITERATION_LIMIT, max_iter


def _phase_one(A: np.ndarray, b: np.ndarray, tol: float, max_iter: int):
    """
    Find y with A y <= b by minimising the largest violation s.

        min PHASE1_RIDGE/2 |y|^2 + 1/2 s^2   s.t.   A_i y / |A_i| - s <= b_i / |A_i|

    Returns (y, status) where status is optimal when a feasible y was found.
    """
    m = A.shape[1]
    norms = np.linalg.norm(A, axis=1)
    constant = norms <= 1e-12 * _scale(A)
    if np.any(b[constant] < -tol * _scale(b)):
        return np.zeros(m), QpStatus.INFEASIBLE

    A_n = A[~constant] / norms[~constant, np.newaxis]
    b_n = b[~constant] / norms[~constant]
    if b_n.size == 0:
        return np.zeros(m), QpStatus.OPTIMAL

    s0 = max(0.0, float(np.max(-b_n)))
    if s0 == 0.0:
        return np.zeros(m), QpStatus.OPTIMAL
    H1 = np.diag(np.concatenate([np.full(m, PHASE1_RIDGE), [1.0]]))
    f1 = np.zeros(m + 1)
    A1 = np.hstack([A_n, -np.ones((A_n.shape[0], 1))])
    z0 = np.concatenate([np.zeros(m), [s0]])
    working = _initial_working_set(np.zeros((0, m + 1)), A1, b_n - A1 @ z0, tol)

    z, _, _, _, status, iterations = _active_set_loop(
        H1, f1, A1, b_n, np.zeros((0, m + 1)), z0, working, tol, max_iter
    )
    if status != QpStatus.OPTIMAL:
        return z[:m], status

    y, slack = z[:m], z[m]
    logger.debug(f"Phase 1 finished after {iterations} iterations with slack {slack:.3e}")
    # the ridge leaves a residual slack proportional to |y|
    if slack > tol * max(_scale(b_n), _scale(y)):
        return y, QpStatus.INFEASIBLE
    return y, QpStatus.OPTIMAL


def _polish(problem: QpProblem, x: np.ndarray, working: List[int]):
    """
    Re-solve the KKT system of the final working set in one factorisation.

    Accumulated active-set steps leave round-off of order tol on the active
    constraints; the direct solve puts x on them to machine precision. The
    polished point is kept only when it stays within PROXIMITY of the iterate
    and violates no inequality by more than the iterate does.

    Returns (x, mu) or None when the polished point is rejected.
    """
    n = problem.n_vars
    rows = np.vstack([problem.A_eq, problem.A_ineq[working]]) if working else problem.A_eq
    m = rows.shape[0]
    kkt = np.block([
        [problem.H, rows.T],
        [rows, np.zeros((m, m))]
    ])
    rhs = np.concatenate([-problem.f, problem.b_eq, problem.b_ineq[working]])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return None
    polished = sol[:n]
    if not np.all(np.isfinite(sol)) or np.max(np.abs(polished - x), initial=0.0) > PROXIMITY * _scale(x):
        return None
    if problem.A_ineq.shape[0]:
        before = np.max(problem.A_ineq @ x - problem.b_ineq)
        after = np.max(problem.A_ineq @ polished - problem.b_ineq)
        if after > max(before, 0.0):
            return None
    return polished, sol[n:]


class ActiveSetSolver:
    """
    Active-set QP solver that remembers the last optimal active set.

    The remembered set seeds the next solve, so an instance belongs to one
    simulation worker.
    """

    def __init__(self, tol: float = QP_TOL, max_iter: int = QP_MAX_ITER):
        if tol <= 0 or max_iter < 1:
            raise ConfigurationError(f"Invalid solver settings tol={tol}, max_iter={max_iter}")
        self.tol = tol
        self.max_iter = max_iter
        self.warm_start: Tuple[int, ...] = ()

    def reset(self) -> None:
        self.warm_start = ()

    def solve(self, problem: QpProblem) -> QpSolution:
        """
        Solve a QP.

        Args:
            problem: Problem data

        Returns:
            QpSolution: status is optimal, infeasible or iteration_limit
        """
        solution = self._solve(problem)
        if solution.optimal:
            self.warm_start = tuple(sorted(solution.active_set))
        return solution

    def _failed(self, problem: QpProblem, x: np.ndarray, status: QpStatus, iterations: int = 0) -> QpSolution:
        logger.debug(f"QP solve ended with status {status.value}")
        return QpSolution(x=x, active_set=frozenset(), objective=problem.objective(x),
                          status=status, iterations=iterations)

    def _warm_point(self, problem: QpProblem, threshold: float):
        """Minimiser over the remembered active set, if it is feasible."""
        p_count = problem.A_ineq.shape[0]
        working = [i for i in self.warm_start if i < p_count]
        if not working:
            return None
        A_work = np.vstack([problem.A_eq, problem.A_ineq[working]])
        if np.linalg.matrix_rank(A_work) < A_work.shape[0]:
            return None
        x_p = np.linalg.lstsq(A_work, np.concatenate([problem.b_eq, problem.b_ineq[working]]), rcond=None)[0]
        step, _ = _solve_kkt(problem.H, problem.H @ x_p + problem.f, A_work)
        x = x_p + step
        if np.any(problem.A_ineq @ x - problem.b_ineq > threshold):
            return None
        return x, working

    def _solve(self, problem: QpProblem) -> QpSolution:
        n = problem.n_vars
        tol = self.tol
        A_eq, b_eq = problem.A_eq, problem.b_eq
        A_ineq, b_ineq = problem.A_ineq, problem.b_ineq
        threshold = tol * _scale(b_ineq)

        if A_eq.shape[0]:
            x_p = np.linalg.lstsq(A_eq, b_eq, rcond=None)[0]
            if np.max(np.abs(A_eq @ x_p - b_eq)) > tol * _scale(b_eq):
                return self._failed(problem, x_p, QpStatus.INFEASIBLE)
            _, _, vt = np.linalg.svd(A_eq)
            null_space = vt[A_eq.shape[0]:].T
        else:
            x_p = np.zeros(n)
            null_space = np.eye(n)

        warm = self._warm_point(problem, threshold)
        if warm is not None:
            x0, working = warm
        else:
            if A_ineq.shape[0]:
                y, status = _phase_one(A_ineq @ null_space, b_ineq - A_ineq @ x_p, tol, self.max_iter)
                x0 = x_p + null_space @ y
                if status != QpStatus.OPTIMAL:
                    return self._failed(problem, x0, status)
            else:
                x0 = x_p
            working = _initial_working_set(A_eq, A_ineq, b_ineq - A_ineq @ x0, threshold)

        x, working, lambda_ineq, nu_eq, status, iterations = _active_set_loop(
            problem.H, problem.f, A_ineq, b_ineq, A_eq, x0, list(working), tol, self.max_iter
        )
        if status != QpStatus.OPTIMAL:
            return self._failed(problem, x, status, iterations)

        polished = _polish(problem, x, working)
        if polished is not None:
            x, mu = polished
            n_eq = A_eq.shape[0]
            nu_eq = mu[:n_eq]
            lambda_ineq = np.zeros(A_ineq.shape[0])
            lambda_ineq[working] = np.maximum(mu[n_eq:], 0.0)

        return QpSolution(
            x=x,
            active_set=frozenset(working),
            objective=problem.objective(x),
            status=status,
            iterations=iterations,
            lambda_ineq=lambda_ineq,
            nu_eq=nu_eq
        )


def solve(problem: QpProblem, tol: float = QP_TOL, max_iter: int = QP_MAX_ITER) -> QpSolution:
    """
    Solve a QP without warm start.

    Args:
        problem: Problem data
        tol: Feasibility and multiplier tolerance
        max_iter: Active-set iteration cap (per phase)

    Returns:
        QpSolution: Solution and status
    """
    return ActiveSetSolver(tol=tol, max_iter=max_iter).solve(problem)


def kkt_residuals(problem: QpProblem, solution: QpSolution) -> dict:
    """
    Residuals certifying an optimal solution.

    Returns:
        dict: primal_ineq, primal_eq, stationarity, complementarity, dual (all >= 0)
    """
    x = solution.x
    lam = solution.lambda_ineq if solution.lambda_ineq.size else np.zeros(problem.A_ineq.shape[0])
    nu = solution.nu_eq if solution.nu_eq.size else np.zeros(problem.A_eq.shape[0])
    ineq = problem.A_ineq @ x - problem.b_ineq
    gradient = problem.H @ x + problem.f + problem.A_ineq.T @ lam + problem.A_eq.T @ nu

    def worst(values):
        return float(np.max(np.abs(values))) if values.size else 0.0

    return {
        'primal_ineq': worst(np.maximum(0.0, ineq)),
        'primal_eq': worst(problem.A_eq @ x - problem.b_eq),
        'stationarity': worst(gradient),
        'complementarity': worst(lam * ineq),
        'dual': worst(np.minimum(0.0, lam))
    }
