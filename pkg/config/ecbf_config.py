"""
Configuration for the ECBF manipulator toolkit.

Settings come from the environment (optionally a .env file); everything else in
this module is a fixed constant shared by the simulation, search and CLI layers.
"""

import logging
import os
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# Load environment variables from .env file
load_dotenv()


def _setting(name, default):
    """
    Returns an environment setting, warning when it falls back to the default.

    Args:
        name: Environment variable name
        default: String value used when the variable is unset

    Returns:
        str: The raw setting
    """
    value = os.getenv(name)
    if value is None:
        logger.warning(f"{name} is not set, using default {default!r}")
        return default
    return value


CONFIG_DIR = os.path.dirname(os.path.abspath(__file__))

# Runtime settings
ECBF_WORKERS = _setting('ECBF_WORKERS', '1')
ECBF_OUTPUT_DIR = _setting('ECBF_OUTPUT_DIR', 'output')
ECBF_LOG_LEVEL = _setting('ECBF_LOG_LEVEL', 'INFO')

# Solver and scoring settings
QP_TOL = float(_setting('ECBF_QP_TOL', '1e-8'))
QP_MAX_ITER = int(_setting('ECBF_QP_MAX_ITER', '50'))
END_TOL = float(_setting('ECBF_END_TOL', '0.01'))
BATCH_SIZE = int(_setting('ECBF_BATCH_SIZE', '169'))

# Shipped data files
DEFAULT_ROBOT_MODEL = os.path.join(CONFIG_DIR, 'ur10_model.json')
TWO_LINK_MODEL = os.path.join(CONFIG_DIR, 'two_link_planar.json')
DEFAULT_SCENARIO = os.path.join(CONFIG_DIR, 'default_scenario.json')
FULL_GRID = os.path.join(CONFIG_DIR, 'full_grid.json')
GUIDED_SEARCH = os.path.join(CONFIG_DIR, 'guided_search.json')

# Output file names
TRAJECTORY_FILE = 'trajectory.csv'
SUMMARY_FILE = 'summary.csv'
RESULTS_FILE = 'results.csv'
SCOREBOARD_FILE = 'scoreboard.json'
DATASET_FILE = 'dataset.csv'
MODEL_FILE = 'model.json'
LOSS_CURVE_FILE = 'loss_curve.csv'
METADATA_FILE = 'run_metadata.json'
GUIDED_HISTORY_FILE = 'guided_history.json'
REFERENCE_TRAJECTORY_FILE = 'trajectory_reference.csv'
TRAJECTORY_PLOT = 'trajectory.svg'
SCORE_PLOT = 'scores.svg'

# CSV layouts
RESULT_COLUMNS = [
    'r_o', 'kappa1', 'kappa2', 'min_h', 'run_ctrl', 'run_tsep',
    'final_err', 'good_run', 'score'
]
DATASET_COLUMNS = ['r_o', 'kappa1', 'kappa2', 'rank', 'score']
LOSS_COLUMNS = ['epoch', 'loss']
FLOAT_FORMAT = '%.10g'

# Run fault tags
FAULT_TYPES = {
    'QP_INFEASIBLE': 'qp_infeasible',
    'QP_ITERATION_LIMIT': 'qp_iteration_limit',
    'NON_FINITE': 'non_finite_state'
}

# Effort metrics integrated into RunCtrl
EFFORT_METRICS = {
    'TAU_SAFE': 'tau_safe',
    'TAU_QP': 'tau_qp'
}


def trajectory_columns(n_joints):
    """
    Returns the trajectory log columns for an n-joint arm.

    Args:
        n_joints: Number of joints

    Returns:
        list: Column names in log order
    """
    columns = ['t']
    for prefix in ('q', 'dq', 'taunom', 'tauqp'):
        columns.extend(f"{prefix}{i + 1}" for i in range(n_joints))
    columns.extend(['ee_x', 'ee_y', 'ee_z', 'eed_x', 'eed_y', 'eed_z', 'h'])
    return columns


def get_worker_count(override=None):
    """
    Returns the worker-process count for parallel simulation.

    Args:
        override: Value from the command line, takes precedence over ECBF_WORKERS

    Returns:
        int: Worker count
    """
    raw = override if override is not None else os.getenv('ECBF_WORKERS', ECBF_WORKERS)
    try:
        workers = int(raw)
    except (TypeError, ValueError):
        raise ValueError(f"Worker count must be an integer, got {raw!r}")

    if workers < 1:
        raise ValueError(f"Worker count must be at least 1, got {workers}")
    return workers
