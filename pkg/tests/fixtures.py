"""
Shared builders for the unit tests.
"""

import numpy as np

from config.ecbf_config import DEFAULT_ROBOT_MODEL, TWO_LINK_MODEL
from src.control.ctc import CtcGains
from src.control.trajectory import TrajectorySpec
from src.manipulator.model import load_robot_model
from src.safety.cbf_filter import CbfParams, ClearanceSpec, Obstacle
from src.simulation.scenario import Scenario
from src.simulation.scoring import RunRecord

TWO_LINK = load_robot_model(TWO_LINK_MODEL)
UR10 = load_robot_model(DEFAULT_ROBOT_MODEL)

UR10_HOME = [0.0, -0.2, 0.4, 0.0, 0.0, 0.0]


def ur10_scenario(duration=0.05, radius=0.2, center=(100.0, 100.0, 100.0), sweep=(-0.05, 0.05),
                  **changes) -> Scenario:
    """Short UR10 sweep of the base joint with an obstacle far away unless moved."""
    trajectory = TrajectorySpec(
        sweep_joint=0,
        theta_start=sweep[0],
        theta_end=sweep[1],
        duration=duration,
        home_posture=UR10_HOME
    )
    settings = dict(
        robot=UR10,
        trajectory=trajectory,
        obstacle=Obstacle(np.asarray(center, dtype=float), radius),
        clearance=ClearanceSpec(0.1, 0.05),
        cbf=CbfParams(10.0, 10.0),
        gains=CtcGains(100.0, 20.0),
        wrist_lock=True,
        dt=1e-3,
        duration=duration
    )
    settings.update(changes)
    return Scenario(**settings)


def record(kappa1, kappa2, r_o=0.2, run_ctrl=10.0, run_tsep=1.0, good_run=True, min_h=0.1,
           final_err=0.0, fault=None) -> RunRecord:
    """RunRecord with the given metrics; score is filled in by a ScoreBoard."""
    return RunRecord(
        r_o=r_o, kappa1=float(kappa1), kappa2=float(kappa2), min_h=min_h,
        run_ctrl=run_ctrl, run_tsep=run_tsep, final_err=final_err,
        good_run=good_run, fault=fault
    )
