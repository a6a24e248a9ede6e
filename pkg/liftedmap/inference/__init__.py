"""Coarse-to-fine lifted inference driver"""
from liftedmap.inference.c2f import (
    C2FReport,
    LevelSolver,
    MRFLevelSolver,
    RefinementSchedule,
    ScheduleLevel,
    get_init_state,
    run_c2f,
    run_static_lifted,
)

__all__ = [
    "C2FReport",
    "LevelSolver",
    "MRFLevelSolver",
    "RefinementSchedule",
    "ScheduleLevel",
    "get_init_state",
    "run_c2f",
    "run_static_lifted",
]
