"""Anytime MAP solvers: ICM and alpha expansion on a max-flow core"""
from liftedmap.solvers.common import LabelCursor, SolveReport, StopReason
from liftedmap.solvers.expansion import alpha_expansion, alpha_expansion_move
from liftedmap.solvers.icm import icm
from liftedmap.solvers.maxflow import FlowNetwork, max_flow
from liftedmap.solvers.trace import AnytimeTrace, TraceEvent, TraceRecorder

SOLVERS = {
    "expansion": alpha_expansion,
    "icm": icm,
}

__all__ = [
    "SOLVERS",
    "LabelCursor",
    "SolveReport",
    "StopReason",
    "alpha_expansion",
    "alpha_expansion_move",
    "icm",
    "FlowNetwork",
    "max_flow",
    "AnytimeTrace",
    "TraceEvent",
    "TraceRecorder",
]
