"""Pydantic schemas for solver, problem and run configuration"""
from liftedmap.schemas.criteria import StoppingCriteria
from liftedmap.schemas.problems import ConcaveSpec, SegmentationParams, StereoParams
from liftedmap.schemas.run import RunConfig

__all__ = [
    "StoppingCriteria",
    "ConcaveSpec",
    "SegmentationParams",
    "StereoParams",
    "RunConfig",
]
