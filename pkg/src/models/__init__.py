"""Data models and schemas for the moment-method toolkit."""

from .schemas import (
    BaseSchema, IntervalSpec, SegmentSpec, PiecewiseSpec, CouplingSpec,
    InitialDataSpec, ToleranceSpec, RunConfig, ModeCoefficients, SolutionFile
)
from .types import (
    SmoothnessClass, Verdict, LambdaCase, SolveBranch, ChangeProvenance,
    RegularizationStep, ControlMode, PrecisionMode, ObservationKind
)

__all__ = [
    # Pydantic schemas
    "BaseSchema", "IntervalSpec", "SegmentSpec", "PiecewiseSpec", "CouplingSpec",
    "InitialDataSpec", "ToleranceSpec", "RunConfig", "ModeCoefficients", "SolutionFile",

    # Type definitions
    "SmoothnessClass", "Verdict", "LambdaCase", "SolveBranch", "ChangeProvenance",
    "RegularizationStep", "ControlMode", "PrecisionMode", "ObservationKind"
]
