"""
Pydantic schemas for run configuration and persisted results
Everything that crosses the file boundary is validated here.
"""

import math
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .types import ControlMode, ObservationKind, PrecisionMode, SmoothnessClass


class BaseSchema(BaseModel):
    """Base schema with common configuration."""

    model_config = ConfigDict(
        use_enum_values=True,
        validate_assignment=True,
        extra="forbid",
    )


class IntervalSpec(BaseSchema):
    """Subinterval (lo, hi) of (0, π)."""
    lo: float
    hi: float

    @model_validator(mode="after")
    def check_order(self):
        if not (0.0 <= self.lo < self.hi <= math.pi + 1e-12):
            raise ValueError(f"interval must satisfy 0 ≤ lo < hi ≤ π, got ({self.lo}, {self.hi})")
        return self


class SegmentSpec(BaseSchema):
    """One polynomial piece: coefficients ascending in absolute x."""
    interval: List[float] = Field(min_length=2, max_length=2)
    coefficients: List[float] = Field(min_length=1)

    @field_validator("interval")
    @classmethod
    def validate_interval(cls, v):
        if v[0] >= v[1]:
            raise ValueError(f"segment interval must be increasing, got {v}")
        return v


class PiecewiseSpec(BaseSchema):
    """Piecewise polynomial covering [0, π]."""
    segments: List[SegmentSpec] = Field(min_length=1)
    smoothness: SmoothnessClass = SmoothnessClass.LINFTY

    @model_validator(mode="after")
    def check_tiling(self):
        ordered = sorted(self.segments, key=lambda s: s.interval[0])
        if abs(ordered[0].interval[0]) > 1e-12 or abs(ordered[-1].interval[1] - math.pi) > 1e-12:
            raise ValueError("segments must start at 0 and end at π")
        for left, right in zip(ordered[:-1], ordered[1:]):
            if abs(left.interval[1] - right.interval[0]) > 1e-12:
                raise ValueError(f"segments leave a gap or overlap at {left.interval[1]}")
        return self


class CouplingSpec(BaseSchema):
    """Either a named preset (with parameters) or explicit piecewise p and q."""
    preset: Optional[str] = None
    params: Dict[str, Any] = Field(default_factory=dict)
    p: Optional[PiecewiseSpec] = None
    q: Optional[PiecewiseSpec] = None

    @model_validator(mode="after")
    def check_source(self):
        if self.preset is None and self.p is None and self.q is None:
            raise ValueError("coupling needs a preset or at least one of p, q")
        if self.preset is not None and (self.p is not None or self.q is not None):
            raise ValueError("coupling preset and explicit p/q are mutually exclusive")
        return self


class InitialDataSpec(BaseSchema):
    """Initial state (y1, y2) as sine coefficients and/or piecewise functions."""
    y1_modes: Dict[int, float] = Field(default_factory=dict)
    y2_modes: Dict[int, float] = Field(default_factory=dict)
    y1: Optional[PiecewiseSpec] = None
    y2: Optional[PiecewiseSpec] = None

    @field_validator("y1_modes", "y2_modes")
    @classmethod
    def validate_modes(cls, v):
        for k in v:
            if k < 1:
                raise ValueError(f"sine mode indices start at 1, got {k}")
        return v


class ToleranceSpec(BaseSchema):
    """Per-run tolerances; all strictly positive."""
    quadrature: float = Field(default=1e-12, gt=0)
    biortho: float = Field(default=1e-8, gt=0)
    block: float = Field(default=1e-10, gt=0)
    galerkin: float = Field(default=1e-6, gt=0)
    null_ratio: float = Field(default=1e-3, gt=0)
    duality: float = Field(default=1e-5, gt=0)


class RunConfig(BaseSchema):
    """Complete description of one command run."""
    coupling: CouplingSpec
    omega: IntervalSpec
    T: float = Field(gt=0)
    K: int = Field(ge=1, le=400)
    tolerances: ToleranceSpec = Field(default_factory=ToleranceSpec)
    initial_data: InitialDataSpec = Field(default_factory=InitialDataSpec)
    mode: ControlMode = ControlMode.DISTRIBUTED
    seed: Optional[int] = None
    precision: PrecisionMode = PrecisionMode.AUTO
    epsilon: Optional[float] = Field(default=None, gt=0)
    galerkin_modes: Optional[int] = Field(default=None, ge=1)
    steps: Optional[int] = Field(default=None, ge=64)
    observation: ObservationKind = ObservationKind.DISTRIBUTED
    quotient_modes: List[int] = Field(default_factory=lambda: [10, 15, 20, 25, 30])
    override_verdict: bool = False

    @field_validator("quotient_modes")
    @classmethod
    def validate_quotient_modes(cls, v):
        if any(k < 1 for k in v):
            raise ValueError("quotient modes must be positive")
        return sorted(set(v))


class ModeCoefficients(BaseSchema):
    """Solved coefficients at one mode (distributed v or boundary u)."""
    k: int = Field(ge=1)
    lambda_case: Optional[str] = None
    branch: Optional[str] = None
    coefficients: List[float]
    residual: float = 0.0


class SolutionFile(BaseSchema):
    """solution.json: everything cmd_verify needs to rebuild the control."""
    mode: ControlMode
    K: int = Field(ge=1)
    T: float = Field(gt=0)
    config_hash: str
    precision: PrecisionMode = PrecisionMode.AUTO
    epsilon: Optional[float] = None
    k_eps: Optional[int] = None
    t0_hat: Optional[float] = None
    modes: List[ModeCoefficients] = Field(default_factory=list)
    shapes: Dict[str, PiecewiseSpec] = Field(default_factory=dict)
    transformed_coupling: Dict[str, PiecewiseSpec] = Field(default_factory=dict)
    regularization: List[Dict[str, Any]] = Field(default_factory=list)
    decay_fit: Dict[str, Optional[float]] = Field(default_factory=dict)
