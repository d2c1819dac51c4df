"""
Custom types and enums for the moment-method toolkit
Tags used by function spaces, verdicts, moment blocks and the command surface
"""

from enum import Enum


class SmoothnessClass(str, Enum):
    """Sobolev class of a piecewise polynomial on (0,π)."""
    LINFTY = "Linfty"
    W1INFTY = "W1infty"
    W2INFTY = "W2infty"

    @property
    def order(self) -> int:
        return {"Linfty": 0, "W1infty": 1, "W2infty": 2}[self.value]

    @classmethod
    def from_order(cls, order: int) -> "SmoothnessClass":
        order = max(0, min(order, 2))
        return [cls.LINFTY, cls.W1INFTY, cls.W2INFTY][order]


class Verdict(str, Enum):
    """Approximate-controllability verdicts."""
    YES = "yes"
    NO = "no"
    INCONCLUSIVE = "inconclusive-beyond-K"


class LambdaCase(str, Enum):
    """Partition of the modes by which coupling indices vanish."""
    LAMBDA1 = "Λ1"  # I_k ≠ 0, I_{a,k} ≠ 0
    LAMBDA2 = "Λ2"  # I_k ≠ 0, I_{a,k} = 0
    LAMBDA3 = "Λ3"  # I_k = 0, I_{a,k} ≠ 0


class SolveBranch(str, Enum):
    """How a moment block was solved."""
    CASE1 = "case1"  # Λ1, k ≤ k_ε
    CASE2 = "case2"  # Λ1, k > k_ε, |I_k|⁻¹ below threshold
    CASE3 = "case3"  # Λ1, k > k_ε, |I_k|⁻¹ above threshold
    CASE4 = "case4"  # Λ2
    CASE5 = "case5"  # Λ3


class ChangeProvenance(str, Enum):
    """Which construction produced a change of unknown."""
    QZERO = "qzero"
    BUMP = "bump"
    STEP1 = "step1"
    STEP2 = "step2"
    STEP3 = "step3"


class RegularizationStep(str, Enum):
    """Certification labels for modes after regularization."""
    ORIGINAL = "original"
    QZERO = "qzero"
    BUMP = "bump"
    STEP1 = "step1"
    STEP2 = "step2"
    STEP3_CASE1 = "step3-case1"
    STEP3_CASE2 = "step3-case2"


class ControlMode(str, Enum):
    """Where the control acts."""
    DISTRIBUTED = "distributed"
    BOUNDARY = "boundary"


class PrecisionMode(str, Enum):
    """Arithmetic used for the Gram solve."""
    DOUBLE = "double"
    EXTENDED = "extended"
    AUTO = "auto"


class ObservationKind(str, Enum):
    """Observation used by the observability quotient."""
    DISTRIBUTED = "distributed"
    BOUNDARY = "boundary"
