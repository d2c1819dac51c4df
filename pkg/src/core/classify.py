"""
Controllability Classifier
Approximate-controllability verdicts (distributed and boundary), minimal-time
surrogates T̂₀ / T̂₁ from the coupling-index tables, and Fattorini witnesses.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..config.settings import get_settings
from ..models.types import Verdict
from .exceptions import FailedPrecondition, SupportOverlap
from .funcspace import Interval, phi
from .spectral import CouplingPair, IndexTable, compute_limits, compute_tau, index_table, log_index, star_profile

logger = logging.getLogger(__name__)
settings = get_settings()


@dataclass
class VerdictResult:
    verdict: Verdict
    witness: Optional[int] = None
    reason: str = ""


@dataclass
class TailTrend:
    """Per-k ratio table behind a limsup surrogate."""
    ks: np.ndarray
    ratios: np.ndarray
    estimate: float
    window: Tuple[int, int]

    def as_rows(self) -> List[Dict[str, float]]:
        return [{"k": int(k), "ratio": float(r)} for k, r in zip(self.ks, self.ratios)]


@dataclass
class FattoriniWitness:
    """Φ*_{1,k} − τ_kΦ*_{2,k}: an adjoint eigenfunction invisible on ω."""
    k: int
    tau: float
    first_component_sup: float
    x: np.ndarray
    first: np.ndarray
    second: np.ndarray


@dataclass
class ClassificationReport:
    support_intersects: bool
    failing_modes: List[int]
    approx_controllable_distributed: Verdict
    approx_controllable_boundary: Verdict
    distributed_witness: Optional[int]
    boundary_witness: Optional[int]
    T0_estimate: float
    T1_estimate: float
    K: int
    index_tolerance: float
    limit_I: float
    limit_Ia: float
    tail_trend_T0: Optional[TailTrend] = None
    tail_trend_T1: Optional[TailTrend] = None
    notes: List[str] = field(default_factory=list)

    def to_lines(self) -> List[str]:
        """key=value report lines."""
        lines = [
            f"K={self.K}",
            f"support_intersects={str(self.support_intersects).lower()}",
            f"approx_controllable_distributed={Verdict(self.approx_controllable_distributed).value}",
            f"distributed_witness={self.distributed_witness if self.distributed_witness else ''}",
            f"approx_controllable_boundary={Verdict(self.approx_controllable_boundary).value}",
            f"boundary_witness={self.boundary_witness if self.boundary_witness else ''}",
            f"failing_modes={','.join(str(k) for k in self.failing_modes)}",
            f"T0_estimate={_fmt(self.T0_estimate)}",
            f"T1_estimate={_fmt(self.T1_estimate)}",
            f"limit_I={_fmt(self.limit_I)}",
            f"limit_Ia={_fmt(self.limit_Ia)}",
            f"index_tolerance={_fmt(self.index_tolerance)}",
        ]
        lines.extend(f"note={n}" for n in self.notes)
        return lines


def _fmt(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.17g}"


def _neg_log(log_value: Tuple[float, float]) -> float:
    sign, log_mag = log_value
    return math.inf if sign == 0.0 else -log_mag


def approx_distributed(cp: CouplingPair, omega: Interval, K: int,
                       table: Optional[IndexTable] = None) -> VerdictResult:
    """Distributed approximate controllability on ω from the index table up to K."""
    if K < 1:
        raise ValueError(f"K must be ≥ 1, got {K}")
    if cp.supports_meet(omega):
        return VerdictResult(Verdict.YES, reason="coupling support meets ω")
    table = table or index_table(cp, omega.lo, K)
    failing = [int(k) for k in table.ks if table.zero_Ik(k) and table.zero_Iak(k)]
    if failing:
        logger.info(f"{cp.name}: distributed verdict no, witness k={failing[0]}")
        return VerdictResult(Verdict.NO, failing[0], "I_k = I_{a,k} = 0 with disjoint supports")
    limits = compute_limits(cp, omega.lo)
    if abs(limits.I) + abs(limits.I_a) > table.tolerance:
        return VerdictResult(Verdict.YES, reason="all k ≤ K pass and (I, I_a) ≠ 0")
    return VerdictResult(Verdict.INCONCLUSIVE, reason="all k ≤ K pass but I = I_a = 0")


def approx_boundary(cp: CouplingPair, K: int, table: Optional[IndexTable] = None) -> VerdictResult:
    """Boundary approximate controllability: I_k ≠ 0 for every k."""
    if K < 1:
        raise ValueError(f"K must be ≥ 1, got {K}")
    table = table or index_table(cp, math.pi, K)
    failing = [int(k) for k in table.ks if table.zero_Ik(k)]
    if failing:
        logger.info(f"{cp.name}: boundary verdict no, witness k={failing[0]}")
        return VerdictResult(Verdict.NO, failing[0], "I_k = 0")
    limits = compute_limits(cp)
    if abs(limits.I) > table.tolerance:
        return VerdictResult(Verdict.YES, reason="all k ≤ K pass and I ≠ 0")
    return VerdictResult(Verdict.INCONCLUSIVE, reason="all k ≤ K pass but I = 0")


def limsup_surrogate(ks: np.ndarray, ratios: np.ndarray, cap: Optional[float] = None) -> TailTrend:
    """Max over the top half of the modes; +inf when the top quartile
    climbs past the cap."""
    cap = settings.t0_cap if cap is None else cap
    K = int(ks[-1])
    lo = max(1, int(math.ceil(K / 2)))
    top = ratios[ks >= lo]
    estimate = max(0.0, float(np.max(top)))
    quartile = ratios[ks >= max(1, int(math.ceil(3 * K / 4)))]
    if estimate > cap and quartile.size >= 2 and np.all(np.diff(quartile) >= 0):
        logger.debug(f"Ratios exceed cap {cap} and keep growing; limsup reported as inf")
        estimate = math.inf
    return TailTrend(ks, ratios, estimate, (lo, K))


def estimate_T0(cp: CouplingPair, a: float, K: int,
                table: Optional[IndexTable] = None) -> Tuple[float, TailTrend]:
    """limsup_k min(−log|I_k|, −log|I_{a,k}|)/k² surrogate."""
    table = table or index_table(cp, a, K)
    failing = [int(k) for k in table.ks if table.zero_Ik(k) and table.zero_Iak(k)]
    if failing:
        logger.error(f"T0 is ill-posed for {cp.name} at modes {failing}")
        raise FailedPrecondition(f"I_k = I_(a,k) = 0 at modes {failing}", failing)
    ratios = np.array([
        min(_neg_log(table.log_Ik[k - 1]), _neg_log(table.log_Iak[k - 1])) / k ** 2 for k in table.ks
    ])
    trend = limsup_surrogate(table.ks, ratios)
    logger.info(f"T0 surrogate for {cp.name}: {trend.estimate:.12g} over k ∈ [{trend.window[0]}, {K}]")
    return trend.estimate, trend


def estimate_T1(cp: CouplingPair, K: int, table: Optional[IndexTable] = None) -> Tuple[float, TailTrend]:
    """limsup_k −log|I_k|/k² surrogate."""
    table = table or index_table(cp, math.pi, K)
    failing = [int(k) for k in table.ks if table.zero_Ik(k)]
    if failing:
        logger.error(f"T1 is ill-posed for {cp.name} at modes {failing}")
        raise FailedPrecondition(f"I_k = 0 at modes {failing}", failing)
    ratios = np.array([_neg_log(table.log_Ik[k - 1]) / k ** 2 for k in table.ks])
    trend = limsup_surrogate(table.ks, ratios)
    logger.info(f"T1 surrogate for {cp.name}: {trend.estimate:.12g}")
    return trend.estimate, trend


def fattorini_witness(cp: CouplingPair, omega: Interval, k: int, points: int = 257) -> Optional[FattoriniWitness]:
    """Witness Φ*_{1,k} − τ_kΦ*_{2,k} when I_k = I_{a,k} = 0, else None."""
    if cp.supports_meet(omega):
        raise SupportOverlap(f"Supports of p and q must avoid ω = ({omega.lo}, {omega.hi})")
    if log_index(cp, k)[0] != 0.0 or log_index(cp, k, omega.lo)[0] != 0.0:
        return None
    profile = star_profile(cp, k)
    tau = compute_tau(cp, omega, k, profile.alpha)
    x = np.linspace(omega.lo, omega.hi, points)
    first = profile(x) - tau * phi(k, x)
    sup = float(np.max(np.abs(first)))
    if sup > 1e-8:
        logger.warning(f"Witness at k={k} has first component {sup:.2e} on ω")
    return FattoriniWitness(k, tau, sup, x, first, phi(k, x))


def classification_report(cp: CouplingPair, omega: Interval, K: int) -> ClassificationReport:
    """Verdicts, minimal-time surrogates and tail tables in one pass."""
    table = index_table(cp, omega.lo, K)
    distributed = approx_distributed(cp, omega, K, table)
    boundary = approx_boundary(cp, K, table)
    limits = compute_limits(cp, omega.lo, K)
    notes: List[str] = []
    failing = [int(k) for k in table.ks if table.zero_Ik(k) and table.zero_Iak(k)]
    try:
        t0, trend0 = estimate_T0(cp, omega.lo, K, table)
    except FailedPrecondition as e:
        t0, trend0 = math.inf, None
        notes.append(f"T0 ill-posed at modes {e.modes}")
    try:
        t1, trend1 = estimate_T1(cp, K, table)
    except FailedPrecondition as e:
        t1, trend1 = math.inf, None
        notes.append(f"T1 ill-posed at modes {e.modes}")
    if distributed.verdict == Verdict.NO and distributed.witness:
        witness = fattorini_witness(cp, omega, distributed.witness)
        if witness is None:
            notes.append("distributed witness not confirmed by fattorini_witness")
        else:
            notes.append(f"fattorini witness k={witness.k} sup_omega={witness.first_component_sup:.3e}")
    return ClassificationReport(
        support_intersects=cp.supports_meet(omega),
        failing_modes=failing,
        approx_controllable_distributed=distributed.verdict,
        approx_controllable_boundary=boundary.verdict,
        distributed_witness=distributed.witness,
        boundary_witness=boundary.witness,
        T0_estimate=t0,
        T1_estimate=t1,
        K=K,
        index_tolerance=table.tolerance,
        limit_I=limits.I,
        limit_Ia=limits.I_a,
        tail_trend_T0=trend0,
        tail_trend_T1=trend1,
        notes=notes,
    )
