"""
Equivalent Systems
Changes of unknown ŷ₁ = θ⁻¹y₁ that reshape the coupling indices: the
q̂ ≡ 0 normalization, the squared-sine bump with quadratic-irrational
endpoints, and the three-step regularization pipeline with its trace.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from ..config.settings import get_settings
from ..models.types import ChangeProvenance, RegularizationStep, SmoothnessClass
from .exceptions import (
    FailedPrecondition, InsufficientSmoothness, NoNonvanishingWindow, ResonantMode, ScanExhausted,
    SingularA1, StepScanExhausted, ThetaNotPositive, WindowShrinkExhausted,
)
from .funcspace import PI, SQRT_PI_OVER_2, Interval, PiecewiseFunction, integrate_callable, phi, uniform_grid
from .spectral import CouplingPair, IndexTable, compute_Iak, compute_limits, index_table, is_index_zero

logger = logging.getLogger(__name__)
settings = get_settings()

_W2 = SmoothnessClass.W2INFTY


def _one_sided(fn: PiecewiseFunction, x: float, order: int = 0, side: str = "right") -> float:
    """Value or derivative at x taken from the segment on one side of x."""
    bp = np.asarray(fn.breakpoints)
    idx = int(np.searchsorted(bp, x, side=side)) - 1
    idx = min(max(idx, 0), len(fn.segments) - 1)
    seg = fn.segments[idx]
    return float(seg.deriv(order)(x)) if order else float(seg(x))


def hermite_quintic(x0: float, x1: float, left: Sequence[float], right: Sequence[float]) -> Polynomial:
    """Quintic on [x0, x1] matching (value, slope, curvature) at both ends."""
    h = x1 - x0
    rows: List[List[float]] = []
    rhs: List[float] = []
    for s, (v, d, dd) in ((0.0, left), (1.0, right)):
        rows.append([s ** i for i in range(6)])
        rows.append([i * s ** (i - 1) if i >= 1 else 0.0 for i in range(6)])
        rows.append([i * (i - 1) * s ** (i - 2) if i >= 2 else 0.0 for i in range(6)])
        rhs += [v, d * h, dd * h * h]
    coef = np.linalg.solve(np.array(rows), np.array(rhs))
    return Polynomial(coef, domain=[x0, x1], window=[0.0, 1.0])


def _theta_approximant(fn: Callable, cuts: Sequence[float]) -> PiecewiseFunction:
    return PiecewiseFunction.from_callable(fn, cuts, _W2, tol=settings.theta_tolerance)


@dataclass
class UnknownChange:
    """ŷ₁ = θ⁻¹y₁ with θ constant outside `window` and bounded below."""
    theta: PiecewiseFunction
    kappa_values: List[float]
    window: Interval
    provenance: ChangeProvenance
    core: Optional[Interval] = None
    residual: float = 0.0
    dtheta: PiecewiseFunction = field(init=False, repr=False)
    ddtheta: PiecewiseFunction = field(init=False, repr=False)

    def __post_init__(self):
        if self.theta.smoothness.order < 2:
            raise InsufficientSmoothness(f"θ must be W2infty, got {self.theta.smoothness.value}")
        self.provenance = ChangeProvenance(self.provenance)
        floor = self.kappa_floor
        if floor <= settings.theta_floor_scale:
            raise ThetaNotPositive(f"θ drops to {floor:.3e}, floor is {settings.theta_floor_scale:g}")
        defect = self.constancy_defect()
        if defect > 1e-12 * max(1.0, self.theta.sup_norm()):
            raise ValueError(f"θ must be constant outside ({self.window.lo:.6f}, {self.window.hi:.6f}); "
                             f"deviation {defect:.2e}")
        self.dtheta = self.theta.derivative()
        self.ddtheta = self.dtheta.derivative()

    @classmethod
    def identity(cls, window: Interval, provenance: ChangeProvenance) -> "UnknownChange":
        return cls(PiecewiseFunction.constant(1.0), [], window, provenance, core=window)

    def _samples(self) -> np.ndarray:
        return uniform_grid(2049, self.theta.breakpoints)

    @property
    def kappa_left(self) -> float:
        return float(self.theta(0.0))

    @property
    def kappa_right(self) -> float:
        return float(self.theta(PI))

    @property
    def kappa_floor(self) -> float:
        return float(np.min(self.theta(self._samples())))

    def constancy_defect(self) -> float:
        xs = self._samples()
        left = xs[xs < self.window.lo - 1e-12]
        right = xs[xs > self.window.hi + 1e-12]
        defect = 0.0
        if left.size:
            defect = max(defect, float(np.max(np.abs(self.theta(left) - self.kappa_left))))
        if right.size:
            defect = max(defect, float(np.max(np.abs(self.theta(right) - self.kappa_right))))
        return defect

    def is_identity(self, tol: float = 1e-14) -> bool:
        return (self.theta - 1.0).sup_norm() <= tol

    def derivatives(self, x: Any) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """θ, ∂ₓθ, ∂ₓₓθ at x."""
        return (np.asarray(self.theta(x)), np.asarray(self.dtheta(x)), np.asarray(self.ddtheta(x)))

    def control_coefficients(self, x: Any) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(−∂ₓₓθ⁻¹, −2∂ₓθ⁻¹, θ⁻¹): v̂ = a·y₁ + b·∂ₓy₁ + c·𝟙_ω v."""
        th, d1, d2 = self.derivatives(x)
        dinv = -d1 / th ** 2
        ddinv = -d2 / th ** 2 + 2.0 * d1 ** 2 / th ** 3
        return -ddinv, -2.0 * dinv, 1.0 / th

    def transform_control(self, x: Any, y1: np.ndarray, dy1: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Control of the transformed system from the original (y₁, ∂ₓy₁, v)."""
        a, b, c = self.control_coefficients(x)
        return a * y1 + b * dy1 + c * v

    def inverse(self) -> "UnknownChange":
        """Change with weight θ⁻¹; applying both recovers the original coupling."""
        theta = self.theta
        inv = _theta_approximant(lambda x: 1.0 / np.asarray(theta(x)), theta.breakpoints)
        return UnknownChange(inv, [1.0 / self.kappa_left, 1.0 / self.kappa_right], self.window,
                             self.provenance, self.core)

    def to_record(self) -> Dict[str, Any]:
        return {
            "provenance": self.provenance.value,
            "window": list(self.window.as_tuple()),
            "core": list(self.core.as_tuple()) if self.core else None,
            "kappa_values": [float(k) for k in self.kappa_values],
            "kappa_left": self.kappa_left,
            "kappa_right": self.kappa_right,
            "kappa_floor": self.kappa_floor,
            "residual": self.residual,
            "theta": self.theta.to_spec(),
        }


def apply_change(cp: CouplingPair, ch: UnknownChange) -> CouplingPair:
    """(p̂, q̂) = (pθ, p∂ₓθ + qθ)."""
    q = cp.q if isinstance(cp.q, PiecewiseFunction) else cp.q.to_piecewise()
    p_hat = cp.p * ch.theta
    q_hat = cp.p * ch.dtheta + q * ch.theta
    logger.debug(f"Applied {ch.provenance.value} change on ({ch.window.lo:.6f}, {ch.window.hi:.6f}) to {cp.name}")
    return CouplingPair(p_hat, q_hat, f"{cp.name}|{ch.provenance.value}")


def map_control_back(chain: Sequence[UnknownChange], x: Any, y1_hat: np.ndarray, dy1_hat: np.ndarray,
                     v_hat: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Undo a chain of changes: returns (v, y₁, ∂ₓy₁) of the original system.

    Arrays may carry leading time axes; x is the last axis.
    """
    y1, dy1, v = np.asarray(y1_hat, dtype=float), np.asarray(dy1_hat, dtype=float), np.asarray(v_hat, dtype=float)
    for ch in reversed(list(chain)):
        th, d1, _ = ch.derivatives(x)
        a, b, c = ch.control_coefficients(x)
        y_prev = th * y1
        dy_prev = d1 * y1 + th * dy1
        v = (v - a * y_prev - b * dy_prev) / c
        y1, dy1 = y_prev, dy_prev
    return v, y1, dy1


# Windows

def nonvanishing_window(fn: Callable, omega: Interval, floor: Optional[float] = None,
                        cells: Optional[int] = None) -> Interval:
    """Longest run of scan cells of ω on which |fn| stays above the floor."""
    floor = settings.nonvanishing_floor if floor is None else floor
    cells = cells or settings.window_scan_cells
    edges = np.linspace(omega.lo, omega.hi, cells + 1)
    good = [bool(np.min(np.abs(fn(np.linspace(lo, hi, 9)))) > floor) for lo, hi in zip(edges[:-1], edges[1:])]
    best = (0, -1)
    start = None
    for i, ok in enumerate(good + [False]):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            if i - start > best[1] - best[0] + 1 or best[1] < 0:
                best = (start, i - 1)
            start = None
    if best[1] < 0:
        raise NoNonvanishingWindow(f"|·| ≤ {floor:g} on every scanned cell of ({omega.lo:.6f}, {omega.hi:.6f})")
    return Interval(float(edges[best[0]]), float(edges[best[1] + 1]))


def _is_constant_on(fn: Callable, iv: Interval, rel: float = 1e-12) -> bool:
    vals = np.asarray(fn(np.linspace(iv.lo, iv.hi, 65)), dtype=float)
    return float(np.ptp(vals)) <= rel * max(1.0, float(np.max(np.abs(vals))))


def is_constant_product(p: PiecewiseFunction, k: int, iv: Interval) -> bool:
    """Whether p·φ_k is constant on iv."""
    return _is_constant_on(lambda x: np.asarray(p(x)) * phi(k, x), iv, 1e-10)


def quarter_point_gap(p: PiecewiseFunction, k: int, alpha: float, beta: float) -> float:
    """|pφ_k(α + L/4) − pφ_k(α + 3L/4)|; zero means the Step-2 frequencies cannot see mode k."""
    length = beta - alpha
    x1, x3 = alpha + 0.25 * length, alpha + 0.75 * length
    return abs(float(p(x1) * phi(k, x1)) - float(p(x3) * phi(k, x3)))


# q̂ ≡ 0 normalization

def _qzero_theta(p: PiecewiseFunction, q: PiecewiseFunction, outer: Interval) -> UnknownChange:
    delta = 0.25 * outer.length
    alpha, beta = outer.lo + delta, outer.hi - delta
    inner = [b for b in p.breakpoints + q.breakpoints if alpha < b < beta]
    cuts = [0.0, outer.lo, alpha, beta, outer.hi, PI] + inner

    def ratio(x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, alpha, beta)
        return np.where((x >= alpha) & (x <= beta), np.asarray(q(xc)) / np.asarray(p(xc)), 0.0)

    r = PiecewiseFunction.from_callable(ratio, cuts, SmoothnessClass.W1INFTY, tol=settings.theta_tolerance)
    R = r.antiderivative()
    R_alpha = float(R(alpha))
    r_a, dr_a = _one_sided(r, alpha, 0, "right"), _one_sided(r, alpha, 1, "right")
    r_b, dr_b = _one_sided(r, beta, 0, "left"), _one_sided(r, beta, 1, "left")
    theta_b = math.exp(-(float(R(beta)) - R_alpha))
    left = hermite_quintic(outer.lo, alpha, (1.0, 0.0, 0.0), (1.0, -r_a, r_a ** 2 - dr_a))
    right = hermite_quintic(beta, outer.hi, (theta_b, -r_b * theta_b, (r_b ** 2 - dr_b) * theta_b), (1.0, 0.0, 0.0))

    def theta(x):
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        m = (x > outer.lo) & (x < alpha)
        out[m] = left(x[m])
        m = (x >= alpha) & (x <= beta)
        out[m] = np.exp(-(np.asarray(R(x[m])) - R_alpha))
        m = (x > beta) & (x < outer.hi)
        out[m] = right(x[m])
        return out

    fn = _theta_approximant(theta, cuts)
    change = UnknownChange(fn, [1.0, theta_b], outer, ChangeProvenance.QZERO, core=Interval(alpha, beta))
    xs = np.linspace(alpha, beta, 257)
    scale = max(1.0, float(np.max(np.abs(q(xs)))))
    change.residual = float(np.max(np.abs(p(xs) * change.dtheta(xs) + q(xs) * fn(xs)))) / scale
    return change


def build_theta_qzero(cp: CouplingPair, omega: Interval, K: int = 10,
                      eps: Optional[float] = None) -> UnknownChange:
    """θ with p∂ₓθ + qθ = 0 on a core window of ω where |p| > floor.

    θ ≡ 1 off the nonvanishing window; the window shrinks until the index
    table moves by at most eps (default ½ min of the nonzero |I_k|).
    """
    outer = nonvanishing_window(cp.p, omega)
    q = cp.q if isinstance(cp.q, PiecewiseFunction) else cp.q.to_piecewise()
    xs = np.linspace(outer.lo, outer.hi, 257)
    if float(np.max(np.abs(q(xs)))) <= 1e-15 * max(1.0, q.sup_norm()):
        logger.debug(f"q vanishes on ({outer.lo:.6f}, {outer.hi:.6f}); identity change")
        return UnknownChange.identity(outer, ChangeProvenance.QZERO)

    base = index_table(cp, omega.lo, K)
    if eps is None:
        nonzero = np.abs(base.Ik)[np.abs(base.Ik) > base.tolerance]
        eps = 0.5 * float(np.min(nonzero)) if nonzero.size else math.inf
    moved = math.inf
    for attempt in range(settings.shrink_iterations):
        change = _qzero_theta(cp.p, q, outer)
        moved_table = index_table(apply_change(cp, change), omega.lo, K)
        moved = float(np.max(np.abs(moved_table.Ik - base.Ik)))
        if moved <= eps:
            if change.residual > 1e-10:
                logger.warning(f"q̂ residual {change.residual:.2e} on the core window exceeds 1e-10")
            logger.info(f"q̂ ≡ 0 on ({change.core.lo:.6f}, {change.core.hi:.6f}); "
                        f"index shift {moved:.2e} ≤ {eps:.2e} after {attempt} shrinks")
            return change
        logger.warning(f"Index shift {moved:.2e} > {eps:.2e}; shrinking window")
        outer = outer.shrink(settings.window_shrink)
    logger.error(f"Window shrinking exhausted for {cp.name}")
    raise WindowShrinkExhausted(f"Index shift {moved:.2e} still above {eps:.2e} after "
                                f"{settings.shrink_iterations} shrinks")


# Squared-sine bump with quadratic-irrational endpoints

def squared_sine(alpha: float, beta: float) -> Callable:
    """ξ = sin²(π(x−α)/(β−α)) on (α, β), zero elsewhere."""
    def xi(x):
        s = np.clip((np.asarray(x, dtype=float) - alpha) / (beta - alpha), 0.0, 1.0)
        return np.sin(PI * s) ** 2
    return xi


def build_bump_change(alpha: float, beta: float, kappa: float,
                      provenance: ChangeProvenance = ChangeProvenance.BUMP) -> UnknownChange:
    """θ = 1 + κξ with the squared-sine ξ."""
    xi = squared_sine(alpha, beta)
    theta = _theta_approximant(lambda x: 1.0 + kappa * xi(x), (0.0, alpha, beta, PI))
    return UnknownChange(theta, [kappa], Interval(alpha, beta), provenance, core=Interval(alpha, beta))


def Jk_closed_form(alpha: float, beta: float, k: int) -> float:
    """J_k = ½∫_α^β ∂ₓξ φ_k²."""
    length = beta - alpha
    w = 2.0 * PI / length
    if abs(2 * k - w) < 1e-8:
        raise ResonantMode(f"2k = 2π/(β−α) at k = {k}; perturb the window length", k)
    return (w / length) / ((2 * k + w) * (2 * k - w)) * math.sin(k * (beta + alpha)) * math.sin(k * length)


def sin_gap(ell: float, J: int = 200) -> float:
    """min_{j ≤ J} j·|sin(jℓ)|."""
    j = np.arange(1, J + 1, dtype=float)
    return float(np.min(j * np.abs(np.sin(j * ell))))


@dataclass
class EllChoice:
    n: int
    ell: float
    numerator: int
    denominator: int
    alpha: float
    beta: float
    sin_gap: float


def select_ell(a: float, b: float, max_denominator: int = 4096) -> EllChoice:
    """Smallest n with a/n < b/(n+1) and ℓ = r√2 (r rational) inside that gap.

    ℓ sits in the middle half of (a/n, b/(n+1)) and at least 1e-9 away from
    every π/j, j ≤ 10⁶; α = nℓ and β = (n+1)ℓ then lie in (a, b).
    """
    if not (0.0 <= a < b):
        raise ValueError(f"select_ell needs 0 ≤ a < b, got ({a}, {b})")
    n = int(math.floor(a / (b - a))) + 1
    while not a / n < b / (n + 1):
        n += 1
    lo, hi = a / n, b / (n + 1)
    inner_lo, inner_hi = lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo)
    resonant = PI / np.arange(1, 1_000_001, dtype=float)
    root2 = math.sqrt(2.0)
    for den in range(1, max_denominator + 1):
        num = int(math.floor(inner_lo * den / root2)) + 1
        while num * root2 / den < inner_hi:
            ell = num * root2 / den
            if float(np.min(np.abs(resonant - ell))) >= 1e-9:
                gap = sin_gap(ell)
                logger.info(f"ℓ = {num}/{den}·√2 = {ell:.12f} with n = {n}; window ({n * ell:.6f}, {(n + 1) * ell:.6f}), "
                            f"sin gap {gap:.3e}")
                return EllChoice(n, ell, num, den, n * ell, (n + 1) * ell, gap)
            num += 1
    raise ScanExhausted(f"No ℓ = r√2 with denominator ≤ {max_denominator} in ({lo:.6f}, {hi:.6f})")


def choose_kappa(u: Sequence[float], tail_limit: float, step: Optional[float] = None,
                 upper: Optional[float] = None) -> float:
    """Smallest grid κ > 0 with |u_k + κ| ≥ 1/k² for k ≤ K and |tail + κ| ≥ 2/K²."""
    u = np.asarray(u, dtype=float)
    step = step or settings.kappa_scan_step
    upper = upper or settings.kappa_scan_max
    K = u.size
    ks = np.arange(1, K + 1, dtype=float)
    for bound in (upper, 4.0 * upper):
        candidates = step * np.arange(1, int(round(bound / step)) + 1)
        separated = np.all(np.abs(u[None, :] + candidates[:, None]) >= 1.0 / ks[None, :] ** 2, axis=1)
        tail_ok = np.abs(tail_limit + candidates) >= 2.0 / K ** 2
        ok = separated & tail_ok
        if ok.any():
            kappa = float(candidates[int(np.argmax(ok))])
            logger.debug(f"κ = {kappa} from {candidates.size} candidates")
            return kappa
        logger.warning(f"No κ ≤ {bound:g} separates the sequence; enlarging the scan")
    raise ScanExhausted(f"No κ ≤ {4.0 * upper:g} with |u_k + κ| ≥ 1/k² for all k ≤ {K}")


def lower_bound_exponent(values: Sequence[float], ks: Optional[Sequence[int]] = None) -> Tuple[float, float]:
    """Slope s of log|I_k| against log k and the envelope C = min_k |I_k|·k^(−s)."""
    vals = np.abs(np.asarray(values, dtype=float))
    ks = np.arange(1, vals.size + 1) if ks is None else np.asarray(ks)
    mask = vals > 0
    if mask.sum() < 2:
        return 0.0, float(vals[mask].min()) if mask.any() else 0.0
    logk = np.log(ks[mask].astype(float))
    slope, _ = np.polyfit(logk, np.log(vals[mask]), 1)
    envelope = float(np.min(vals[mask] * ks[mask].astype(float) ** (-slope)))
    return float(slope), envelope


# Steps of the regularization pipeline

def step1_limit(p: PiecewiseFunction, alpha: float, beta: float) -> Tuple[float, float]:
    """J = −(1/π)∫_α^β ξ∂ₓp and the lower bound (β−α)/(2π)·inf|∂ₓp|."""
    dp = p.derivative()
    xi = squared_sine(alpha, beta)
    value = integrate_callable(lambda x: xi(x) * np.asarray(dp(x)), Interval(alpha, beta), None,
                               p.breakpoints, 2.0 * PI / (beta - alpha)).value
    inf_dp = float(np.min(np.abs(dp(np.linspace(alpha, beta, 257)))))
    return -value / PI, (beta - alpha) / (2.0 * PI) * inf_dp


def _step2_profile(p: PiecewiseFunction, alpha: float, beta: float, terms: Sequence[Tuple[int, float]]) -> Callable:
    length = beta - alpha

    def xi(x):
        x = np.asarray(x, dtype=float)
        s = np.clip((x - alpha) / length, 0.0, 1.0)
        total = np.zeros_like(x)
        for j, kappa in terms:
            total = total + kappa * length / (2.0 * PI * j) * (1.0 - np.cos(2.0 * PI * j * s))
        return np.asarray(p(x)) * total
    return xi


def build_step2_bump(p: PiecewiseFunction, alpha: float, beta: float, j: int, kappa: float,
                     previous: Sequence[Tuple[int, float]] = ()) -> UnknownChange:
    """θ = 1 + Σ ξ_m with ξ_m = p∫_α^x 2f_m/p² and f_m = (κ_m/2) sin(2πj_m(x−α)/(β−α)) p².

    ξ_m vanishes with its slope at α and β; `previous` holds the earlier (j, κ).
    """
    terms = list(previous) + [(j, kappa)]
    xi = _step2_profile(p, alpha, beta, terms)
    cuts = [0.0, alpha, beta, PI] + [b for b in p.breakpoints if alpha < b < beta]
    theta = _theta_approximant(lambda x: 1.0 + xi(x), cuts)
    return UnknownChange(theta, [kappa for _, kappa in terms], Interval(alpha, beta), ChangeProvenance.STEP2,
                         core=Interval(alpha, beta))


def step2_weights(p: PiecewiseFunction, alpha: float, beta: float, j: int, K: int) -> Tuple[np.ndarray, float]:
    """s_k = ∫_α^β sin(2πj(x−α)/(β−α)) p² φ_k² for k ≤ K and its limit (1/π)∫ sin(·) p².

    J_{m,k} = (κ_m/2)·s_k.
    """
    length = beta - alpha
    iv = Interval(alpha, beta)
    freq = 2.0 * PI * j / length

    def wave(x):
        return np.sin(freq * (np.asarray(x, dtype=float) - alpha)) * np.asarray(p(x)) ** 2

    weights = np.array([
        integrate_callable(lambda x, k=k: wave(x) * phi(k, x) ** 2, iv, None, p.breakpoints, freq + 2 * k).value
        for k in range(1, K + 1)
    ])
    limit = integrate_callable(wave, iv, None, p.breakpoints, freq).value / PI
    return weights, limit


def build_step3_case1(p: PiecewiseFunction, alpha: float, beta: float, xi_alpha: float,
                      gamma: float) -> Tuple[UnknownChange, float]:
    """θ = 1 + ξ with ξ ≡ ξ_α on (0,α), ξ ≡ 0 on (β,π) and ξ = p·w on the window.

    w is the quintic with w(α) = ξ_α/p(α), ξ′(α) = ξ″(α) = 0 and
    w = w′ = w″ = 0 at β, so ∫_α^β 2h/p² = −ξ_α/p(α) holds with h = ½p²w′.
    Returns the change and the predicted shift J_m = −γ²ξ_α/(2p(α)).
    """
    p_a = _one_sided(p, alpha, 0)
    if abs(p_a) <= settings.nonvanishing_floor:
        raise NoNonvanishingWindow(f"p(α) = {p_a:.3e} is too small for the Step-3 construction")
    dp_a, ddp_a = _one_sided(p, alpha, 1), _one_sided(p, alpha, 2)
    w_a = xi_alpha / p_a
    dw_a = -dp_a * xi_alpha / p_a ** 2
    ddw_a = -(ddp_a * w_a + 2.0 * dp_a * dw_a) / p_a
    w = hermite_quintic(alpha, beta, (w_a, dw_a, ddw_a), (0.0, 0.0, 0.0))

    def theta(x):
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        out[x < alpha] = 1.0 + xi_alpha
        m = (x >= alpha) & (x <= beta)
        out[m] = 1.0 + np.asarray(p(x[m])) * w(x[m])
        return out

    cuts = [0.0, alpha, beta, PI] + [b for b in p.breakpoints if alpha < b < beta]
    fn = _theta_approximant(theta, cuts)
    change = UnknownChange(fn, [xi_alpha], Interval(alpha, beta), ChangeProvenance.STEP3, core=Interval(alpha, beta))
    return change, -gamma ** 2 * xi_alpha / (2.0 * p_a)


def step3_case2_determinant(m: int, I_alpha_m: float, f1: Callable, f2: Callable,
                            window: Interval) -> Tuple[float, float]:
    """det A_{1,m} = −√(π/2)(1/m)·I_{α,m}·B_m with B_m = f̂⁽¹⁾f⁽²⁾ − f̂⁽²⁾f⁽¹⁾.

    f⁽ⁱ⁾ pairs with φ_m and f̂⁽ⁱ⁾ with cos(mx) over the window.
    """
    def pair(f, g):
        return integrate_callable(lambda x: np.asarray(f(x)) * g(x), window, None,
                                  getattr(f, "breakpoints", ()), float(m)).value

    cos_m = lambda x: np.cos(m * np.asarray(x, dtype=float))  # noqa: E731
    sin_m = lambda x: phi(m, x)  # noqa: E731
    B = pair(f1, cos_m) * pair(f2, sin_m) - pair(f2, cos_m) * pair(f1, sin_m)
    return -SQRT_PI_OVER_2 / m * I_alpha_m * B, B


# Pipeline

@dataclass
class TraceStep:
    provenance: ChangeProvenance
    change: Optional[UnknownChange]
    pair: CouplingPair
    table: IndexTable
    details: Dict[str, Any] = field(default_factory=dict)


@dataclass
class RegularizationTrace:
    """Every change applied by regularize, the index table after each,
    and which step made each originally failing mode nonzero."""
    steps: List[TraceStep] = field(default_factory=list)
    certifications: Dict[int, RegularizationStep] = field(default_factory=dict)
    residual_sets: List[List[int]] = field(default_factory=list)
    initial_failing: List[int] = field(default_factory=list)
    ell: Optional[EllChoice] = None
    tail_margin: float = float("nan")
    notes: List[str] = field(default_factory=list)

    @property
    def chain(self) -> List[UnknownChange]:
        return [s.change for s in self.steps if s.change is not None]

    @property
    def is_identity(self) -> bool:
        return not self.chain

    def to_records(self) -> List[Dict[str, Any]]:
        records = []
        for step in self.steps:
            rec: Dict[str, Any] = {"step": step.provenance.value}
            rec.update({k: v for k, v in step.details.items() if k != "sizing"})
            if step.change is not None:
                rec["change"] = step.change.to_record()
            records.append(rec)
        return records

    def to_lines(self) -> List[str]:
        lines = [f"initial_failing={','.join(str(k) for k in self.initial_failing)}"]
        if self.ell is not None:
            e = self.ell
            lines.append(f"ell={e.numerator}/{e.denominator}*sqrt2={e.ell:.17g} n={e.n} "
                         f"alpha={e.alpha:.17g} beta={e.beta:.17g} sin_gap={e.sin_gap:.6e}")
        for step in self.steps:
            detail = " ".join(f"{k}={v}" for k, v in step.details.items() if k != "sizing")
            lines.append(f"step={step.provenance.value} {detail}".rstrip())
        for i, s in enumerate(self.residual_sets):
            lines.append(f"S_{i}={','.join(str(k) for k in s)}")
        for k in sorted(self.certifications):
            lines.append(f"certify k={k} {RegularizationStep(self.certifications[k]).value}")
        lines.append(f"tail_margin={self.tail_margin:.6e}")
        lines.extend(f"note={n}" for n in self.notes)
        return lines


def failing_modes(table: IndexTable) -> List[int]:
    return [int(k) for k in table.ks if table.zero_Ik(k) and table.zero_Iak(k)]


def _tail_margin(cp: CouplingPair, table: IndexTable) -> float:
    limit = compute_limits(cp).I
    tail = table.ks > table.K / 2
    if not tail.any():
        return abs(limit)
    return abs(limit) - float(np.max(np.abs(table.Ik[tail] - limit)))


def _certify(trace: RegularizationTrace, step: TraceStep, label: RegularizationStep):
    for k in trace.initial_failing:
        if k in trace.certifications:
            continue
        if not (step.table.zero_Ik(k) and step.table.zero_Iak(k)):
            trace.certifications[k] = label


def _record(trace: RegularizationTrace, provenance: ChangeProvenance, change: Optional[UnknownChange],
            pair: CouplingPair, table: IndexTable, label: RegularizationStep, **details) -> TraceStep:
    step = TraceStep(provenance, change, pair, table, dict(details))
    trace.steps.append(step)
    _certify(trace, step, label)
    return step


def _bump_path(cp: CouplingPair, core: Interval, omega: Interval, K: int,
               trace: RegularizationTrace) -> Tuple[CouplingPair, IndexTable]:
    """p constant and q ≡ 0 on the core: θ = 1 + κξ on an ℓ-window."""
    table = index_table(cp, omega.lo, K)
    c = float(cp.p(core.midpoint))
    ell = select_ell(core.lo, core.hi)
    trace.ell = ell
    J = np.array([Jk_closed_form(ell.alpha, ell.beta, int(k)) for k in table.ks])
    u = table.Ik / (c * J)
    kappa = choose_kappa(u, float(u[-1]))
    change = build_bump_change(ell.alpha, ell.beta, kappa)
    pair = apply_change(cp, change)
    new = index_table(pair, omega.lo, K)
    slope, envelope = lower_bound_exponent(new.Ik, new.ks)
    logger.info(f"Bump with κ = {kappa} on ({ell.alpha:.6f}, {ell.beta:.6f}); |I_k| ~ {envelope:.2e}·k^{slope:.2f}")
    _record(trace, ChangeProvenance.BUMP, change, pair, new, RegularizationStep.BUMP,
            kappa=kappa, n=ell.n, ell=ell.ell, slope=round(slope, 6), envelope=envelope)
    return pair, new


def _thirds(iv: Interval) -> Tuple[Interval, Interval, Interval]:
    third = iv.length / 3.0
    return (Interval(iv.lo, iv.lo + third), Interval(iv.lo + third, iv.hi - third), Interval(iv.hi - third, iv.hi))


def _adapt_window(p: PiecewiseFunction, modes: Sequence[int], window: Interval) -> Interval:
    """Shrink β until pφ_k differs at the quarter points for every mode."""
    for attempt in range(settings.window_retries + 1):
        scale = max(1.0, float(np.max(np.abs(p(np.linspace(window.lo, window.hi, 33))))))
        flat = [k for k in modes if quarter_point_gap(p, k, window.lo, window.hi) <= 1e-12 * scale]
        if not flat:
            return window
        if attempt == settings.window_retries:
            break
        logger.warning(f"pφ_k symmetric at the quarter points for modes {flat}; shrinking β")
        window = Interval(window.lo, window.lo + settings.window_shrink * window.length)
    raise WindowShrinkExhausted(f"Quarter-point degeneracy persists for modes {flat} after "
                                f"{settings.window_retries} retries")


def _scan_frequency(p: PiecewiseFunction, window: Interval, k: int, K: int,
                    tol: float) -> Tuple[int, np.ndarray, float]:
    bound = settings.step2_max_frequency
    for j in range(1, bound + 1):
        weights, limit = step2_weights(p, window.lo, window.hi, j, K)
        top = max(float(np.max(np.abs(weights))), abs(limit))
        if abs(weights[k - 1]) > 1e-6 * top and abs(weights[k - 1]) > 100.0 * tol:
            return j, weights, limit
    logger.error(f"Step-2 frequency scan failed at mode {k}")
    raise StepScanExhausted(f"No frequency j ≤ {bound} makes J_(m,{k}) nonzero", mode=k, bound=bound)


def half_nonzero_floor(table: IndexTable) -> float:
    """½ min |I_i| over the modes whose index is not zero; inf when none are."""
    surviving = [abs(table.Ik[i - 1]) for i in table.ks if not table.zero_Ik(int(i))]
    return 0.5 * min(surviving) if surviving else math.inf


def _step2(cp: CouplingPair, window: Interval, omega: Interval, K: int, table: IndexTable,
           trace: RegularizationTrace) -> Tuple[CouplingPair, IndexTable, Interval]:
    p = cp.p

    def residual_set(t: IndexTable) -> List[int]:
        return [int(k) for k in t.ks if t.zero_Ik(k) and not is_constant_product(p, int(k), window)]

    S = residual_set(table)
    if not S:
        return cp, table, window
    window = _adapt_window(p, S, window)
    S = residual_set(table)
    trace.residual_sets.append(list(S))
    tol = cp.index_tolerance()
    pmax = float(np.max(np.abs(p(np.linspace(window.lo, window.hi, 257)))))
    budget = 0.5
    terms: List[Tuple[int, float]] = []
    sizing: List[Dict[str, float]] = []
    current, current_table = cp, table
    for _ in range(len(S)):
        k = S[0]
        j, weights, limit = _scan_frequency(p, window, k, K, tol)
        floor = half_nonzero_floor(current_table)
        top = max(float(np.max(np.abs(weights))), abs(limit))
        kappa = 2.0 * floor / top
        cap = budget * PI * j / (pmax * window.length)
        kappa = min(kappa, cap)
        budget -= kappa * pmax * window.length / (PI * j)
        change = build_step2_bump(p, window.lo, window.hi, j, kappa, terms)
        terms.append((j, kappa))
        sizing.append({"mode": k, "j": j, "kappa": kappa, "sup_J": 0.5 * kappa * top, "half_floor": floor})
        current = apply_change(cp, change)
        current_table = index_table(current, omega.lo, K)
        S = residual_set(current_table)
        trace.residual_sets.append(list(S))
        logger.info(f"Step 2 bump j={j}, κ={kappa:.3e} for mode {k}; remaining {S}")
        if not S:
            break
    if S:
        logger.error(f"Step 2 left modes {S} with I_k = 0")
        raise StepScanExhausted(f"Modes {S} keep I_k = 0 after {len(terms)} Step-2 bumps", mode=S[0],
                                bound=settings.step2_max_frequency)
    _record(trace, ChangeProvenance.STEP2, change, current, current_table, RegularizationStep.STEP2,
            window=window.as_tuple(), terms=terms, sizing=sizing)
    return current, current_table, window


def _step3(cp: CouplingPair, window: Interval, omega: Interval, K: int, table: IndexTable,
           trace: RegularizationTrace) -> Tuple[CouplingPair, IndexTable]:
    p = cp.p
    zero = [int(k) for k in table.ks if table.zero_Ik(k)]
    for m in zero:
        if not is_constant_product(p, m, window):
            raise StepScanExhausted(f"Mode {m}: I_m = 0 but p·φ_m is not constant on the Step-3 window",
                                    mode=m, bound=settings.step2_max_frequency)
        I_alpha = compute_Iak(cp, window.lo, m)
        gamma = float(p(window.midpoint) * phi(m, window.midpoint))
        if is_index_zero(cp, I_alpha):
            unit, _ = build_step3_case1(p, window.lo, window.hi, 1.0, gamma)
            shift = index_table(apply_change(cp, unit), omega.lo, K).Ik - table.Ik
            others = [abs(table.Ik[i - 1]) for i in table.ks if i != m and not table.zero_Ik(i)]
            floor = 0.5 * min(others) if others else 1.0
            xi_alpha = floor / float(np.max(np.abs(shift)))
            xi_alpha = min(xi_alpha, 0.5 / max((unit.theta - 1.0).sup_norm(), 1e-300))
            change, predicted = build_step3_case1(p, window.lo, window.hi, xi_alpha, gamma)
            cp = apply_change(cp, change)
            table = index_table(cp, omega.lo, K)
            logger.info(f"Step 3 case 1 at mode {m}: ξ_α = {xi_alpha:.3e}, J_m = {predicted:.3e}")
            _record(trace, ChangeProvenance.STEP3, change, cp, table, RegularizationStep.STEP3_CASE1,
                    mode=m, case=1, xi_alpha=xi_alpha, predicted_shift=predicted,
                    measured_shift=float(table.Ik[m - 1]))
        else:
            f1 = PiecewiseFunction.bump(window.lo, window.hi)
            f2 = f1 * PiecewiseFunction.polynomial([-window.midpoint, 1.0])
            det, B = step3_case2_determinant(m, I_alpha, f1, f2, window)
            if abs(det) <= settings.det_floor:
                raise SingularA1(f"det A_(1,{m}) = {det:.3e} on the Step-3 window", m, det, settings.det_floor)
            trace.certifications[m] = RegularizationStep.STEP3_CASE2
            trace.notes.append(f"mode {m} certified on ({window.lo:.6f}, {window.hi:.6f}) with det A_1 = {det:.6e}")
            logger.info(f"Step 3 case 2 at mode {m}: det A_1 = {det:.3e}, B = {B:.3e}")
    return cp, table


def _step_path(cp: CouplingPair, core: Interval, omega: Interval, K: int,
               trace: RegularizationTrace) -> Tuple[CouplingPair, IndexTable]:
    """p non-constant on the core: Step 1 on the left third, Step 2 on the
    middle third, Step 3 on the right third of a window where |∂ₓp| > floor."""
    sub = nonvanishing_window(cp.p.derivative(), core)
    w1, w2, w3 = _thirds(sub)
    table = index_table(cp, omega.lo, K)
    limit = compute_limits(cp).I
    if abs(limit) <= cp.index_tolerance():
        J, bound = step1_limit(cp.p, w1.lo, w1.hi)
        change = build_bump_change(w1.lo, w1.hi, 1.0, ChangeProvenance.STEP1)
        cp = apply_change(cp, change)
        table = index_table(cp, omega.lo, K)
        after = compute_limits(cp).I
        logger.info(f"Step 1: I moved from {limit:.3e} to {after:.3e} (predicted {J:.3e}, bound {bound:.3e})")
        _record(trace, ChangeProvenance.STEP1, change, cp, table, RegularizationStep.STEP1,
                J=J, bound=bound, limit=after)
    cp, table, w2 = _step2(cp, w2, omega, K, table, trace)
    return _step3(cp, w3, omega, K, table, trace)


def regularize(cp: CouplingPair, omega: Interval, K: int) -> Tuple[CouplingPair, RegularizationTrace]:
    """Equivalent coupling with |I_k| + |I_{a,k}| > ε_I for every k ≤ K.

    Pairs that already pass come back unchanged with an empty trace.
    """
    table = index_table(cp, omega.lo, K)
    trace = RegularizationTrace(initial_failing=failing_modes(table))
    for k in table.ks:
        if int(k) not in trace.initial_failing:
            trace.certifications[int(k)] = RegularizationStep.ORIGINAL
    if not trace.initial_failing:
        trace.tail_margin = _tail_margin(cp, table)
        return cp, trace
    logger.info(f"Regularizing {cp.name}: failing modes {trace.initial_failing}")

    qzero = build_theta_qzero(cp, omega, K)
    current = cp
    if not qzero.is_identity():
        current = apply_change(cp, qzero)
        table = index_table(current, omega.lo, K)
        _record(trace, ChangeProvenance.QZERO, qzero, current, table, RegularizationStep.QZERO,
                core=qzero.core.as_tuple(), residual=qzero.residual)
    core = qzero.core

    if _is_constant_on(current.p, core):
        current, table = _bump_path(current, core, omega, K, trace)
    else:
        current, table = _step_path(current, core, omega, K, trace)

    remaining = [k for k in failing_modes(table)
                 if trace.certifications.get(k) != RegularizationStep.STEP3_CASE2]
    if remaining:
        logger.error(f"Regularization left failing modes {remaining}")
        raise FailedPrecondition(f"I_k = I_(a,k) = 0 after regularization at modes {remaining}", remaining)
    trace.tail_margin = _tail_margin(current, table)
    logger.info(f"Regularized {cp.name} with {len(trace.chain)} changes; tail margin {trace.tail_margin:.3e}")
    return current, trace
