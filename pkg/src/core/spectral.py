"""
Spectral Engine - per-mode eigenstructure of the coupled operator
Coupling indices I_k / I_{a,k}, the generalized eigenfunctions ψ*_k and ψ_k
with their normalizing constants, the decomposition ψ*_k = τ_k φ_k + g_k on ω,
and coefficient expansions in the biorthogonal Riesz bases.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from ..config.settings import get_settings
from .exceptions import FailedPrecondition, InsufficientSmoothness, SupportOverlap
from .funcspace import (
    PI, SQRT_2_OVER_PI, SQRT_PI_OVER_2, CosineSeries, Interval, PiecewiseFunction, QuadratureRule,
    QuadratureResult, SineSeries, breakpoints_of, composite_nodes, dphi, frequency_of, gauss_legendre,
    integrate_callable, panel_edges, panel_values, phi, uniform_grid,
)

logger = logging.getLogger(__name__)
settings = get_settings()

LogValue = Tuple[float, float]  # (sign, natural log of magnitude)
ZERO_LOG: LogValue = (0.0, -math.inf)


@dataclass(frozen=True)
class CouplingPair:
    """Coupling coefficients p ∈ W¹∞ and q ∈ L∞ of the second equation."""
    p: PiecewiseFunction
    q: Union[PiecewiseFunction, CosineSeries]
    name: str = "custom"
    dp: PiecewiseFunction = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.p.smoothness.order < 1:
            raise InsufficientSmoothness(f"p must be W1infty, got {self.p.smoothness.value}")
        object.__setattr__(self, "dp", self.p.derivative())

    @classmethod
    def from_functions(cls, p: Optional[PiecewiseFunction] = None,
                       q: Optional[Union[PiecewiseFunction, CosineSeries]] = None,
                       name: str = "custom") -> "CouplingPair":
        return cls(p if p is not None else PiecewiseFunction.zero(),
                   q if q is not None else PiecewiseFunction.zero(), name)

    @property
    def support_p(self) -> List[Interval]:
        return self.p.support()

    @property
    def support_q(self) -> List[Interval]:
        return self.q.support()

    @property
    def breakpoints(self) -> List[float]:
        return breakpoints_of(self.p, self.q)

    @property
    def frequency(self) -> float:
        return frequency_of(self.q)

    @property
    def is_pure_cosine(self) -> bool:
        """q is an exact cosine series and p vanishes (exact index laws apply)."""
        return isinstance(self.q, CosineSeries) and self.p.is_zero()

    def supports_meet(self, omega: Interval) -> bool:
        return any(iv.intersects(omega) for iv in self.support_p + self.support_q)

    def density(self, x):
        """q − ½ ∂ₓp."""
        return np.asarray(self.q(x)) - 0.5 * np.asarray(self.dp(x))

    def index_tolerance(self) -> float:
        """ε_I = scale · (1 + ‖q‖∞ + ‖∂ₓp‖∞)."""
        return settings.index_zero_scale * (1.0 + self.q.sup_norm() + self.dp.sup_norm())

    def scaled(self, factor: float) -> "CouplingPair":
        q = self.q
        if isinstance(q, CosineSeries):
            q = CosineSeries.from_coefficients(q.amplitudes * factor, q.support_end)
        else:
            q = q * factor
        return CouplingPair(self.p * factor, q, f"{self.name}*{factor:g}")


# Coupling indices

def compute_Ik_with_error(cp: CouplingPair, k: int, rule: Optional[QuadratureRule] = None) -> QuadratureResult:
    """I_k = ∫₀^π (q − ½∂ₓp) φ_k² with its quadrature error."""
    if k < 1:
        raise ValueError(f"Mode index must be ≥ 1, got {k}")
    if cp.is_pure_cosine:
        sign, log_mag = cp.q.log_index(k)
        return QuadratureResult(sign * math.exp(log_mag) if sign else 0.0, 0.0)
    return integrate_callable(lambda x: cp.density(x) * phi(k, x) ** 2, Interval(0.0, PI), rule,
                              cp.breakpoints, cp.frequency + 2 * k)


def compute_Ik(cp: CouplingPair, k: int, rule: Optional[QuadratureRule] = None) -> float:
    return compute_Ik_with_error(cp, k, rule).value


def compute_Iak(cp: CouplingPair, a: float, k: int, rule: Optional[QuadratureRule] = None) -> float:
    """I_{a,k} = ∫₀^a (q − ½∂ₓp) φ_k²."""
    if k < 1:
        raise ValueError(f"Mode index must be ≥ 1, got {k}")
    if not (0.0 < a <= PI + 1e-12):
        raise ValueError(f"a must lie in (0, π], got {a}")
    if cp.is_pure_cosine:
        if a >= cp.q.support_end:
            return compute_Ik(cp, k)
        return cp.q.index_over(k, 0.0, a)
    result = integrate_callable(lambda x: cp.density(x) * phi(k, x) ** 2, Interval(0.0, min(a, PI)), rule,
                                cp.breakpoints, cp.frequency + 2 * k)
    return result.value


def log_index(cp: CouplingPair, k: int, a: Optional[float] = None) -> LogValue:
    """(sign, log|·|) of I_k, or of I_{a,k} when a is given.

    Exact laws are zero only when exactly zero; quadrature values at or
    below ε_I count as zero.
    """
    if cp.is_pure_cosine and (a is None or a >= cp.q.support_end):
        return cp.q.log_index(k)
    value = compute_Ik(cp, k) if a is None else compute_Iak(cp, a, k)
    if cp.is_pure_cosine:
        return (math.copysign(1.0, value), math.log(abs(value))) if value != 0.0 else ZERO_LOG
    if abs(value) <= cp.index_tolerance():
        return ZERO_LOG
    return math.copysign(1.0, value), math.log(abs(value))


def is_index_zero(cp: CouplingPair, value: float) -> bool:
    if cp.is_pure_cosine:
        return value == 0.0
    return abs(value) <= cp.index_tolerance()


@dataclass
class IndexTable:
    """I_k and I_{a,k} for k = 1..K, plain and in log form."""
    a: float
    ks: np.ndarray
    Ik: np.ndarray
    Iak: np.ndarray
    log_Ik: List[LogValue]
    log_Iak: List[LogValue]
    tolerance: float

    @property
    def K(self) -> int:
        return int(self.ks.size)

    def zero_Ik(self, k: int) -> bool:
        return self.log_Ik[k - 1][0] == 0.0

    def zero_Iak(self, k: int) -> bool:
        return self.log_Iak[k - 1][0] == 0.0


def index_table(cp: CouplingPair, a: float, K: int) -> IndexTable:
    ks = np.arange(1, K + 1)
    log_ik = [log_index(cp, int(k)) for k in ks]
    log_iak = [log_index(cp, int(k), a) for k in ks]
    ik = np.array([compute_Ik(cp, int(k)) for k in ks])
    iak = np.array([compute_Iak(cp, a, int(k)) for k in ks])
    logger.debug(f"Index table for {cp.name}: K={K}, a={a:.6f}")
    return IndexTable(a, ks, ik, iak, log_ik, log_iak, cp.index_tolerance())


@dataclass
class IndexLimits:
    """Riemann-Lebesgue limits of I_k and I_{a,k}."""
    I: float
    I_a: float
    last_gap: float
    last_gap_a: float


def compute_limits(cp: CouplingPair, a: Optional[float] = None, K: Optional[int] = None) -> IndexLimits:
    """I = (1/π)∫₀^π (q − ½∂ₓp), I_a analogous on (0,a); optional |I_K − I| diagnostic."""
    full = integrate_callable(cp.density, Interval(0.0, PI), None, cp.breakpoints, cp.frequency).value / PI
    limit_a = 0.0
    if a is not None:
        limit_a = integrate_callable(cp.density, Interval(0.0, a), None, cp.breakpoints, cp.frequency).value / PI
    gap = gap_a = float("nan")
    if K:
        gap = abs(compute_Ik(cp, K) - full)
        if a is not None:
            gap_a = abs(compute_Iak(cp, a, K) - limit_a)
    return IndexLimits(full, limit_a, gap, gap_a)


# Generalized eigenfunctions

def kernel_star(cp: CouplingPair, k: int, Ik: float) -> Callable:
    """F = I_k φ_k + ∂ₓ(pφ_k) − qφ_k."""
    def F(x):
        s = phi(k, x)
        return Ik * s + np.asarray(cp.dp(x)) * s + np.asarray(cp.p(x)) * dphi(k, x) - np.asarray(cp.q(x)) * s
    return F


def kernel_primal(cp: CouplingPair, k: int, Ik: float) -> Callable:
    """G = I_k φ_k − p∂ₓφ_k − qφ_k."""
    def G(x):
        s = phi(k, x)
        return Ik * s - np.asarray(cp.p(x)) * dphi(k, x) - np.asarray(cp.q(x)) * s
    return G


class ModeProfile:
    """ψ(x) = αφ_k(x) − (1/k)∫₀ˣ sin(k(x−ξ)) F(ξ) dξ with ⟨ψ, φ_k⟩ = 0.

    The Volterra integral is kept as cumulative cosine/sine moments
    C(x) = ∫₀ˣ cos(kξ)F, S(x) = ∫₀ˣ sin(kξ)F over fixed Gauss panels.
    """

    def __init__(self, k: int, kernel: Callable, breakpoints: Sequence[float] = (), frequency: float = 0.0,
                 nodes: Optional[int] = None):
        self.k = k
        self.kernel = kernel
        self._t, self._w = gauss_legendre(nodes or settings.quadrature_nodes)
        self._edges = panel_edges(0.0, PI, breakpoints, frequency + 2 * k)
        a, b = self._edges[:-1], self._edges[1:]
        pc = panel_values(lambda x: np.cos(k * x) * kernel(x), a, b, self._t, self._w)
        ps = panel_values(lambda x: np.sin(k * x) * kernel(x), a, b, self._t, self._w)
        self._cum_c = np.concatenate([[0.0], np.cumsum(pc)])
        self._cum_s = np.concatenate([[0.0], np.cumsum(ps)])
        weight = lambda x: ((PI - x) * np.cos(k * x) + np.sin(k * x) / k) / math.sqrt(2.0 * PI)
        pw = panel_values(lambda x: kernel(x) * weight(x), a, b, self._t, self._w)
        self.alpha = float(np.sum(pw)) / k

    def moments(self, x) -> Tuple[np.ndarray, np.ndarray]:
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.clip(np.searchsorted(self._edges, xa, side="right") - 1, 0, self._edges.size - 2)
        lo = self._edges[idx]
        half = 0.5 * (xa - lo)
        pts = lo[:, None] + half[:, None] * (self._t[None, :] + 1.0)
        vals = np.asarray(self.kernel(pts.ravel()), dtype=float).reshape(pts.shape)
        c = self._cum_c[idx] + (np.cos(self.k * pts) * vals) @ self._w * half
        s = self._cum_s[idx] + (np.sin(self.k * pts) * vals) @ self._w * half
        return c, s

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        c, s = self.moments(xa)
        flat = np.atleast_1d(xa)
        k = self.k
        out = self.alpha * phi(k, flat) - (np.sin(k * flat) * c - np.cos(k * flat) * s) / k
        return float(out[0]) if xa.ndim == 0 else out.reshape(xa.shape)

    def derivative(self, x):
        xa = np.asarray(x, dtype=float)
        c, s = self.moments(xa)
        flat = np.atleast_1d(xa)
        k = self.k
        out = self.alpha * dphi(k, flat) - (np.cos(k * flat) * c + np.sin(k * flat) * s)
        return float(out[0]) if xa.ndim == 0 else out.reshape(xa.shape)

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return tuple(float(e) for e in self._edges)

    @property
    def frequency(self) -> float:
        return float(self.k)


def _integrated_residual(profile: ModeProfile, points: int) -> float:
    """‖ψ′(x) − ψ′(0) + ∫₀ˣ (k²ψ + F)‖_{L²(0,π)} sampled on `points` grid points."""
    k = profile.k
    edges = uniform_grid(points, profile.breakpoints)
    t, w = gauss_legendre(settings.residual_nodes)
    cells = panel_values(lambda x: k ** 2 * profile(x) + profile.kernel(x), edges[:-1], edges[1:], t, w)
    r = profile.derivative(edges) - profile.derivative(0.0) + np.concatenate([[0.0], np.cumsum(cells)])
    return math.sqrt(float(trapezoid(r ** 2, edges)))


def converged_residual(profile: ModeProfile, points: Optional[int] = None) -> Tuple[float, int]:
    """Integrated residual of −ψ″ − k²ψ = F, doubling the grid until it stabilizes.

    Returns (residual, points) where `points` is the first grid size whose
    doubling changed the residual by at most the stability tolerance.
    """
    n = points or settings.grid_points
    current = _integrated_residual(profile, n)
    for _ in range(settings.residual_max_doublings):
        finer = _integrated_residual(profile, 2 * n)
        if abs(finer - current) <= settings.residual_stability + 1e-3 * finer:
            return finer, n
        n, current = 2 * n, finer
    logger.warning(f"Eigen-residual at k={profile.k} did not stabilize by {n} grid points: {current:.2e}")
    return current, n


def eigen_residual(profile: ModeProfile, points: Optional[int] = None) -> float:
    return converged_residual(profile, points)[0]


def _grid_for(cp: CouplingPair, grid: Optional[np.ndarray]) -> np.ndarray:
    if grid is not None:
        return np.asarray(grid, dtype=float)
    return uniform_grid(settings.grid_points, cp.breakpoints)


def star_profile(cp: CouplingPair, k: int) -> ModeProfile:
    return ModeProfile(k, kernel_star(cp, k, compute_Ik(cp, k)), cp.breakpoints, cp.frequency)


def primal_profile(cp: CouplingPair, k: int) -> ModeProfile:
    return ModeProfile(k, kernel_primal(cp, k, compute_Ik(cp, k)), cp.breakpoints, cp.frequency)


def build_psi_star(cp: CouplingPair, k: int, grid: Optional[np.ndarray] = None) -> Tuple[np.ndarray, float]:
    """Samples of ψ*_k on the grid and α*_k."""
    profile = star_profile(cp, k)
    return profile(_grid_for(cp, grid)), profile.alpha


def build_psi(cp: CouplingPair, k: int, grid: Optional[np.ndarray] = None) -> Tuple[np.ndarray, float]:
    """Samples of ψ_k on the grid and α_k."""
    profile = primal_profile(cp, k)
    return profile(_grid_for(cp, grid)), profile.alpha


# Decomposition on ω (supports disjoint from ω)

def g_closed_form(k: int, Ik: float, Iak: float, x) -> np.ndarray:
    """g_k(x) = −(I_k/k)√(2/π)(sin kx − kx cos kx)/(2k) − √(π/2)(I_{a,k}/k)cos kx."""
    x = np.asarray(x, dtype=float)
    first = -(Ik / k) * SQRT_2_OVER_PI * (np.sin(k * x) - k * x * np.cos(k * x)) / (2.0 * k)
    return first - SQRT_PI_OVER_2 * (Iak / k) * np.cos(k * x)


def _require_disjoint(cp: CouplingPair, omega: Interval):
    if cp.supports_meet(omega):
        logger.error(f"Supports of {cp.name} meet ω = ({omega.lo:.4f}, {omega.hi:.4f})")
        raise SupportOverlap(f"Supports of p and q must avoid ω = ({omega.lo}, {omega.hi})")


def compute_tau(cp: CouplingPair, omega: Interval, k: int, alpha_star: Optional[float] = None) -> float:
    """τ_k = α*_k − √(π/2)(1/k)∫₀^a cos(kξ)[∂ₓ(pφ_k) − qφ_k] dξ."""
    _require_disjoint(cp, omega)
    if alpha_star is None:
        alpha_star = star_profile(cp, k).alpha
    h = lambda x: (np.cos(k * x) * (np.asarray(cp.dp(x)) * phi(k, x) + np.asarray(cp.p(x)) * dphi(k, x)
                                    - np.asarray(cp.q(x)) * phi(k, x)))
    a_c = integrate_callable(h, Interval(0.0, omega.lo), None, cp.breakpoints, cp.frequency + 2 * k).value
    return alpha_star - SQRT_PI_OVER_2 * a_c / k


def compute_tau_g(cp: CouplingPair, omega: Interval, k: int,
                  points: int = 257) -> Tuple[float, np.ndarray, np.ndarray]:
    """τ_k and g_k sampled on ω, after checking ψ*_k = τ_kφ_k + g_k there.

    Returns (tau, x_omega, g samples).
    """
    _require_disjoint(cp, omega)
    profile = star_profile(cp, k)
    tau = compute_tau(cp, omega, k, profile.alpha)
    x = np.linspace(omega.lo, omega.hi, points)
    g = g_closed_form(k, compute_Ik(cp, k), compute_Iak(cp, omega.lo, k), x)
    defect = float(np.max(np.abs(profile(x) - tau * phi(k, x) - g)))
    if defect > 1e-9:
        logger.warning(f"Decomposition defect {defect:.2e} on ω at k={k}")
    return tau, x, g


# Records

@dataclass
class SpectralRecord:
    """Eigen-data at one mode."""
    k: int
    Ik: float
    Iak: float
    alpha_star: float
    alpha: float
    log_Ik: LogValue
    log_Iak: LogValue
    psi_star_profile: ModeProfile
    psi_profile: ModeProfile
    grid: np.ndarray
    psi_star: np.ndarray
    psi: np.ndarray
    Ik_error: float = 0.0
    tau: Optional[float] = None
    g: Optional[np.ndarray] = None
    g_grid: Optional[np.ndarray] = None
    residual_star: float = float("nan")
    residual: float = float("nan")
    residual_grid: int = 0
    boundary_defect: float = 0.0
    sup_psi_star: float = 0.0
    sup_dpsi_star: float = 0.0

    @property
    def eigen_residual(self) -> float:
        return max(self.residual_star, self.residual)

    @property
    def dpsi_star0(self) -> float:
        """∂ₓψ*_k(0)."""
        return self.psi_star_profile.derivative(0.0)


class SpectralEngine:
    """Builds SpectralRecords for one coupling pair, one mode at a time."""

    def __init__(self, cp: CouplingPair, omega: Optional[Interval] = None, grid: Optional[np.ndarray] = None,
                 residuals: bool = True):
        self.cp = cp
        self.omega = omega
        self.grid = _grid_for(cp, grid)
        self.residuals = residuals
        self._cache: Dict[int, SpectralRecord] = {}

    def record(self, k: int) -> SpectralRecord:
        if k in self._cache:
            return self._cache[k]
        cp = self.cp
        ik = compute_Ik_with_error(cp, k)
        a = self.omega.lo if self.omega is not None else PI
        iak = compute_Iak(cp, a, k)
        star = ModeProfile(k, kernel_star(cp, k, ik.value), cp.breakpoints, cp.frequency)
        primal = ModeProfile(k, kernel_primal(cp, k, ik.value), cp.breakpoints, cp.frequency)
        grid = self.grid
        residual_star = residual = float("nan")
        residual_grid = 0
        if self.residuals:
            start = max(grid.size, settings.grid_points)
            residual_star, n_star = converged_residual(star, start)
            residual, n = converged_residual(primal, start)
            residual_grid = max(n_star, n)
            if residual_grid > start:
                grid = uniform_grid(residual_grid, cp.breakpoints)
        psi_star = star(grid)
        rec = SpectralRecord(
            k=k, Ik=ik.value, Iak=iak, alpha_star=star.alpha, alpha=primal.alpha,
            log_Ik=log_index(cp, k), log_Iak=log_index(cp, k, a),
            psi_star_profile=star, psi_profile=primal, grid=grid,
            psi_star=psi_star, psi=primal(grid), Ik_error=ik.error,
            residual_star=residual_star, residual=residual, residual_grid=residual_grid,
        )
        rec.boundary_defect = max(abs(star(0.0)), abs(star(PI)), abs(primal(0.0)), abs(primal(PI)))
        if rec.boundary_defect > 1e-9:
            logger.warning(f"Boundary defect {rec.boundary_defect:.2e} at k={k}")
        rec.sup_psi_star = float(np.max(np.abs(psi_star)))
        rec.sup_dpsi_star = float(np.max(np.abs(star.derivative(grid))))
        if self.omega is not None and not cp.supports_meet(self.omega):
            rec.tau = compute_tau(cp, self.omega, k, star.alpha)
            rec.g_grid = np.linspace(self.omega.lo, self.omega.hi, 257)
            rec.g = g_closed_form(k, rec.Ik, rec.Iak, rec.g_grid)
        self._cache[k] = rec
        return rec

    def records(self, K: int) -> List[SpectralRecord]:
        out = [self.record(k) for k in range(1, K + 1)]
        if self.residuals:
            worst = max(r.eigen_residual for r in out)
            logger.info(f"Spectral records for {self.cp.name}: K={K}, max eigen-residual {worst:.2e}")
        return out


# Expansions in the biorthogonal bases
# Φ*_{1,k} = (ψ*_k, φ_k), Φ*_{2,k} = (φ_k, 0); Φ_{1,k} = (0, φ_k), Φ_{2,k} = (φ_k, ψ_k)

@dataclass
class InitialDataExpansion:
    coefficients: np.ndarray  # shape (2, K): row 0 is y⁰_{1,k}, row 1 is y⁰_{2,k}
    reconstruction_error: float
    norm: float

    @property
    def K(self) -> int:
        return self.coefficients.shape[1]


def pairing_nodes(records: Sequence[SpectralRecord], *functions) -> Tuple[np.ndarray, np.ndarray]:
    K = max(r.k for r in records)
    pts = breakpoints_of(*functions) + list(records[0].psi_star_profile.breakpoints)
    return composite_nodes(0.0, PI, pts, 2 * K + frequency_of(*functions), nodes=settings.quadrature_nodes)


def expand_initial_data(y0: Tuple[Callable, Callable], records: Sequence[SpectralRecord]) -> InitialDataExpansion:
    """y⁰_{i,k} = ⟨y⁰, Φ*_{i,k}⟩ for k ≤ K, with the truncated reconstruction error."""
    y1, y2 = y0
    x, w = pairing_nodes(records, y1, y2)
    v1 = np.asarray(y1(x), dtype=float) * np.ones_like(x)
    v2 = np.asarray(y2(x), dtype=float) * np.ones_like(x)
    K = len(records)
    coef = np.zeros((2, K))
    rec1 = np.zeros_like(x)
    rec2 = np.zeros_like(x)
    for i, r in enumerate(records):
        ph = phi(r.k, x)
        coef[0, i] = float(np.sum(w * (v1 * r.psi_star_profile(x) + v2 * ph)))
        coef[1, i] = float(np.sum(w * v1 * ph))
        rec1 += coef[1, i] * ph
        rec2 += coef[0, i] * ph + coef[1, i] * r.psi_profile(x)
    norm = math.sqrt(float(np.sum(w * (v1 ** 2 + v2 ** 2))))
    err = math.sqrt(float(np.sum(w * ((rec1 - v1) ** 2 + (rec2 - v2) ** 2))))
    logger.debug(f"Initial data expansion K={K}: reconstruction error {err:.2e}")
    return InitialDataExpansion(coef, err, norm)


def biorthogonality_matrix(records: Sequence[SpectralRecord]) -> np.ndarray:
    """[⟨Φ_{i,k}, Φ*_{j,l}⟩] ordered (i=1 modes, then i=2 modes)."""
    x, w = pairing_nodes(records)
    K = len(records)
    phis = np.array([phi(r.k, x) for r in records])
    stars = np.array([r.psi_star_profile(x) for r in records])
    psis = np.array([r.psi_profile(x) for r in records])
    pp = (phis * w) @ phis.T
    # Φ_{1,k}·Φ*_{1,l} = ⟨φ_k, φ_l⟩; Φ_{1,k}·Φ*_{2,l} = 0
    # Φ_{2,k}·Φ*_{1,l} = ⟨φ_k, ψ*_l⟩ + ⟨ψ_k, φ_l⟩; Φ_{2,k}·Φ*_{2,l} = ⟨φ_k, φ_l⟩
    cross = (phis * w) @ stars.T + (psis * w) @ phis.T
    out = np.zeros((2 * K, 2 * K))
    out[:K, :K] = pp
    out[K:, :K] = cross
    out[K:, K:] = pp
    return out


@dataclass
class DecayConstants:
    """Global constants bounding k|α*_k|, k sup|ψ*_k| and sup|∂ₓψ*_k|."""
    c_alpha: float
    c_psi: float
    c_dpsi: float
    fit_upto: int
    holds: bool
    violations: List[int]


def fit_decay_constants(records: Sequence[SpectralRecord], fit_upto: int = 10, slack: float = 3.0) -> DecayConstants:
    fit = [r for r in records if r.k <= fit_upto]
    if not fit:
        raise FailedPrecondition("fit_decay_constants needs at least one record with k ≤ fit_upto")
    c_alpha = max(abs(r.alpha_star) * r.k for r in fit)
    c_psi = max(r.sup_psi_star * r.k for r in fit)
    c_dpsi = max(r.sup_dpsi_star for r in fit)
    violations = [
        r.k for r in records if r.k > fit_upto and (
            abs(r.alpha_star) * r.k > slack * c_alpha + 1e-14
            or r.sup_psi_star * r.k > slack * c_psi + 1e-14
            or r.sup_dpsi_star > slack * c_dpsi + 1e-14
        )
    ]
    return DecayConstants(c_alpha, c_psi, c_dpsi, fit_upto, not violations, violations)
