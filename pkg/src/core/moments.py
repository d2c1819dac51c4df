"""
Moment Problem Solver
Separated-form distributed controls v = f⁽¹⁾(x)v⁽¹⁾(T−t) + f⁽²⁾(x)v⁽²⁾(T−t)
built mode by mode from 2×2 moment blocks, and the boundary moment problem
for a Dirichlet control on the first component at x = 0.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config.settings import get_settings
from ..models.types import LambdaCase, SolveBranch
from .biortho import BiorthoFamily, ExponentialSum, check_time, time_nodes
from .exceptions import (
    BothIndicesZero, DivergentSeriesFit, MismatchedTruncation, ShapeSearchFailed, SingularA1, ZeroIk,
)
from .funcspace import SQRT_2_OVER_PI, SQRT_PI_OVER_2, Interval, PiecewiseFunction, composite_nodes, phi
from .spectral import InitialDataExpansion, LogValue, SpectralRecord

logger = logging.getLogger(__name__)
settings = get_settings()


# Shape profiles

@dataclass
class ShapeFunctions:
    """Spatial profiles f⁽¹⁾, f⁽²⁾ supported in ω with their mode tables.

    Rows of f, f_hat, f_tilde are indexed by profile (0 for f⁽¹⁾, 1 for f⁽²⁾).
    """
    f1: PiecewiseFunction
    f2: PiecewiseFunction
    omega: Interval
    f: np.ndarray
    f_hat: np.ndarray
    f_tilde: np.ndarray
    B: np.ndarray
    c1: float
    c2: float
    attempt: int = 0

    @property
    def K(self) -> int:
        return int(self.f.shape[1])

    @property
    def profiles(self) -> Tuple[PiecewiseFunction, PiecewiseFunction]:
        return self.f1, self.f2

    def __call__(self, x: Any) -> np.ndarray:
        """(f⁽¹⁾(x), f⁽²⁾(x)) stacked on a leading axis."""
        return np.stack([np.asarray(self.f1(x), dtype=float), np.asarray(self.f2(x), dtype=float)])

    def sine_coefficients(self, G: int) -> np.ndarray:
        """f_k⁽ⁱ⁾ for k ≤ G, shape (2, G); modes past the table come from quadrature."""
        if G <= self.K:
            return self.f[:, :G].copy()
        x, w = _omega_nodes(self.omega, (self.f1, self.f2), G)
        vals = self(x)
        extra = np.array([[float(np.sum(w * vals[i] * phi(k, x))) for k in range(self.K + 1, G + 1)]
                          for i in (0, 1)])
        return np.concatenate([self.f, extra], axis=1)


def _omega_nodes(omega: Interval, functions: Sequence[Any], K: int,
                 extra: Sequence[float] = ()) -> Tuple[np.ndarray, np.ndarray]:
    pts = [b for fn in functions for b in fn.breakpoints] + list(extra)
    return composite_nodes(omega.lo, omega.hi, pts, 2.0 * K, nodes=settings.quadrature_nodes)


def shape_tables(f1: PiecewiseFunction, f2: PiecewiseFunction, omega: Interval,
                 records: Sequence[SpectralRecord]) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(f, f̂, f̃, B) for the modes of the records."""
    K = len(records)
    x, w = _omega_nodes(omega, (f1, f2), K, records[0].psi_star_profile.breakpoints)
    vals = np.stack([np.asarray(f1(x), dtype=float), np.asarray(f2(x), dtype=float)]) * w
    f = np.zeros((2, K))
    f_hat = np.zeros((2, K))
    f_tilde = np.zeros((2, K))
    for n, r in enumerate(records):
        f[:, n] = vals @ phi(r.k, x)
        f_hat[:, n] = vals @ np.cos(r.k * x)
        f_tilde[:, n] = vals @ np.asarray(r.psi_star_profile(x), dtype=float)
    B = f_hat[0] * f[1] - f_hat[1] * f[0]
    return f, f_hat, f_tilde, B


def _shape_bounds(f: np.ndarray, B: np.ndarray, ks: np.ndarray, floor: float) -> Tuple[float, float, List[int]]:
    lower = np.min(np.abs(f), axis=0) * ks ** 3
    det = np.abs(B) * ks ** 5
    failing = [int(k) for k, a, b in zip(ks, lower, det) if a < floor or b < floor]
    return float(np.min(lower)), float(np.min(det)), failing


def build_shapes(omega: Interval, records: Sequence[SpectralRecord], seed: Optional[int] = None,
                 attempts: Optional[int] = None, floor: Optional[float] = None) -> ShapeFunctions:
    """Centered bump f⁽¹⁾ and off-center bump f⁽²⁾ on ω, checked against
    min|f_k⁽ⁱ⁾| ≥ c₁/k³ and |B_k| ≥ c₂/k⁵ for k ≤ K."""
    attempts = attempts or settings.shape_attempts
    floor = settings.shape_floor if floor is None else floor
    rng = np.random.default_rng(settings.default_seed if seed is None else seed)
    L = omega.length
    windows = ((omega.lo, omega.hi), (omega.lo + 0.1 * L, omega.lo + 0.7 * L))
    ks = np.array([r.k for r in records], dtype=float)
    failing: List[int] = []
    for attempt in range(attempts):
        f1 = PiecewiseFunction.bump(*windows[0])
        f2 = PiecewiseFunction.bump(*windows[1])
        f, f_hat, f_tilde, B = shape_tables(f1, f2, omega, records)
        c1, c2, failing = _shape_bounds(f, B, ks, floor)
        if not failing:
            logger.info(f"Shape profiles on ω = ({omega.lo:.4f}, {omega.hi:.4f}) after {attempt + 1} attempt(s): "
                        f"c1 = {c1:.3e}, c2 = {c2:.3e}")
            return ShapeFunctions(f1, f2, omega, f, f_hat, f_tilde, B, c1, c2, attempt)
        logger.warning(f"Shape bounds fail at modes {failing}; re-randomizing profiles")
        shrink = 0.5 * L * rng.uniform(0.6, 1.0)
        lo2, hi2 = np.sort(rng.uniform(0.05, 0.95, 2))
        if hi2 - lo2 < 0.2:
            hi2 = min(0.95, lo2 + 0.2)
            lo2 = hi2 - 0.2
        windows = ((omega.midpoint - shrink, omega.midpoint + shrink),
                   (omega.lo + lo2 * L, omega.lo + hi2 * L))
    logger.error(f"No shape profiles passed the lower-bound checks in {attempts} attempts")
    raise ShapeSearchFailed(f"Shape lower bounds fail at modes {failing} after {attempts} attempts", failing)


# Moment blocks

def lambda_case(log_Ik: LogValue, log_Iak: LogValue, k: int) -> LambdaCase:
    zero_i, zero_a = log_Ik[0] == 0.0, log_Iak[0] == 0.0
    if zero_i and zero_a:
        raise BothIndicesZero(f"I_k = I_(a,k) = 0 at k={k}: the moment problem has no solution", k)
    if zero_a:
        return LambdaCase.LAMBDA2
    if zero_i:
        return LambdaCase.LAMBDA3
    return LambdaCase.LAMBDA1


@dataclass
class MomentBlock:
    """A1·V1 + A2·V2 = F at one mode; V_j = (v⁽¹⁾_{j,k}, v⁽²⁾_{j,k})."""
    k: int
    A1: np.ndarray
    A2: np.ndarray
    F: np.ndarray
    lambda_case: LambdaCase
    Ik: float
    log_Ik: LogValue
    B: float = 0.0
    Iak: float = 0.0
    branch: Optional[SolveBranch] = None


def assemble_block(k: int, shapes: ShapeFunctions, record: SpectralRecord, y0: np.ndarray, T: float) -> MomentBlock:
    """Block at mode k; y0 is the pair (y⁰_{1,k}, y⁰_{2,k})."""
    if record.k != k or k > shapes.K:
        raise ValueError(f"assemble_block inputs disagree on the mode: k={k}, record k={record.k}, K={shapes.K}")
    case = lambda_case(record.log_Ik, record.log_Iak, k)
    n = k - 1
    f = shapes.f[:, n]
    A1 = np.array([[shapes.f_tilde[0, n], shapes.f_tilde[1, n]], [f[0], f[1]]])
    A2 = np.array([[-record.Ik * f[0], -record.Ik * f[1]], [0.0, 0.0]])
    decay = math.exp(-k * k * T)
    y1k, y2k = float(y0[0]), float(y0[1])
    F = np.array([-decay * (y1k - T * record.Ik * y2k), -decay * y2k])
    return MomentBlock(k, A1, A2, F, case, record.Ik, record.log_Ik, float(shapes.B[n]), record.Iak)


@dataclass
class SolverParams:
    """Branch selection data shared by all blocks."""
    T: float
    t0_hat: float
    epsilon: float
    k_eps: int
    tolerance: float = field(default_factory=lambda: settings.block_tolerance)
    det_floor: float = field(default_factory=lambda: settings.det_floor)

    def to_dict(self) -> Dict[str, float]:
        return {"T": self.T, "t0_hat": self.t0_hat, "epsilon": self.epsilon, "k_eps": self.k_eps,
                "tolerance": self.tolerance, "det_floor": self.det_floor}


def choose_epsilon(T: float, t0_hat: float) -> float:
    """(T − T̂₀)/8 clamped to (0, T/8]."""
    if math.isfinite(t0_hat) and T > t0_hat:
        return min((T - t0_hat) / 8.0, T / 8.0)
    logger.warning(f"T = {T} does not exceed the T0 estimate {t0_hat}; using ε = T/8")
    return T / 8.0


def choose_k_eps(log_Ik: Sequence[LogValue], t0_hat: float, epsilon: float) -> int:
    """Smallest k with −log|I_m| ≤ m²(T̂₀ + ε) for every computed m ≥ k, I_m ≠ 0."""
    K = len(log_Ik)
    k_eps = K + 1
    for m in range(K, 0, -1):
        sign, log_mag = log_Ik[m - 1]
        if sign != 0.0 and -log_mag > m * m * (t0_hat + epsilon):
            break
        k_eps = m
    k_eps = min(k_eps, K)
    logger.debug(f"k_eps = {k_eps} for T0 estimate {t0_hat:.6g}, ε = {epsilon:.6g}")
    return k_eps


def select_branch(block: MomentBlock, params: SolverParams) -> SolveBranch:
    if block.lambda_case == LambdaCase.LAMBDA2:
        return SolveBranch.CASE4
    if block.lambda_case == LambdaCase.LAMBDA3:
        return SolveBranch.CASE5
    if block.k <= params.k_eps:
        return SolveBranch.CASE1
    threshold = block.k ** 2 * (params.t0_hat + 2.0 * params.epsilon)
    return SolveBranch.CASE2 if -block.log_Ik[1] <= threshold else SolveBranch.CASE3


@dataclass
class BlockSolution:
    k: int
    V1: np.ndarray
    V2: np.ndarray
    branch: SolveBranch
    lambda_case: LambdaCase
    residual: float
    determinant: Optional[float] = None


def block_residual(block: MomentBlock, V1: np.ndarray, V2: np.ndarray) -> float:
    """‖A1V1 + A2V2 − F‖/(1 + ‖F‖)."""
    r = block.A1 @ V1 + block.A2 @ V2 - block.F
    return float(np.linalg.norm(r) / (1.0 + np.linalg.norm(block.F)))


def solve_block(block: MomentBlock, params: SolverParams) -> BlockSolution:
    """Mode coefficients for one block.

    Cases 1, 2 and 4 use f⁽¹⁾ alone and both time families; Cases 3 and 5
    keep V2 = 0 and invert A1.
    """
    branch = select_branch(block, params)
    block.branch = branch
    V1 = np.zeros(2)
    V2 = np.zeros(2)
    det = None
    if not np.any(block.F):
        return BlockSolution(block.k, V1, V2, branch, block.lambda_case, 0.0)
    if branch in (SolveBranch.CASE1, SolveBranch.CASE2, SolveBranch.CASE4):
        f1, ft1 = block.A1[1, 0], block.A1[0, 0]
        V1[0] = block.F[1] / f1
        V2[0] = (ft1 * V1[0] - block.F[0]) / (block.Ik * f1)
    else:
        det = float(np.linalg.det(block.A1))
        bound = params.det_floor * max(1.0, float(np.linalg.norm(block.A1)) ** 2)
        if abs(det) <= bound:
            diagnostic = SQRT_PI_OVER_2 * abs(block.Iak) / block.k * abs(block.B)
            logger.error(f"Singular A1 at k={block.k}: det = {det:.3e}, expected scale {diagnostic:.3e}")
            raise SingularA1(f"|det A1| = {abs(det):.3e} ≤ {bound:.3e} at k={block.k} "
                             f"(√(π/2)|I_a|/k·|B_k| = {diagnostic:.3e})", block.k, det, bound)
        V1 = np.linalg.solve(block.A1, block.F)
    residual = block_residual(block, V1, V2)
    if residual > params.tolerance:
        logger.warning(f"Block residual {residual:.2e} above {params.tolerance:.1e} at k={block.k}")
    return BlockSolution(block.k, V1, V2, branch, block.lambda_case, residual, det)


# Series decay

@dataclass
class SeriesDecay:
    """Fit log a_k ≈ intercept + slope·k² of a_k = max_j |c_{j,k}|·‖q_{j,k}‖."""
    terms: np.ndarray
    slope: float
    intercept: float
    predicted_rate: float
    tail_bound: float
    divergent: bool

    def to_dict(self) -> Dict[str, float]:
        return {"slope": self.slope, "intercept": self.intercept, "predicted_rate": self.predicted_rate,
                "tail_bound": self.tail_bound, "divergent": float(self.divergent)}


def series_decay(magnitudes: np.ndarray, fam: BiorthoFamily, predicted_rate: float) -> SeriesDecay:
    """magnitudes has shape (..., 2, K) indexed by family row j."""
    mags = np.abs(np.asarray(magnitudes, dtype=float)).reshape(-1, 2, fam.K)
    norms = fam.norms.reshape(2, fam.K)
    terms = np.max(mags * norms[None, :, :], axis=(0, 1))
    ks = np.arange(1, fam.K + 1, dtype=float)
    keep = terms > 0
    if np.count_nonzero(keep) < 3:
        return SeriesDecay(terms, -math.inf, -math.inf, predicted_rate, 0.0, False)
    slope, intercept = np.polyfit(ks[keep] ** 2, np.log(terms[keep]), 1)
    divergent = bool(slope >= 0.0)
    tail = math.inf
    if not divergent:
        tail_k = np.arange(fam.K + 1, fam.K + 65, dtype=float)
        tail = float(np.sum(np.exp(intercept + slope * tail_k ** 2)))
    return SeriesDecay(terms, float(slope), float(intercept), predicted_rate, tail, divergent)


# Distributed control

@dataclass
class ControlSolution:
    """v⁽ⁱ⁾(s) = Σ_{j,k} coefficients[i, j, k] q_{j+1,k+1}(s), s = T − t."""
    T: float
    K: int
    shapes: ShapeFunctions
    family: BiorthoFamily
    coefficients: np.ndarray
    blocks: List[MomentBlock]
    solutions: List[BlockSolution]
    params: SolverParams
    decay: SeriesDecay
    _profiles: Optional[Tuple[ExponentialSum, ExponentialSum]] = field(default=None, repr=False)

    @property
    def profiles(self) -> Tuple[ExponentialSum, ExponentialSum]:
        if self._profiles is None:
            self._profiles = (self.family.collapse(self.coefficients[0]), self.family.collapse(self.coefficients[1]))
        return self._profiles

    @property
    def branches(self) -> Dict[int, SolveBranch]:
        return {s.k: s.branch for s in self.solutions}

    def temporal(self, t: Any) -> np.ndarray:
        """(v⁽¹⁾(T−t), v⁽²⁾(T−t)) stacked on a leading axis."""
        check_time(self.family, t)
        s = self.T - np.clip(np.asarray(t, dtype=float), 0.0, self.T)
        v1, v2 = self.profiles
        return np.stack([np.asarray(v1(s)), np.asarray(v2(s))])

    def modal_forcing(self, G: int):
        """t ↦ v_k(t) = f_k⁽¹⁾v⁽¹⁾(T−t) + f_k⁽²⁾v⁽²⁾(T−t) for k ≤ G, shape (G,) or (G, len t)."""
        table = self.shapes.sine_coefficients(G)

        def forcing(t):
            return np.tensordot(table.T, self.temporal(t), axes=(1, 0))
        return forcing

    def l2_norm(self) -> float:
        """‖v‖_{L²(ω×(0,T))} from the profile Gram and the time-series inner products."""
        x, w = _omega_nodes(self.shapes.omega, self.shapes.profiles, 1)
        vals = self.shapes(x)
        space = (vals * w) @ vals.T
        time = np.array([[self.family.series_inner(self.coefficients[i], self.coefficients[j]) for j in (0, 1)]
                         for i in (0, 1)])
        return math.sqrt(max(0.0, float(np.sum(space * time))))

    def mode_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for s in self.solutions:
            n = s.k - 1
            rows.append({
                "k": s.k, "lambda_case": LambdaCase(s.lambda_case).value, "branch": SolveBranch(s.branch).value,
                "v1_1": self.coefficients[0, 0, n], "v2_1": self.coefficients[1, 0, n],
                "v1_2": self.coefficients[0, 1, n], "v2_2": self.coefficients[1, 1, n],
                "residual": s.residual,
            })
        return rows


def assemble_distributed(sol: ControlSolution, x: Any, t: Any) -> Any:
    """v(x, t); arrays of x and t give a (len t, len x) table."""
    if sol.decay.divergent:
        logger.error(f"Control series does not decay (slope {sol.decay.slope:.3e})")
        raise DivergentSeriesFit(f"|v_(j,k)|·‖q_(j,k)‖ does not decay: fitted slope {sol.decay.slope:.3e} ≥ 0; "
                                 f"T is likely below the minimal time")
    xa = np.asarray(x, dtype=float)
    ta = np.asarray(t, dtype=float)
    space = sol.shapes(np.atleast_1d(xa))
    time = sol.temporal(np.atleast_1d(ta))
    out = time.T @ space
    if xa.ndim == 0 and ta.ndim == 0:
        return float(out[0, 0])
    if xa.ndim == 0:
        return out[:, 0]
    if ta.ndim == 0:
        return out[0]
    return out


def solve_distributed(records: Sequence[SpectralRecord], omega: Interval, expansion: InitialDataExpansion,
                      family: BiorthoFamily, T: float, t0_hat: float, epsilon: Optional[float] = None,
                      seed: Optional[int] = None) -> ControlSolution:
    """Shapes, blocks and per-mode solves assembled into a control."""
    K = len(records)
    if family.K != K or expansion.K != K:
        raise MismatchedTruncation(f"records K={K}, family K={family.K}, initial data K={expansion.K}")
    if abs(family.T - T) > 1e-12:
        raise ValueError(f"family horizon {family.T} differs from T = {T}")
    epsilon = choose_epsilon(T, t0_hat) if epsilon is None else epsilon
    k_eps = choose_k_eps([r.log_Ik for r in records], t0_hat, epsilon)
    params = SolverParams(T, t0_hat, epsilon, k_eps)
    shapes = build_shapes(omega, records, seed)
    blocks, solutions = [], []
    coefficients = np.zeros((2, 2, K))
    for n, r in enumerate(records):
        block = assemble_block(r.k, shapes, r, expansion.coefficients[:, n], T)
        sol = solve_block(block, params)
        blocks.append(block)
        solutions.append(sol)
        coefficients[:, 0, n] = sol.V1
        coefficients[:, 1, n] = sol.V2
    decay = series_decay(coefficients, family, -(T - t0_hat - 3.0 * epsilon))
    counts = {b.value: sum(1 for s in solutions if s.branch == b) for b in SolveBranch}
    logger.info(f"Distributed moment problem K={K}, T={T}: ε = {epsilon:.4g}, k_eps = {k_eps}, "
                f"branches {counts}, decay slope {decay.slope:.3e}")
    return ControlSolution(T, K, shapes, family, coefficients, blocks, solutions, params, decay)


@dataclass
class MomentResidual:
    k: int
    i: int
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def moment_residuals(sol: ControlSolution, records: Sequence[SpectralRecord],
                     expansion: InitialDataExpansion) -> List[MomentResidual]:
    """∬ v𝟙_ωB*θ_{i,k} against −⟨y⁰, θ_{i,k}(0)⟩ for every computed mode.

    Time integrals use composite Gauss on (0,T) in s = T − t, where the
    first dual component is e^{−k²s}φ_k (i = 2) or e^{−k²s}(ψ*_k − sI_kφ_k) (i = 1).
    """
    s, w = time_nodes(sol.T)
    v = np.stack([np.asarray(p(s)) for p in sol.profiles])
    out = []
    for n, r in enumerate(records):
        k = r.k
        e = np.exp(-k * k * s) * w
        m0 = v @ e
        m1 = v @ (s * e)
        f, ft = sol.shapes.f[:, n], sol.shapes.f_tilde[:, n]
        decay = math.exp(-k * k * sol.T)
        y1k, y2k = expansion.coefficients[:, n]
        out.append(MomentResidual(k, 1, float(ft @ m0 - r.Ik * (f @ m1)), -decay * (y1k - sol.T * r.Ik * y2k)))
        out.append(MomentResidual(k, 2, float(f @ m0), -decay * y2k))
    worst = max(m.residual for m in out)
    logger.info(f"Moment identities over K={len(records)}: max residual {worst:.2e}")
    return out


# Boundary control

@dataclass
class BoundaryControl:
    """u(t) = Σ_k u_{1,k}q_{1,k}(T−t) + u_{2,k}q_{2,k}(T−t)."""
    T: float
    K: int
    u: np.ndarray
    family: BiorthoFamily
    norm: float
    decay: SeriesDecay
    t1_hat: float = 0.0
    _profile: Optional[ExponentialSum] = field(default=None, repr=False)

    @property
    def profile(self) -> ExponentialSum:
        if self._profile is None:
            self._profile = self.family.collapse(self.u)
        return self._profile

    def mode_rows(self) -> List[Dict[str, Any]]:
        return [{"k": k, "u_1": self.u[0, k - 1], "u_2": self.u[1, k - 1]} for k in range(1, self.K + 1)]


def solve_boundary(records: Sequence[SpectralRecord], expansion: InitialDataExpansion, T: float,
                   family: BiorthoFamily, t1_hat: float = 0.0, epsilon: Optional[float] = None) -> BoundaryControl:
    """u_{1,k} = −e^{−k²T}⟨y⁰₁,φ_k⟩/φ_k′(0) and
    u_{2,k} = e^{−k²T}/(I_kφ_k′(0))·{y⁰_{1,k} − (I_kT + ψ*_k′(0)/φ_k′(0))y⁰_{2,k}}."""
    K = len(records)
    if family.K != K or expansion.K != K:
        raise MismatchedTruncation(f"records K={K}, family K={family.K}, initial data K={expansion.K}")
    u = np.zeros((2, K))
    for n, r in enumerate(records):
        k = r.k
        sign, log_mag = r.log_Ik
        if sign == 0.0:
            logger.error(f"Boundary moment problem meets I_k = 0 at k={k}")
            raise ZeroIk(f"I_k = 0 at k={k}: boundary control impossible", k)
        y1k, y2k = expansion.coefficients[:, n]
        dphi0 = SQRT_2_OVER_PI * k
        u[0, n] = -math.exp(-k * k * T) * y2k / dphi0
        scale = sign * math.exp(-k * k * T - log_mag) / dphi0
        u[1, n] = scale * (y1k - (r.Ik * T + r.dpsi_star0 / dphi0) * y2k)
    epsilon = choose_epsilon(T, t1_hat) if epsilon is None else epsilon
    decay = series_decay(u, family, -(T - t1_hat - epsilon))
    norm = family.series_norm(u)
    logger.info(f"Boundary moment problem K={K}, T={T}: ‖u‖ = {norm:.4e}, decay slope {decay.slope:.3e}")
    return BoundaryControl(T, K, u, family, norm, decay, t1_hat)


def assemble_boundary(control: BoundaryControl, t: Any) -> Any:
    """u(t) for t ∈ [0, T]."""
    if control.decay.divergent:
        logger.error(f"Boundary series does not decay (slope {control.decay.slope:.3e})")
        raise DivergentSeriesFit(f"|u_(j,k)|·‖q_(j,k)‖ does not decay: fitted slope {control.decay.slope:.3e} ≥ 0; "
                                 f"T is likely below the minimal time")
    check_time(control.family, t)
    s = control.T - np.clip(np.asarray(t, dtype=float), 0.0, control.T)
    return control.profile(s)
