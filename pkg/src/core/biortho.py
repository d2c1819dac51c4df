"""
Biorthogonal Time Family
Minimal-norm family {q_{1,k}, q_{2,k}} biorthogonal to e_{1,k}(t) = e^{−k²t}
and e_{2,k}(t) = t·e^{−k²t} on (0,T). The Gram system is solved in double or
extended precision; the residual verified in extended precision gates it.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
from scipy import linalg
from scipy.special import gamma, gammainc

from ..config.settings import get_settings
from ..models.types import PrecisionMode
from .exceptions import IllConditioned, OutOfDomain
from .funcspace import QuadratureResult, QuadratureRule, adaptive_gauss, gauss_legendre

logger = logging.getLogger(__name__)
settings = get_settings()


def time_moment(n: int, rate: float, T: float) -> float:
    """∫₀^T tⁿ e^{−rate·t} dt = n!/rateⁿ⁺¹ · P(n+1, rate·T)."""
    if rate == 0.0:
        return T ** (n + 1) / (n + 1)
    return float(gamma(n + 1) / rate ** (n + 1) * gammainc(n + 1, rate * T))


def integrate_time(g: Callable, T: float, panels: int = 8, rule: Optional[QuadratureRule] = None) -> QuadratureResult:
    """Adaptive Gauss-Legendre on (0, T) with uniform starting panels."""
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    return adaptive_gauss(g, np.linspace(0.0, T, panels + 1), rule or QuadratureRule())


def time_nodes(T: float, panels: int = 64, nodes: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Fixed composite Gauss-Legendre nodes and weights on (0, T)."""
    x, w = gauss_legendre(nodes or settings.quadrature_nodes)
    edges = np.linspace(0.0, T, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    return (mid[:, None] + half[:, None] * x[None, :]).ravel(), (half[:, None] * w[None, :]).ravel()


def _layout(K: int) -> Tuple[np.ndarray, np.ndarray]:
    """Decay rates k² and t-powers of e_{i,k}, ordered i = 1 modes then i = 2 modes."""
    ks = np.arange(1, K + 1, dtype=float)
    return np.concatenate([ks ** 2, ks ** 2]), np.concatenate([np.zeros(K, dtype=int), np.ones(K, dtype=int)])


def gram_matrix(K: int, T: float) -> np.ndarray:
    """G[m, n] = ∫₀^T e_m e_n for the ordered family e_{1,1..K}, e_{2,1..K}."""
    if K < 1 or T <= 0:
        raise ValueError(f"gram_matrix needs K ≥ 1 and T > 0, got K={K}, T={T}")
    rates, powers = _layout(K)
    s = rates[:, None] + rates[None, :]
    n = powers[:, None] + powers[None, :]
    G = gamma(n + 1) / s ** (n + 1) * gammainc(n + 1, s * T)
    return 0.5 * (G + G.T)


def gram_matrix_mp(K: int, T: float, digits: Optional[int] = None) -> mpmath.matrix:
    digits = digits or settings.mp_digits
    rates, powers = _layout(K)
    size = 2 * K
    with mpmath.workdps(digits):
        Tm = mpmath.mpf(T)
        G = mpmath.matrix(size, size)
        for i in range(size):
            for j in range(i, size):
                s = mpmath.mpf(int(rates[i] + rates[j]))
                n = int(powers[i] + powers[j])
                G[i, j] = G[j, i] = mpmath.gammainc(n + 1, 0, s * Tm) / s ** (n + 1)
    return G


def _to_numpy(A: mpmath.matrix) -> np.ndarray:
    return np.array([[float(A[i, j]) for j in range(A.cols)] for i in range(A.rows)])


def _residual(G: mpmath.matrix, C: mpmath.matrix, digits: int) -> np.ndarray:
    """[∫ e_m q_n − δ_mn] evaluated in extended precision."""
    with mpmath.workdps(digits):
        R = G * C.T - mpmath.eye(G.rows)
        return _to_numpy(R)


@dataclass
class ExponentialSum:
    """Σ_m c_m t^{n_m} e^{−r_m t}; coefficients kept in mpmath when the family is extended."""
    rates: np.ndarray
    powers: np.ndarray
    coefficients: np.ndarray
    mp_coefficients: Optional[List[Any]] = None
    digits: int = 0

    def __call__(self, t: Any) -> Any:
        ta = np.asarray(t, dtype=float)
        flat = np.atleast_1d(ta)
        if self.mp_coefficients is None:
            basis = flat[None, :] ** self.powers[:, None] * np.exp(-np.outer(self.rates, flat))
            out = self.coefficients @ basis
        else:
            out = np.empty(flat.size)
            with mpmath.workdps(self.digits):
                for idx, tv in enumerate(flat):
                    tm = mpmath.mpf(float(tv))
                    total = mpmath.mpf(0)
                    for c, r, n in zip(self.mp_coefficients, self.rates, self.powers):
                        total += c * tm ** int(n) * mpmath.exp(-int(r) * tm)
                    out[idx] = float(total)
        return float(out[0]) if ta.ndim == 0 else out.reshape(ta.shape)


@dataclass
class BiorthoFamily:
    """q_{j,l} = Σ_m coefficients[n, m] e_m with n = (j−1)K + (l−1)."""
    T: float
    K: int
    coefficients: np.ndarray
    residual_matrix: np.ndarray
    gram_condition: float
    min_eigenvalue: float
    norms: np.ndarray
    precision: PrecisionMode
    digits: int = 0
    mp_coefficients: Optional[mpmath.matrix] = field(default=None, repr=False)
    mp_gram_inverse: Optional[mpmath.matrix] = field(default=None, repr=False)

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual_matrix)))

    def index(self, j: int, l: int) -> int:
        if j not in (1, 2) or not 1 <= l <= self.K:
            raise ValueError(f"family index (j, l) = ({j}, {l}) outside j ∈ {{1,2}}, 1 ≤ l ≤ {self.K}")
        return (j - 1) * self.K + (l - 1)

    def norm(self, j: int, l: int) -> float:
        return float(self.norms[self.index(j, l)])

    def collapse(self, weights: np.ndarray) -> ExponentialSum:
        """Σ_{j,l} weights[j−1, l−1] q_{j,l} as one exponential sum."""
        w = np.asarray(weights, dtype=float).reshape(2 * self.K)
        rates, powers = _layout(self.K)
        if self.mp_coefficients is None:
            return ExponentialSum(rates, powers, w @ self.coefficients)
        with mpmath.workdps(self.digits):
            row = mpmath.matrix([[mpmath.mpf(float(v)) for v in w]]) * self.mp_coefficients
            mp_coef = [row[0, m] for m in range(2 * self.K)]
            return ExponentialSum(rates, powers, np.array([float(c) for c in mp_coef]), mp_coef, self.digits)

    def series_inner(self, left: np.ndarray, right: np.ndarray) -> float:
        """⟨Σ a_n q_n, Σ b_n q_n⟩_{L²(0,T)} = aᵀG⁻¹b."""
        a = np.asarray(left, dtype=float).reshape(2 * self.K)
        b = np.asarray(right, dtype=float).reshape(2 * self.K)
        if self.mp_gram_inverse is None:
            return float(a @ self.coefficients @ b)
        with mpmath.workdps(self.digits):
            am = mpmath.matrix([float(v) for v in a])
            bm = mpmath.matrix([float(v) for v in b])
            return float((am.T * self.mp_gram_inverse * bm)[0, 0])

    def series_norm(self, weights: np.ndarray) -> float:
        """‖Σ w_n q_n‖_{L²(0,T)}."""
        return math.sqrt(max(0.0, self.series_inner(weights, weights)))


def check_time(fam: BiorthoFamily, t: Any):
    ta = np.asarray(t, dtype=float)
    if np.any(ta < -1e-12) or np.any(ta > fam.T + 1e-12):
        raise OutOfDomain(f"t must lie in [0, {fam.T}], got range [{float(ta.min()):.6g}, {float(ta.max()):.6g}]")


def evaluate(fam: BiorthoFamily, j: int, l: int, t: Any) -> Any:
    """q_{j,l}(t) for t ∈ [0, T]."""
    check_time(fam, t)
    weights = np.zeros(2 * fam.K)
    weights[fam.index(j, l)] = 1.0
    return fam.collapse(weights)(np.clip(t, 0.0, fam.T))


def _build_double(G: np.ndarray) -> np.ndarray:
    factor = linalg.cho_factor(G, lower=True)
    return linalg.cho_solve(factor, np.eye(G.shape[0]))


def build_family(K: int, T: float, tol: Optional[float] = None,
                 precision: PrecisionMode = PrecisionMode.AUTO, digits: Optional[int] = None) -> BiorthoFamily:
    """Minimal-norm biorthogonal family from the Gram inverse.

    `auto` solves in double for K ≤ double_precision_budget and escalates to
    mpmath when the residual verified in extended precision exceeds tol.
    """
    if K < 1 or T <= 0:
        raise ValueError(f"build_family needs K ≥ 1 and T > 0, got K={K}, T={T}")
    tol = tol or settings.biortho_tolerance
    digits = digits or settings.mp_digits
    precision = PrecisionMode(precision)
    G_mp = gram_matrix_mp(K, T, digits)
    with mpmath.workdps(digits):
        eigenvalues = mpmath.eigsy(G_mp, eigvals_only=True)
        min_eig = float(min(eigenvalues[i] for i in range(eigenvalues.rows)))

    try_double = precision == PrecisionMode.DOUBLE or (
        precision == PrecisionMode.AUTO and K <= settings.double_precision_budget)
    if try_double:
        residual, condition = math.inf, math.inf
        try:
            G = gram_matrix(K, T)
            C = _build_double(G)
            condition = float(np.linalg.cond(G))
            with mpmath.workdps(digits):
                C_mp = mpmath.matrix(C.tolist())
            R = _residual(G_mp, C_mp, digits)
            residual = float(np.max(np.abs(R)))
        except linalg.LinAlgError as e:
            logger.warning(f"Double-precision Cholesky failed for K={K}, T={T}: {e}")
        if residual <= tol:
            logger.info(f"Biorthogonal family K={K}, T={T} in double precision; residual {residual:.2e}, "
                        f"cond {condition:.2e}")
            norms = np.sqrt(np.clip(np.diag(C), 0.0, None))
            return BiorthoFamily(T, K, C, R, condition, min_eig, norms, PrecisionMode.DOUBLE)
        if precision == PrecisionMode.DOUBLE:
            logger.error(f"Double-precision family rejected: residual {residual:.2e} > {tol:.2e}")
            raise IllConditioned(f"Biorthogonality residual {residual:.3e} exceeds {tol:.1e}; lower K or use "
                                 f"extended precision", residual, condition)
        logger.warning(f"Double-precision residual {residual:.2e} > {tol:.2e}; escalating to {digits} digits")

    with mpmath.workdps(digits):
        try:
            mpmath.cholesky(G_mp)
        except ValueError as e:
            raise IllConditioned(f"Gram matrix not positive definite at {digits} digits: {e}",
                                 math.inf, math.inf) from e
        C_mp = mpmath.inverse(G_mp)
        condition = float(mpmath.mnorm(G_mp, 1) * mpmath.mnorm(C_mp, 1))
        diag = [C_mp[i, i] for i in range(2 * K)]
        norms = np.array([float(mpmath.sqrt(d)) if d > 0 else 0.0 for d in diag])
    R = _residual(G_mp, C_mp, digits)
    residual = float(np.max(np.abs(R)))
    if residual > tol:
        logger.error(f"Extended-precision family rejected: residual {residual:.2e} > {tol:.2e}")
        raise IllConditioned(f"Biorthogonality residual {residual:.3e} exceeds {tol:.1e} at {digits} digits; "
                             f"lower K or raise mp_digits", residual, condition)
    logger.info(f"Biorthogonal family K={K}, T={T} at {digits} digits; residual {residual:.2e}, cond {condition:.2e}")
    return BiorthoFamily(T, K, _to_numpy(C_mp), R, condition, min_eig, norms, PrecisionMode.EXTENDED,
                         digits, C_mp, C_mp)


@dataclass
class NormGrowth:
    """log‖q_{j,k}‖ ≤ εk² + C_ε over the computed modes."""
    epsilon: float
    constant: float
    log_norms: np.ndarray


def fit_norm_growth(fam: BiorthoFamily, j: int = 1) -> NormGrowth:
    ks = np.arange(1, fam.K + 1, dtype=float)
    logs = np.log(np.array([fam.norm(j, int(k)) for k in ks]))
    if fam.K >= 2:
        slope, _ = np.polyfit(ks ** 2, logs, 1)
    else:
        slope = 0.0
    epsilon = max(float(slope), 0.0)
    constant = float(np.max(logs - epsilon * ks ** 2))
    return NormGrowth(epsilon, constant, logs)


def family_table(fam: BiorthoFamily) -> List[dict]:
    """Per-(j, l) rows of norms and worst residuals for CSV export."""
    rows = []
    for j in (1, 2):
        for l in range(1, fam.K + 1):
            n = fam.index(j, l)
            rows.append({
                "j": j, "l": l, "norm": float(fam.norms[n]),
                "max_residual": float(np.max(np.abs(fam.residual_matrix[:, n]))),
            })
    return rows
