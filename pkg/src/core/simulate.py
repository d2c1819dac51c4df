"""
Galerkin Simulation and Verification
Sine-basis Galerkin model of the coupled system, exponential-integrator time
stepping for the forward and dual problems, closed-form dual solutions, and
the checks that certify a synthesized control: terminal norm ratio, boundary
duality residuals, discrete duality, and observability quotients.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from ..config.settings import get_settings
from ..models.types import ObservationKind
from .biortho import time_moment, time_nodes
from .exceptions import NonConvergedTimeStepping, SupportOverlap
from .funcspace import (
    PI, SQRT_2_OVER_PI, SQRT_PI_OVER_2, Interval, composite_nodes, dphi, gauss_legendre, integrate_callable, phi,
)
from .spectral import CouplingPair, InitialDataExpansion, SpectralRecord, compute_Ik, compute_tau, log_index, star_profile

logger = logging.getLogger(__name__)
settings = get_settings()

Forcing = Callable[[np.ndarray], np.ndarray]


class GalerkinModel:
    """ċ₁ = −Dc₁ + v, ċ₂ = −Dc₂ − Mc₁ in the first G sine modes, D = diag(k²)."""

    def __init__(self, cp: CouplingPair, G: int):
        if G < 1:
            raise ValueError(f"Galerkin truncation must be ≥ 1, got {G}")
        self.cp = cp
        self.G = G
        self.M = coupling_matrix(cp, G)
        D = np.diag(np.arange(1, G + 1, dtype=float) ** 2)
        self.generator = np.block([[-D, np.zeros((G, G))], [-self.M, -D]])

    @property
    def dual_generator(self) -> np.ndarray:
        return self.generator.T

    def project(self, y0: Tuple[Callable, Callable]) -> np.ndarray:
        """Sine coefficients ⟨y⁰ᵢ, φ_k⟩, shape (2, G)."""
        x, w = composite_nodes(0.0, PI, [b for fn in y0 for b in getattr(fn, "breakpoints", ())],
                               2.0 * self.G, nodes=settings.quadrature_nodes)
        basis = np.array([phi(k, x) for k in range(1, self.G + 1)]) * w
        return np.stack([basis @ (np.asarray(fn(x), dtype=float) * np.ones_like(x)) for fn in y0])


def coupling_matrix(cp: CouplingPair, G: int) -> np.ndarray:
    """M[k, m] = ∫₀^π (p φ_m′ + q φ_m) φ_k."""
    x, w = composite_nodes(0.0, PI, cp.breakpoints, 2.0 * G + cp.frequency, nodes=settings.quadrature_nodes)
    ks = np.arange(1, G + 1)
    Phi = np.array([phi(k, x) for k in ks])
    dPhi = np.array([dphi(k, x) for k in ks])
    p = np.asarray(cp.p(x), dtype=float) * np.ones_like(x)
    q = np.asarray(cp.q(x), dtype=float) * np.ones_like(x)
    return (Phi * w) @ (p * dPhi + q * Phi).T


def _source_rule(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]; two nodes give the trapezoid rule."""
    if nodes == 2:
        return np.array([0.0, 1.0]), np.array([0.5, 0.5])
    x, w = gauss_legendre(nodes)
    return 0.5 * (np.asarray(x) + 1.0), 0.5 * np.asarray(w)


def exponential_integrate(L: np.ndarray, c0: np.ndarray, source: Optional[Forcing], T: float,
                          steps: int, nodes: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """c(t_{n+1}) = e^{Lh}c(t_n) + h Σ_j b_j e^{Lh(1−τ_j)} S(t_n + τ_j h).

    Returns (times, coefficients) with coefficients of shape (dim, steps + 1).
    """
    h = T / steps
    times = np.linspace(0.0, T, steps + 1)
    E = expm(L * h)
    out = np.empty((c0.size, steps + 1))
    out[:, 0] = c0
    if source is None:
        for n in range(steps):
            out[:, n + 1] = E @ out[:, n]
        return times, out
    tau, b = _source_rule(nodes or settings.source_nodes)
    weights = [h * bj * expm(L * h * (1.0 - tj)) for tj, bj in zip(tau, b)]
    t_src = (times[:-1, None] + h * tau[None, :]).ravel()
    S = np.asarray(source(t_src), dtype=float).reshape(c0.size, steps, tau.size)
    for n in range(steps):
        acc = E @ out[:, n]
        for j, Wj in enumerate(weights):
            acc += Wj @ S[:, n, j]
        out[:, n + 1] = acc
    return times, out


@dataclass
class StateTrajectory:
    """Sine coefficients of both components on a uniform time grid."""
    times: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    doublings: int = 0
    step_error: float = 0.0
    errors: List[float] = field(default_factory=list)

    @property
    def norms(self) -> np.ndarray:
        """L² norms by Parseval on the sine basis."""
        return np.sqrt(np.sum(self.c1 ** 2, axis=0) + np.sum(self.c2 ** 2, axis=0))

    @property
    def final(self) -> np.ndarray:
        return np.stack([self.c1[:, -1], self.c2[:, -1]])

    @property
    def initial(self) -> np.ndarray:
        return np.stack([self.c1[:, 0], self.c2[:, 0]])

    @property
    def steps(self) -> int:
        return int(self.times.size - 1)

    def observed_order(self) -> Optional[float]:
        """log₂ of successive step-doubling error ratios."""
        errs = [e for e in self.errors if e > 0]
        if len(errs) < 2:
            return None
        return float(np.log2(errs[-2] / errs[-1]))


def _stepped(L: np.ndarray, c0: np.ndarray, source: Optional[Forcing], T: float, steps: Optional[int],
             tol: Optional[float], label: str) -> Tuple[np.ndarray, np.ndarray, int, float, List[float]]:
    steps = steps or settings.galerkin_steps
    tol = tol or settings.galerkin_tolerance
    if steps < 64:
        raise ValueError(f"steps must be ≥ 64, got {steps}")
    scale = max(1.0, float(np.linalg.norm(c0)))
    times, coarse = exponential_integrate(L, c0, source, T, steps)
    errors: List[float] = []
    for doubling in range(1, settings.galerkin_max_doublings + 1):
        steps *= 2
        times, fine = exponential_integrate(L, c0, source, T, steps)
        err = float(np.linalg.norm(fine[:, -1] - coarse[:, -1]))
        errors.append(err)
        logger.debug(f"{label}: {steps} steps, step-doubling difference {err:.2e}")
        if err <= tol * scale:
            return times, fine, doubling, err, errors
        coarse = fine
    logger.error(f"{label} did not converge: last difference {errors[-1]:.2e} > {tol * scale:.2e}")
    raise NonConvergedTimeStepping(f"{label}: step doubling reached {steps} steps with difference "
                                   f"{errors[-1]:.3e} > {tol * scale:.3e}")


def forward_distributed(model: GalerkinModel, y0: np.ndarray, forcing: Optional[Forcing], T: float,
                        steps: Optional[int] = None, tol: Optional[float] = None) -> StateTrajectory:
    """Forward run from sine coefficients y0 (shape (2, G)); forcing(t) gives v_k(t), shape (G, len t)."""
    G = model.G
    c0 = np.asarray(y0, dtype=float).reshape(2 * G)
    source = None
    if forcing is not None:
        def source(t):
            vk = np.asarray(forcing(t), dtype=float).reshape(G, -1)
            return np.concatenate([vk, np.zeros_like(vk)])
    times, c, doublings, err, errors = _stepped(model.generator, c0, source, T, steps, tol, "forward")
    traj = StateTrajectory(times, c[:G], c[G:], doublings, err, errors)
    logger.info(f"Forward run G={G}, T={T}: {traj.steps} steps, ‖y(T)‖ = {traj.norms[-1]:.4e}")
    return traj


def dual_solve(model: GalerkinModel, theta0: np.ndarray, T: float, steps: Optional[int] = None,
               tol: Optional[float] = None) -> StateTrajectory:
    """θ(t) = e^{Lᵀ(T−t)}θ⁰ stepped backward from t = T; stored in forward time order."""
    G = model.G
    c0 = np.asarray(theta0, dtype=float).reshape(2 * G)
    s, c, doublings, err, errors = _stepped(model.dual_generator, c0, None, T, steps, tol, "dual")
    c = c[:, ::-1]
    return StateTrajectory(T - s[::-1], c[:G], c[G:], doublings, err, errors)


@dataclass
class DualState:
    x: np.ndarray
    first: np.ndarray
    second: np.ndarray


def dual_closed_form(record: SpectralRecord, i: int, T: float, t: float) -> DualState:
    """θ_{1,k} = e^{−k²(T−t)}(Φ*_{1,k} − (T−t)I_kΦ*_{2,k}), θ_{2,k} = e^{−k²(T−t)}Φ*_{2,k} on the record grid."""
    if i not in (1, 2):
        raise ValueError(f"dual index must be 1 or 2, got {i}")
    k = record.k
    s = T - t
    e = math.exp(-k * k * s)
    x = record.grid
    ph = phi(k, x)
    if i == 2:
        return DualState(x, e * ph, np.zeros_like(x))
    return DualState(x, e * (record.psi_star - s * record.Ik * ph), e * ph)


def star_coefficients(record: SpectralRecord, G: int) -> np.ndarray:
    """⟨ψ*_k, φ_m⟩ for m ≤ G."""
    profile = record.psi_star_profile
    x, w = composite_nodes(0.0, PI, profile.breakpoints, 2.0 * G, nodes=settings.quadrature_nodes)
    vals = np.asarray(profile(x), dtype=float) * w
    return np.array([vals @ phi(m, x) for m in range(1, G + 1)])


def dual_closed_form_coefficients(record: SpectralRecord, i: int, T: float, t: float, G: int) -> np.ndarray:
    """Sine coefficients (shape (2, G)) of the closed-form dual state."""
    k = record.k
    if k > G:
        raise ValueError(f"mode {k} outside the Galerkin truncation {G}")
    s = T - t
    e = math.exp(-k * k * s)
    unit = np.zeros(G)
    unit[k - 1] = 1.0
    if i == 2:
        return np.stack([e * unit, np.zeros(G)])
    return np.stack([e * (star_coefficients(record, G) - s * record.Ik * unit), e * unit])


# Verification

@dataclass
class NullReport:
    ratio: float
    terminal: np.ndarray
    initial_norm: float
    final_norm: float

    def passed(self, threshold: Optional[float] = None) -> bool:
        return self.ratio <= (settings.null_ratio_threshold if threshold is None else threshold)


def verify_null(traj: StateTrajectory, y0: np.ndarray) -> NullReport:
    """‖y(T)‖/‖y⁰‖, defined as 0 when y⁰ = 0 and y(T) = 0."""
    initial = float(np.linalg.norm(y0))
    final = float(traj.norms[-1])
    if initial == 0.0:
        ratio = 0.0 if final == 0.0 else math.inf
    else:
        ratio = final / initial
    logger.info(f"Terminal norm ratio {ratio:.3e}")
    return NullReport(ratio, np.abs(traj.final), initial, final)


@dataclass
class DualityResidual:
    k: int
    i: int
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def boundary_traces(record: SpectralRecord, T: float, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """∂ₓθ_{1,k}(0, t) and ∂ₓθ_{2,k}(0, t), first component."""
    k = record.k
    s = T - np.asarray(t, dtype=float)
    e = np.exp(-k * k * s)
    dphi0 = SQRT_2_OVER_PI * k
    return e * (record.dpsi_star0 - s * record.Ik * dphi0), e * dphi0


def verify_boundary(expansion: InitialDataExpansion, control: Optional[Callable], records: Sequence[SpectralRecord],
                    T: float) -> List[DualityResidual]:
    """∫₀^T u·∂ₓθ_{i,k}(0,t)dt against −⟨z⁰, θ_{i,k}(0)⟩ for every record."""
    t, w = time_nodes(T)
    u = np.zeros_like(t) if control is None else np.asarray(control(t), dtype=float)
    out = []
    for n, r in enumerate(records):
        z1, z2 = expansion.coefficients[:, n]
        tr1, tr2 = boundary_traces(r, T, t)
        decay = math.exp(-r.k * r.k * T)
        out.append(DualityResidual(r.k, 1, float(np.sum(w * u * tr1)), -decay * (z1 - T * r.Ik * z2)))
        out.append(DualityResidual(r.k, 2, float(np.sum(w * u * tr2)), -decay * z2))
    worst = max((d.residual for d in out), default=0.0)
    logger.info(f"Boundary duality residuals over K={len(records)}: max {worst:.2e}")
    return out


@dataclass
class DualityCheck:
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def duality_residual(model: GalerkinModel, y0: np.ndarray, forcing: Forcing, theta0: np.ndarray, T: float,
                     steps: Optional[int] = None) -> DualityCheck:
    """∫₀^T Σ_k v_k θ₁ₖ against ⟨y(T), θ⁰⟩ − ⟨y⁰, θ(0)⟩."""
    G = model.G
    traj = forward_distributed(model, y0, forcing, T, steps)
    th0 = np.asarray(theta0, dtype=float).reshape(2 * G)
    t, w = time_nodes(T)
    vk = np.asarray(forcing(t), dtype=float).reshape(G, -1)
    LT = model.dual_generator
    lhs = 0.0
    for n, tn in enumerate(t):
        theta = expm(LT * (T - tn)) @ th0
        lhs += w[n] * float(vk[:, n] @ theta[:G])
    theta_init = expm(LT * T) @ th0
    rhs = float(traj.final.reshape(2 * G) @ th0 - np.asarray(y0, dtype=float).reshape(2 * G) @ theta_init)
    return DualityCheck(lhs, rhs)


# Observability quotients

@dataclass
class QuotientRow:
    k: int
    log_D1: float
    log_D2: float
    a: float
    b: float
    error: float = 0.0

    @property
    def log_quotient(self) -> float:
        return self.log_D1 - self.log_D2

    @property
    def degenerate(self) -> bool:
        return not math.isfinite(self.log_D2)

    def value(self, log_value: float) -> float:
        if log_value > 700.0:
            return math.inf
        return math.exp(log_value)


@dataclass
class ObservabilityReport:
    """D₁ = ‖θ(0)‖², D₂ the observed energy, quotient D₁/D₂ per mode."""
    T: float
    observation: ObservationKind
    rows: List[QuotientRow]

    @property
    def modes(self) -> List[int]:
        return [r.k for r in self.rows]

    @property
    def log_quotients(self) -> np.ndarray:
        return np.array([r.log_quotient for r in self.rows])

    @property
    def degenerate(self) -> bool:
        return any(r.degenerate for r in self.rows)

    @property
    def log_lower_bound(self) -> float:
        """log of the implied lower bound on the observability constant."""
        return float(np.max(self.log_quotients)) if self.rows else -math.inf

    def growth(self) -> float:
        """Quotient at the last mode over the first, in log form."""
        return float(self.log_quotients[-1] - self.log_quotients[0])

    def to_rows(self) -> List[Dict[str, Any]]:
        out = []
        for r in self.rows:
            out.append({
                "k": r.k, "a": r.a, "b": r.b, "log_D1": r.log_D1, "log_D2": r.log_D2,
                "log_quotient": r.log_quotient, "D1": r.value(r.log_D1), "D2": r.value(r.log_D2),
                "quotient": r.value(r.log_quotient), "degenerate": r.degenerate, "error": r.error,
            })
        return out


def _psi_star_norm2(profile) -> float:
    x, w = composite_nodes(0.0, PI, profile.breakpoints, 2.0 * profile.k, nodes=settings.quadrature_nodes)
    return float(np.sum(w * np.asarray(profile(x)) ** 2))


def _distributed_row(cp: CouplingPair, omega: Interval, T: float, k: int) -> QuotientRow:
    """a = 1, b = −τ_k: the ω-trace is e^{−k²s}(g_k − sI_kφ_k)."""
    profile = star_profile(cp, k)
    tau = compute_tau(cp, omega, k, profile.alpha)
    Ik = compute_Ik(cp, k)
    D1 = _psi_star_norm2(profile) + (tau + T * Ik) ** 2 + 1.0
    log_D1 = -2.0 * k * k * T + math.log(D1)
    (s_i, l_i), (s_a, l_a) = log_index(cp, k), log_index(cp, k, omega.lo)
    top = max(l_i if s_i else -math.inf, l_a if s_a else -math.inf)
    if not math.isfinite(top):
        return QuotientRow(k, log_D1, -math.inf, 1.0, -tau)
    r_i = s_i * math.exp(l_i - top) if s_i else 0.0
    r_a = s_a * math.exp(l_a - top) if s_a else 0.0

    def P(x):
        x = np.asarray(x, dtype=float)
        H = -(1.0 / k) * SQRT_2_OVER_PI * (np.sin(k * x) - k * x * np.cos(k * x)) / (2.0 * k)
        return r_i * H - r_a * SQRT_PI_OVER_2 * np.cos(k * x) / k

    rate = 2.0 * k * k
    pp = integrate_callable(lambda x: P(x) ** 2, omega, None, (), 2.0 * k)
    pf = integrate_callable(lambda x: P(x) * phi(k, x), omega, None, (), 2.0 * k)
    ff = integrate_callable(lambda x: phi(k, x) ** 2, omega, None, (), 2.0 * k)
    form = (time_moment(0, rate, T) * pp.value - 2.0 * r_i * time_moment(1, rate, T) * pf.value
            + r_i ** 2 * time_moment(2, rate, T) * ff.value)
    error = (pp.error + 2.0 * abs(r_i) * pf.error + r_i ** 2 * ff.error) / max(form, 1e-300)
    if form <= 0.0:
        return QuotientRow(k, log_D1, -math.inf, 1.0, -tau, error)
    return QuotientRow(k, log_D1, 2.0 * top + math.log(form), 1.0, -tau, error)


def _boundary_row(cp: CouplingPair, T: float, k: int) -> QuotientRow:
    """a = 1, b = −√(π/2)ψ*_k′(0)/k: the trace at 0 is −e^{−k²s}sI_k√(2/π)k."""
    profile = star_profile(cp, k)
    b = -SQRT_PI_OVER_2 * profile.derivative(0.0) / k
    Ik = compute_Ik(cp, k)
    log_D1 = -2.0 * k * k * T + math.log(_psi_star_norm2(profile) + (b - T * Ik) ** 2 + 1.0)
    sign, log_mag = log_index(cp, k)
    if sign == 0.0:
        return QuotientRow(k, log_D1, -math.inf, 1.0, b)
    log_D2 = 2.0 * log_mag + math.log((2.0 / PI) * k * k * time_moment(2, 2.0 * k * k, T))
    return QuotientRow(k, log_D1, log_D2, 1.0, b)


def observability_quotient(cp: CouplingPair, omega: Interval, T: float, modes: Sequence[int],
                           observation: ObservationKind = ObservationKind.DISTRIBUTED) -> ObservabilityReport:
    """Quotients D₁/D₂ for adjoint data built to cancel the leading part of the observation."""
    observation = ObservationKind(observation)
    if observation == ObservationKind.DISTRIBUTED and cp.supports_meet(omega):
        logger.error(f"Supports of {cp.name} meet ω; quotient test needs them disjoint")
        raise SupportOverlap(f"Supports of p and q must avoid ω = ({omega.lo}, {omega.hi})")
    rows = []
    for k in modes:
        if observation == ObservationKind.DISTRIBUTED:
            rows.append(_distributed_row(cp, omega, T, int(k)))
        else:
            rows.append(_boundary_row(cp, T, int(k)))
    report = ObservabilityReport(T, observation, rows)
    if report.degenerate:
        logger.warning(f"Observed energy vanishes at modes {[r.k for r in rows if r.degenerate]}")
    else:
        logger.info(f"Observability quotients for {cp.name}, T={T}: log growth {report.growth():.3e}")
    return report
