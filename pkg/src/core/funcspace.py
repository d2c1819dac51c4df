"""
Function Spaces and Quadrature
Piecewise polynomials on [0,π], exact sine/cosine series, intervals and
adaptive Gauss-Legendre panels shared by every numerical module.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial

from ..config.settings import get_settings
from ..models.types import SmoothnessClass
from .exceptions import InsufficientSmoothness, NonConvergedQuadrature

logger = logging.getLogger(__name__)
settings = get_settings()

PI = math.pi
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
SQRT_PI_OVER_2 = math.sqrt(math.pi / 2.0)
_EDGE_SNAP = 1e-12


@lru_cache(maxsize=32)
def gauss_legendre(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def phi(k: int, x: Any) -> np.ndarray:
    """Normalized Dirichlet eigenfunction √(2/π) sin(kx)."""
    return SQRT_2_OVER_PI * np.sin(k * np.asarray(x, dtype=float))


def dphi(k: int, x: Any) -> np.ndarray:
    """Derivative of phi(k, ·)."""
    return SQRT_2_OVER_PI * k * np.cos(k * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Interval:
    """Open subinterval (lo, hi) of (0, π)."""
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if abs(lo) < _EDGE_SNAP:
            lo = 0.0
        if abs(hi - PI) < _EDGE_SNAP:
            hi = PI
        if not (0.0 <= lo < hi <= PI):
            raise ValueError(f"Interval must satisfy 0 ≤ lo < hi ≤ π, got ({self.lo}, {self.hi})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: Any) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x > self.lo) & (x < self.hi)

    def intersects(self, other: "Interval") -> bool:
        return min(self.hi, other.hi) > max(self.lo, other.lo)

    def intersection(self, other: "Interval") -> Optional["Interval"]:
        if not self.intersects(other):
            return None
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))

    def shrink(self, factor: float) -> "Interval":
        """Same midpoint, length scaled by factor."""
        half = 0.5 * self.length * factor
        return Interval(self.midpoint - half, self.midpoint + half)

    def as_tuple(self) -> Tuple[float, float]:
        return (self.lo, self.hi)


FULL_INTERVAL = Interval(0.0, PI)


@dataclass(frozen=True)
class QuadratureRule:
    """Composite Gauss-Legendre rule with adaptive bisection."""
    panels: int = 1
    nodes: int = field(default_factory=lambda: settings.quadrature_nodes)
    tolerance: float = field(default_factory=lambda: settings.quadrature_tolerance)
    max_levels: int = field(default_factory=lambda: settings.quadrature_max_levels)
    scheme: str = "gauss-legendre"

    def __post_init__(self):
        if self.panels < 1:
            raise ValueError("QuadratureRule needs at least one panel per segment")
        if self.nodes < 2:
            raise ValueError("QuadratureRule needs at least two nodes per panel")
        if self.tolerance <= 0:
            raise ValueError("QuadratureRule tolerance must be positive")


class QuadratureResult(NamedTuple):
    value: float
    error: float


def _merge_points(points: Iterable[float], lo: float, hi: float) -> np.ndarray:
    pts = [lo, hi] + [float(p) for p in points if lo < float(p) < hi]
    pts = np.unique(np.asarray(pts, dtype=float))
    keep = np.concatenate([[True], np.diff(pts) > 1e-14])
    return pts[keep]


def panel_edges(lo: float, hi: float, breakpoints: Iterable[float] = (), frequency: float = 0.0,
                panels: int = 1) -> np.ndarray:
    """Panel edges aligned to breakpoints, with at least
    `min_panels_per_period` panels per oscillation of angular frequency `frequency`."""
    cuts = _merge_points(breakpoints, lo, hi)
    edges: List[np.ndarray] = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        n = panels
        if frequency > 0:
            periods = (b - a) * frequency / (2.0 * PI)
            n = max(n, int(math.ceil(periods * settings.min_panels_per_period)))
        edges.append(np.linspace(a, b, n + 1)[:-1])
    edges.append(np.array([cuts[-1]]))
    return np.concatenate(edges)


def composite_nodes(lo: float, hi: float, breakpoints: Iterable[float] = (), frequency: float = 0.0,
                    nodes: int = 16, panels: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Fixed composite Gauss-Legendre nodes and weights (no error estimate)."""
    edges = panel_edges(lo, hi, breakpoints, frequency, panels)
    x, w = gauss_legendre(nodes)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts


def panel_values(g: Callable, a: np.ndarray, b: np.ndarray, x: np.ndarray, w: np.ndarray) -> np.ndarray:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    pts = mid[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(g(pts.ravel()), dtype=float).reshape(pts.shape)
    return (vals @ w) * half


def adaptive_gauss(g: Callable, edges: np.ndarray, rule: QuadratureRule) -> QuadratureResult:
    """Integrate g over the panels in `edges`, bisecting panels until
    two successive refinements agree within the rule tolerance."""
    x, w = gauss_legendre(rule.nodes)
    a, b = edges[:-1].copy(), edges[1:].copy()
    total_length = float(edges[-1] - edges[0])
    if total_length <= 0:
        return QuadratureResult(0.0, 0.0)
    coarse = panel_values(g, a, b, x, w)
    scale = max(1.0, abs(float(coarse.sum())))
    accepted = 0.0
    error = 0.0
    for level in range(rule.max_levels):
        m = 0.5 * (a + b)
        left = panel_values(g, a, m, x, w)
        right = panel_values(g, m, b, x, w)
        fine = left + right
        diff = np.abs(fine - coarse)
        budget = rule.tolerance * scale * (b - a) / total_length
        ok = diff <= budget
        accepted += float(fine[ok].sum())
        error += float(diff[ok].sum())
        if ok.all():
            return QuadratureResult(accepted, error)
        bad = ~ok
        a = np.concatenate([a[bad], m[bad]])
        b = np.concatenate([m[bad], b[bad]])
        coarse = np.concatenate([left[bad], right[bad]])
    pending = float(coarse.sum())
    raise NonConvergedQuadrature(
        f"Quadrature stalled after {rule.max_levels} levels with {a.size} unresolved panels",
        estimate=accepted + pending,
        error=error,
    )


def integrate_callable(g: Callable, iv: Interval, rule: Optional[QuadratureRule] = None,
                       breakpoints: Iterable[float] = (), frequency: float = 0.0) -> QuadratureResult:
    """∫_iv g with value and error estimate."""
    rule = rule or QuadratureRule()
    edges = panel_edges(iv.lo, iv.hi, breakpoints, frequency, rule.panels)
    return adaptive_gauss(g, edges, rule)


def breakpoints_of(*functions: Any) -> List[float]:
    """Union of the breakpoints declared by the given functions."""
    pts: List[float] = []
    for fn in functions:
        pts.extend(getattr(fn, "breakpoints", ()) or ())
    return sorted(set(float(p) for p in pts))


def frequency_of(*functions: Any) -> float:
    """Sum of declared angular frequencies (frequencies add under products)."""
    return float(sum(getattr(fn, "frequency", 0.0) for fn in functions))


class PiecewiseFunction:
    """Piecewise polynomial on [0,π].

    Each segment is a numpy Polynomial whose domain is the segment itself,
    so high-degree approximants stay well conditioned. Coefficient lists
    crossing the configuration boundary are in absolute x, ascending degree.
    """

    frequency = 0.0

    def __init__(self, breakpoints: Sequence[float], segments: Sequence[Any],
                 smoothness: SmoothnessClass = SmoothnessClass.LINFTY, validate: bool = True):
        bp = np.asarray(breakpoints, dtype=float).copy()
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("PiecewiseFunction needs at least two breakpoints")
        if abs(bp[0]) < _EDGE_SNAP:
            bp[0] = 0.0
        if abs(bp[-1] - PI) < _EDGE_SNAP:
            bp[-1] = PI
        if len(segments) != bp.size - 1:
            raise ValueError(f"Expected {bp.size - 1} segments, got {len(segments)}")
        polys = []
        for seg, lo, hi in zip(segments, bp[:-1], bp[1:]):
            if isinstance(seg, Polynomial):
                poly = seg if np.allclose(seg.domain, [lo, hi]) else seg.convert(domain=[lo, hi])
            else:
                coef = np.atleast_1d(np.asarray(seg, dtype=float))
                poly = Polynomial(coef).convert(domain=[lo, hi])
            polys.append(poly)
        bp.setflags(write=False)
        self._bp = bp
        self._segments: Tuple[Polynomial, ...] = tuple(polys)
        self.smoothness = SmoothnessClass(smoothness)
        self.certified_error = 0.0
        if validate:
            self._validate()

    def _validate(self):
        bp = self._bp
        if bp[0] != 0.0 or bp[-1] != PI:
            raise ValueError(f"Breakpoints must start at 0 and end at π, got {bp[0]} and {bp[-1]}")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("Breakpoints must be strictly increasing")
        if self.smoothness.order >= 1:
            scale = max(1.0, self.sup_norm())
            for i in range(1, bp.size - 1):
                left = self._segments[i - 1](bp[i])
                right = self._segments[i](bp[i])
                if abs(left - right) > 1e-12 * scale:
                    raise ValueError(
                        f"Jump {abs(left - right):.3e} at x = {bp[i]:.6f} contradicts {self.smoothness.value}"
                    )

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return tuple(float(b) for b in self._bp)

    @property
    def segments(self) -> Tuple[Polynomial, ...]:
        return self._segments

    @property
    def degree(self) -> int:
        return max(seg.degree() for seg in self._segments)

    # Construction helpers

    @classmethod
    def constant(cls, value: float) -> "PiecewiseFunction":
        return cls([0.0, PI], [[float(value)]], SmoothnessClass.W2INFTY)

    @classmethod
    def zero(cls) -> "PiecewiseFunction":
        return cls.constant(0.0)

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> "PiecewiseFunction":
        """Single polynomial in absolute x on all of [0,π]."""
        return cls([0.0, PI], [list(coefficients)], SmoothnessClass.W2INFTY)

    @classmethod
    def bump(cls, lo: float, hi: float, height: float = 1.0, power: int = 2) -> "PiecewiseFunction":
        """((x−lo)(hi−x))^power scaled to peak `height`, zero outside (lo, hi)."""
        if not (0.0 <= lo < hi <= PI):
            raise ValueError(f"bump window must satisfy 0 ≤ lo < hi ≤ π, got ({lo}, {hi})")
        core = Polynomial([-lo * hi, lo + hi, -1.0]) ** power
        core = core * (height / (0.25 * (hi - lo) ** 2) ** power)
        breakpoints = [0.0]
        segments: List[Any] = []
        if lo > 0.0:
            breakpoints.append(lo)
            segments.append([0.0])
        segments.append(list(core.coef))
        breakpoints.append(hi)
        if hi < PI:
            segments.append([0.0])
            breakpoints.append(PI)
        smoothness = SmoothnessClass.W2INFTY if power >= 2 else SmoothnessClass.W1INFTY
        return cls(breakpoints, segments, smoothness)

    @classmethod
    def from_spec(cls, pieces: Sequence[Dict[str, Any]],
                  smoothness: SmoothnessClass = SmoothnessClass.LINFTY) -> "PiecewiseFunction":
        """Build from [{"interval": [lo, hi], "coefficients": [...]}, ...]."""
        ordered = sorted(pieces, key=lambda piece: piece["interval"][0])
        bp = [float(ordered[0]["interval"][0])]
        segments = []
        for piece in ordered:
            lo, hi = (float(v) for v in piece["interval"])
            if abs(lo - bp[-1]) > 1e-12:
                raise ValueError(f"Pieces must tile [0,π] without gaps; gap before {lo}")
            bp.append(hi)
            segments.append(list(piece["coefficients"]))
        return cls(bp, segments, smoothness)

    def to_spec(self) -> List[Dict[str, Any]]:
        pieces = []
        for seg, lo, hi in zip(self._segments, self._bp[:-1], self._bp[1:]):
            absolute = seg.convert(domain=[-1.0, 1.0], window=[-1.0, 1.0])
            pieces.append({"interval": [float(lo), float(hi)], "coefficients": [float(c) for c in absolute.coef]})
        return pieces

    @classmethod
    def from_callable(cls, fn: Callable, breakpoints: Sequence[float] = (0.0, PI),
                      smoothness: SmoothnessClass = SmoothnessClass.LINFTY,
                      degree: Optional[int] = None, tol: Optional[float] = None,
                      max_depth: int = 40) -> "PiecewiseFunction":
        """Certified piecewise Chebyshev approximant of fn.

        Every interval between consecutive breakpoints is bisected until the
        degree-`degree` interpolant matches fn to `tol` (relative to max(1,|fn|))
        on a dense sample.
        """
        degree = degree or settings.approximant_degree
        tol = tol or settings.approximant_tolerance
        cuts = list(_merge_points(breakpoints, 0.0, PI))
        out_bp: List[float] = [cuts[0]]
        out_segs: List[Polynomial] = []
        worst = 0.0
        sample = np.linspace(-1.0, 1.0, 4 * degree + 1)
        for a, b in zip(cuts[:-1], cuts[1:]):
            stack = [(a, b, 0)]
            while stack:
                lo, hi, depth = stack.pop()
                cheb = Chebyshev.interpolate(fn, degree, domain=[lo, hi])
                xs = lo + (sample + 1.0) * 0.5 * (hi - lo)
                exact = np.asarray(fn(xs), dtype=float)
                err = float(np.max(np.abs(cheb(xs) - exact)))
                scale = max(1.0, float(np.max(np.abs(exact))))
                tail = float(np.max(np.abs(cheb.coef[-3:])))
                if (err <= tol * scale and tail <= tol * scale) or depth >= max_depth:
                    if depth >= max_depth:
                        logger.warning(f"Approximant on ({lo:.6g}, {hi:.6g}) stopped at depth {depth}, error {err:.2e}")
                    out_segs.append(cheb.convert(kind=Polynomial))
                    out_bp.append(hi)
                    worst = max(worst, err / scale)
                else:
                    mid = 0.5 * (lo + hi)
                    stack.append((mid, hi, depth + 1))
                    stack.append((lo, mid, depth + 1))
        result = cls(out_bp, out_segs, smoothness, validate=False)
        result.certified_error = worst
        logger.debug(f"Approximant with {len(out_segs)} segments, certified error {worst:.2e}")
        return result

    # Evaluation

    def _locate(self, x: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._bp, x, side="right") - 1
        return np.clip(idx, 0, len(self._segments) - 1)

    def __call__(self, x: Any) -> Any:
        xa = np.asarray(x, dtype=float)
        flat = xa.ravel()
        out = np.zeros_like(flat)
        idx = self._locate(flat)
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = self._segments[i](flat[mask])
        if xa.ndim == 0:
            return float(out[0])
        return out.reshape(xa.shape)

    def sup_norm(self) -> float:
        best = 0.0
        for seg, lo, hi in zip(self._segments, self._bp[:-1], self._bp[1:]):
            xs = np.linspace(lo, hi, max(16, 4 * seg.degree() + 2))
            best = max(best, float(np.max(np.abs(seg(xs)))))
        return best

    def support(self, tol: float = 1e-14) -> List[Interval]:
        """Merged intervals of segments that are not identically zero."""
        pieces: List[Interval] = []
        scale = max(1.0, self.sup_norm())
        for seg, lo, hi in zip(self._segments, self._bp[:-1], self._bp[1:]):
            if np.max(np.abs(seg.coef)) <= tol * scale:
                continue
            if pieces and abs(pieces[-1].hi - lo) < 1e-14:
                pieces[-1] = Interval(pieces[-1].lo, hi)
            else:
                pieces.append(Interval(lo, hi))
        return pieces

    def is_zero(self) -> bool:
        return not self.support()

    # Calculus

    def derivative(self) -> "PiecewiseFunction":
        """Segment-wise derivative; smoothness drops one class."""
        if self.smoothness.order < 1:
            raise InsufficientSmoothness("derivative needs a W1infty function, got Linfty")
        segs = [seg.deriv() for seg in self._segments]
        return PiecewiseFunction(self._bp, segs, SmoothnessClass.from_order(self.smoothness.order - 1), validate=False)

    def antiderivative(self) -> "PiecewiseFunction":
        """F(x) = ∫₀ˣ f, continuous by construction."""
        segs = []
        running = 0.0
        for seg, lo, hi in zip(self._segments, self._bp[:-1], self._bp[1:]):
            prim = seg.integ(lbnd=lo, k=[running])
            segs.append(prim)
            running = float(prim(hi))
        return PiecewiseFunction(self._bp, segs, SmoothnessClass.from_order(self.smoothness.order + 1), validate=False)

    # Algebra on a common refinement

    def refine(self, points: Iterable[float]) -> "PiecewiseFunction":
        bp = _merge_points(list(self._bp) + list(points), 0.0, PI)
        segs = []
        for lo, hi in zip(bp[:-1], bp[1:]):
            src = self._segments[self._locate(np.array([0.5 * (lo + hi)]))[0]]
            segs.append(src.convert(domain=[lo, hi]))
        return PiecewiseFunction(bp, segs, self.smoothness, validate=False)

    def _binary(self, other: "PiecewiseFunction", op: Callable) -> Tuple[np.ndarray, List[Polynomial]]:
        bp = _merge_points(list(self._bp) + list(other._bp), 0.0, PI)
        segs = []
        for lo, hi in zip(bp[:-1], bp[1:]):
            mid = np.array([0.5 * (lo + hi)])
            a = self._segments[self._locate(mid)[0]].convert(domain=[lo, hi])
            b = other._segments[other._locate(mid)[0]].convert(domain=[lo, hi])
            segs.append(op(a, b))
        return bp, segs

    def _combined_smoothness(self, other: "PiecewiseFunction") -> SmoothnessClass:
        return SmoothnessClass.from_order(min(self.smoothness.order, other.smoothness.order))

    def __add__(self, other: Union["PiecewiseFunction", float]) -> "PiecewiseFunction":
        if not isinstance(other, PiecewiseFunction):
            other = PiecewiseFunction.constant(float(other))
        bp, segs = self._binary(other, lambda a, b: a + b)
        return PiecewiseFunction(bp, segs, self._combined_smoothness(other), validate=False)

    __radd__ = __add__

    def __neg__(self) -> "PiecewiseFunction":
        return self * -1.0

    def __sub__(self, other: Union["PiecewiseFunction", float]) -> "PiecewiseFunction":
        return self + (-other if isinstance(other, PiecewiseFunction) else -float(other))

    def __rsub__(self, other: float) -> "PiecewiseFunction":
        return (-self) + other

    def __mul__(self, other: Union["PiecewiseFunction", float]) -> "PiecewiseFunction":
        if isinstance(other, PiecewiseFunction):
            bp, segs = self._binary(other, lambda a, b: a * b)
            return PiecewiseFunction(bp, segs, self._combined_smoothness(other), validate=False)
        scaled = [seg * float(other) for seg in self._segments]
        return PiecewiseFunction(self._bp, scaled, self.smoothness, validate=False)

    __rmul__ = __mul__

    def with_smoothness(self, smoothness: SmoothnessClass) -> "PiecewiseFunction":
        return PiecewiseFunction(self._bp, self._segments, smoothness)

    def __repr__(self) -> str:
        return (f"PiecewiseFunction(segments={len(self._segments)}, degree={self.degree}, "
                f"smoothness={self.smoothness.value})")


def integrate(f: Union[PiecewiseFunction, Callable], iv: Interval = FULL_INTERVAL,
              rule: Optional[QuadratureRule] = None) -> float:
    """∫_iv f with panels aligned to the breakpoints of f."""
    return integrate_with_error(f, iv, rule).value


def integrate_with_error(f: Union[PiecewiseFunction, Callable], iv: Interval = FULL_INTERVAL,
                         rule: Optional[QuadratureRule] = None) -> QuadratureResult:
    """∫_iv f together with the adaptive error estimate."""
    result = integrate_callable(f, iv, rule, breakpoints_of(f), frequency_of(f))
    logger.debug(f"∫ over ({iv.lo:.4f}, {iv.hi:.4f}) = {result.value:.16e} ± {result.error:.1e}")
    return result


class SineSeries:
    """Finite combination Σ c_m φ_m (initial data, eigenfunctions)."""

    breakpoints: Tuple[float, ...] = (0.0, PI)
    smoothness = SmoothnessClass.W2INFTY

    def __init__(self, coefficients: Union[Dict[int, float], Sequence[float]]):
        if isinstance(coefficients, dict):
            items = {int(k): float(v) for k, v in coefficients.items() if float(v) != 0.0}
        else:
            items = {m + 1: float(c) for m, c in enumerate(coefficients) if float(c) != 0.0}
        if any(k < 1 for k in items):
            raise ValueError("Sine modes start at k = 1")
        self.coefficients: Dict[int, float] = dict(sorted(items.items()))
        self.frequency = float(max(self.coefficients, default=0))

    def coefficient(self, k: int) -> float:
        return self.coefficients.get(k, 0.0)

    def __call__(self, x: Any) -> Any:
        xa = np.asarray(x, dtype=float)
        out = np.zeros_like(xa)
        for k, c in self.coefficients.items():
            out = out + c * phi(k, xa)
        return float(out) if xa.ndim == 0 else out

    def derivative(self, x: Any) -> Any:
        xa = np.asarray(x, dtype=float)
        out = np.zeros_like(xa)
        for k, c in self.coefficients.items():
            out = out + c * dphi(k, xa)
        return float(out) if xa.ndim == 0 else out

    def norm(self) -> float:
        return math.sqrt(sum(c * c for c in self.coefficients.values()))

    def __repr__(self) -> str:
        return f"SineSeries({self.coefficients})"


def eigenfunction(k: int) -> SineSeries:
    """φ_k(x) = √(2/π) sin(kx)."""
    if k < 1:
        raise ValueError(f"Eigenfunction index must be ≥ 1, got {k}")
    return SineSeries({k: 1.0})


class CosineSeries:
    """q(x) = Σ_{m=0}^{M} d_m cos(2mx) on (0, L), zero on (L, π), L ∈ {π, π/2}.

    Amplitudes are stored as sign and natural-log magnitude so that
    coefficients like e^{-m²τ} survive for large m.
    """

    smoothness = SmoothnessClass.LINFTY

    def __init__(self, signs: Sequence[float], log_magnitudes: Sequence[float], support_end: float = PI):
        self.signs = np.sign(np.asarray(signs, dtype=float))
        self.log_magnitudes = np.asarray(log_magnitudes, dtype=float)
        if self.signs.shape != self.log_magnitudes.shape:
            raise ValueError("signs and log_magnitudes must have the same length")
        self.signs = np.where(np.isneginf(self.log_magnitudes), 0.0, self.signs)
        if not (abs(support_end - PI) < 1e-12 or abs(support_end - PI / 2) < 1e-12):
            raise ValueError("CosineSeries support must end at π or π/2 for the exact index law")
        self.support_end = PI if abs(support_end - PI) < 1e-12 else PI / 2
        self.order = self.signs.size - 1
        self.frequency = 2.0 * self.order
        self.breakpoints: Tuple[float, ...] = (0.0, PI) if self.support_end == PI else (0.0, PI / 2, PI)

    @classmethod
    def from_coefficients(cls, coefficients: Sequence[float], support_end: float = PI) -> "CosineSeries":
        d = np.asarray(coefficients, dtype=float)
        with np.errstate(divide="ignore"):
            logs = np.where(d == 0.0, -np.inf, np.log(np.abs(d)))
        return cls(np.sign(d), logs, support_end)

    @classmethod
    def surrogate(cls, tau: float, modes: int, support_end: float = PI) -> "CosineSeries":
        """Coupling with I_k = e^{-k²τ} exactly for 1 ≤ k ≤ modes and I_k = 0 beyond."""
        if tau < 0 or modes < 1:
            raise ValueError("surrogate needs tau ≥ 0 and at least one mode")
        m = np.arange(modes + 1, dtype=float)
        logs = math.log(2.0 * PI / support_end) - m * m * tau
        logs[0] = -np.inf
        signs = -np.ones(modes + 1)
        signs[0] = 0.0
        return cls(signs, logs, support_end)

    @property
    def amplitudes(self) -> np.ndarray:
        return self.signs * np.exp(self.log_magnitudes)

    def __call__(self, x: Any) -> Any:
        xa = np.asarray(x, dtype=float)
        m = np.arange(self.order + 1, dtype=float)
        vals = np.cos(2.0 * np.multiply.outer(xa, m)) @ self.amplitudes
        vals = np.where(xa <= self.support_end, vals, 0.0)
        return float(vals) if xa.ndim == 0 else vals

    def sup_norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes)))

    def support(self) -> List[Interval]:
        if not np.any(self.signs != 0):
            return []
        return [Interval(0.0, self.support_end)]

    def is_zero(self) -> bool:
        return not self.support()

    def log_index(self, k: int) -> Tuple[float, float]:
        """(sign, log|·|) of ∫₀^π q φ_k² using orthogonality of cos 2mx on (0, L).

        ∫₀^L q φ_k² = (L/π)(d₀ − d_k/2).
        """
        ratio = math.log(self.support_end / PI)
        s0, l0 = float(self.signs[0]), float(self.log_magnitudes[0])
        if k <= self.order:
            sk, lk = -float(self.signs[k]), float(self.log_magnitudes[k]) - math.log(2.0)
        else:
            sk, lk = 0.0, -math.inf
        if sk == 0.0 and s0 == 0.0:
            return 0.0, -math.inf
        if sk == 0.0:
            return s0, l0 + ratio
        if s0 == 0.0:
            return sk, lk + ratio
        value = s0 * math.exp(l0) + sk * math.exp(lk)
        if value == 0.0:
            return 0.0, -math.inf
        return math.copysign(1.0, value), math.log(abs(value)) + ratio

    def index_over(self, k: int, lo: float, hi: float) -> float:
        """Closed form of ∫_lo^hi q φ_k² (plain float)."""
        hi = min(hi, self.support_end)
        if hi <= lo:
            return 0.0

        def int_cos(j: int) -> float:
            if j == 0:
                return hi - lo
            return (math.sin(2 * j * hi) - math.sin(2 * j * lo)) / (2 * j)

        total = 0.0
        for m, d in enumerate(self.amplitudes):
            if d == 0.0:
                continue
            total += d * (int_cos(m) - 0.5 * int_cos(m + k) - 0.5 * int_cos(abs(m - k)))
        return total / PI

    def to_piecewise(self) -> PiecewiseFunction:
        return PiecewiseFunction.from_callable(self, self.breakpoints, SmoothnessClass.LINFTY)

    def __repr__(self) -> str:
        return f"CosineSeries(order={self.order}, support_end={self.support_end:.6f})"


ScalarFunction = Union[PiecewiseFunction, CosineSeries, SineSeries, Callable]


def uniform_grid(points: int, extra: Iterable[float] = ()) -> np.ndarray:
    """Uniform grid on [0,π] merged with extra points (breakpoints)."""
    base = np.linspace(0.0, PI, points)
    return _merge_points(list(base) + list(extra), 0.0, PI)


def inner_product(f: ScalarFunction, g: ScalarFunction, iv: Interval = FULL_INTERVAL,
                  rule: Optional[QuadratureRule] = None) -> float:
    """∫_iv f g with panels aligned to both functions' breakpoints."""
    result = integrate_callable(lambda x: np.asarray(f(x)) * np.asarray(g(x)), iv, rule,
                                breakpoints_of(f, g), frequency_of(f, g))
    return result.value
