"""
Coupling and Initial-Data Presets
Builds CouplingPair and initial states from RunConfig specs, including the
named acceptance couplings and the tuned vanishing-mode construction.
"""

import logging
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ..config.settings import COUPLING_PRESETS, get_settings
from ..core.exceptions import ConfigError
from ..core.funcspace import PI, CosineSeries, Interval, PiecewiseFunction, SineSeries
from ..core.spectral import CouplingPair, compute_Iak, compute_Ik
from ..models.schemas import CouplingSpec, InitialDataSpec, PiecewiseSpec
from ..models.types import SmoothnessClass

logger = logging.getLogger(__name__)
settings = get_settings()


def bump(lo: float, hi: float, height: float = 1.0, power: int = 2) -> PiecewiseFunction:
    return PiecewiseFunction.bump(lo, hi, height, power)


def tune_vanishing_mode(k: int, omega: Interval, margin: float = 0.15,
                        base: Optional[CouplingPair] = None) -> CouplingPair:
    """Coupling whose added q is supported off ω and gives I_k = I_{a,k} = 0.

    q = q_base + L + λ₁·x·L + R + λ₂·x·R with bumps L left of ω and R right
    of ω; the 2×2 system I_{a,k} = 0, I_k = 0 fixes (λ₁, λ₂). Without R
    (no room right of ω) only I_{a,k} is tuned.
    """
    a, b = omega.lo, omega.hi
    if a < 2 * margin:
        raise ValueError(f"ω must leave room on the left for the tuned coupling, got a = {a}")
    left = bump(margin * a, (1.0 - margin) * a)
    x_poly = PiecewiseFunction.polynomial([0.0, 1.0])
    parts = [left, x_poly * left]
    has_right = PI - b > 4 * margin
    if has_right:
        right = bump(b + margin * (PI - b), PI - margin * (PI - b))
        parts += [right, x_poly * right]
    zero_p = PiecewiseFunction.zero()
    base_p = base.p if base is not None else zero_p
    base_q = PiecewiseFunction.zero()
    if base is not None:
        base_q = base.q if isinstance(base.q, PiecewiseFunction) else base.q.to_piecewise()

    def indices(p: PiecewiseFunction, fn: PiecewiseFunction) -> Tuple[float, float]:
        cp = CouplingPair(p, fn)
        return compute_Iak(cp, a, k), compute_Ik(cp, k)

    fixed = base_q + parts[0] + (parts[2] if has_right else 0.0)
    base_a, base_full = indices(base_p, fixed)
    if has_right:
        col1 = indices(zero_p, parts[1])
        col2 = indices(zero_p, parts[3])
        matrix = np.array([[col1[0], col2[0]], [col1[1], col2[1]]])
        lam = np.linalg.solve(matrix, -np.array([base_a, base_full]))
        q = fixed + parts[1] * float(lam[0]) + parts[3] * float(lam[1])
    else:
        col1 = indices(zero_p, parts[1])
        lam = np.array([-base_a / col1[0]])
        q = fixed + parts[1] * float(lam[0])
    name = f"tuned_k{k}" if base is None else f"{base.name}+tuned_k{k}"
    cp = CouplingPair(base_p, q, name)
    logger.info(f"Tuned coupling at k={k}: λ = {lam.tolist()}, I_k = {compute_Ik(cp, k):.2e}, "
                f"I_(a,k) = {compute_Iak(cp, a, k):.2e}")
    return cp


def piecewise_from_spec(spec: PiecewiseSpec) -> PiecewiseFunction:
    pieces = [{"interval": s.interval, "coefficients": s.coefficients} for s in spec.segments]
    return PiecewiseFunction.from_spec(pieces, SmoothnessClass(spec.smoothness))


def piecewise_to_spec(fn: PiecewiseFunction) -> PiecewiseSpec:
    return PiecewiseSpec(segments=fn.to_spec(), smoothness=fn.smoothness)


def build_coupling(spec: CouplingSpec, omega: Interval) -> CouplingPair:
    """CouplingPair for a named preset or explicit piecewise p and q."""
    if spec.preset is None:
        p = piecewise_from_spec(spec.p) if spec.p is not None else None
        q = piecewise_from_spec(spec.q) if spec.q is not None else None
        return CouplingPair.from_functions(p, q, "custom")

    name = spec.preset
    if name not in COUPLING_PRESETS:
        raise ConfigError(f"Unknown coupling preset '{name}'; known: {sorted(COUPLING_PRESETS)}")
    preset = COUPLING_PRESETS[name]
    params = dict(spec.params)

    if name == "zero":
        return CouplingPair.from_functions(name=name)
    if name == "q1":
        return CouplingPair.from_functions(q=PiecewiseFunction.constant(preset["q_constant"]), name=name)
    if name == "px":
        return CouplingPair.from_functions(p=PiecewiseFunction.polynomial(preset["p_coefficients"]), name=name)
    if name == "p1":
        return CouplingPair.from_functions(p=PiecewiseFunction.constant(preset["p_constant"]), name=name)
    if name == "cos2":
        order = max(preset["cosine"])
        coef = [0.0] * (order + 1)
        for m, d in preset["cosine"].items():
            coef[m] = d
        return CouplingPair.from_functions(q=CosineSeries.from_coefficients(coef), name=name)
    if name in ("surrogate", "surrogate_left"):
        tau = float(params.get("tau", 0.2))
        modes = int(params.get("modes", 40))
        q = CosineSeries.surrogate(tau, modes, preset["support_end"])
        return CouplingPair.from_functions(q=q, name=f"{name}(tau={tau:g},M={modes})")
    if name == "bump_p":
        lo, hi = params.get("window", preset["window"])
        p = bump(float(lo), float(hi), float(params.get("height", preset["height"])))
        return CouplingPair.from_functions(p=p, name=name)
    if name == "tuned_k2":
        return tune_vanishing_mode(int(params.get("mode", preset["mode"])), omega)
    raise ConfigError(f"Preset '{name}' has no builder")


def build_initial_data(spec: InitialDataSpec) -> Tuple[Callable, Callable]:
    """(y⁰₁, y⁰₂) as sine series or piecewise functions."""
    components = []
    for modes, piecewise, label in ((spec.y1_modes, spec.y1, "y1"), (spec.y2_modes, spec.y2, "y2")):
        if modes and piecewise is not None:
            raise ConfigError(f"{label}: give either sine modes or a piecewise function, not both")
        if piecewise is not None:
            components.append(piecewise_from_spec(piecewise))
        else:
            components.append(SineSeries(dict(modes)))
    return components[0], components[1]
