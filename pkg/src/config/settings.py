"""
Moment-Method Toolkit Configuration
Environment-based numerical defaults (MOMENTS_* variables or a .env file)
plus the named coupling presets used by the command surface.
"""

import math
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

env_path = Path(__file__).parent.parent.parent / ".env"
if env_path.exists():
    load_dotenv(env_path)


class Settings(BaseSettings):
    """Numerical tolerances and budgets with environment variable support."""

    model_config = SettingsConfigDict(env_prefix="MOMENTS_", extra="ignore")

    # Application
    app_name: str = "Coupled Parabolic Moment-Method Toolkit"
    app_version: str = "1.0.0"
    log_level: str = "INFO"

    # Quadrature
    quadrature_tolerance: float = 1e-12
    quadrature_nodes: int = 20
    quadrature_max_levels: int = 12
    min_panels_per_period: int = 4

    # Spectral objects
    grid_points: int = 4096
    index_zero_scale: float = 1e-12
    residual_nodes: int = 6
    residual_max_doublings: int = 3
    residual_stability: float = 1e-10
    approximant_degree: int = 24
    approximant_tolerance: float = 1e-12

    # Minimal-time estimators
    t0_cap: float = 50.0

    # Regularization pipeline
    kappa_scan_max: float = 16.0
    kappa_scan_step: float = 1.0 / 64.0
    step2_max_frequency: int = 64
    window_retries: int = 5
    window_shrink: float = 0.9
    window_scan_cells: int = 64
    nonvanishing_floor: float = 1e-3
    theta_floor_scale: float = 1e-3
    theta_tolerance: float = 1e-14
    shrink_iterations: int = 20

    # Biorthogonal family
    biortho_tolerance: float = 1e-8
    mp_digits: int = 60
    double_precision_budget: int = 10

    # Moment problem
    shape_attempts: int = 10
    shape_floor: float = 1e-10
    block_tolerance: float = 1e-10
    det_floor: float = 1e-14

    # Galerkin simulation
    galerkin_steps: int = 2048
    galerkin_max_doublings: int = 4
    galerkin_tolerance: float = 1e-6
    source_nodes: int = 3

    # Output
    csv_digits: int = 17
    default_seed: int = 20240601
    null_ratio_threshold: float = 1e-3
    duality_threshold: float = 1e-5


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


# Named couplings available to RunConfig.coupling.preset
COUPLING_PRESETS: Dict[str, Dict[str, Any]] = {
    "zero": {"description": "p ≡ 0, q ≡ 0 (no coupling)"},
    "q1": {"description": "p ≡ 0, q ≡ 1", "q_constant": 1.0},
    "px": {"description": "p(x) = x, q ≡ 0", "p_coefficients": [0.0, 1.0]},
    "p1": {"description": "p ≡ 1, q ≡ 0 (all coupling indices vanish)", "p_constant": 1.0},
    "cos2": {"description": "p ≡ 0, q(x) = cos 2x", "cosine": {1: 1.0}},
    "surrogate": {
        "description": "q = Σ -2 exp(-m²τ) cos 2mx on (0,π); I_k = exp(-k²τ) for k ≤ M",
        "support_end": math.pi,
    },
    "surrogate_left": {
        "description": "q = Σ -4 exp(-m²τ) cos 2mx on (0,π/2); I_k = I_{a,k} = exp(-k²τ) for k ≤ M",
        "support_end": math.pi / 2,
    },
    "bump_p": {
        "description": "p = quartic bump on (0.8, 1.4), q ≡ 0",
        "window": (0.8, 1.4),
        "height": 1.0,
    },
    "tuned_k2": {
        "description": "q localized left of ω with I_2 = I_{a,2} = 0",
        "mode": 2,
    },
}

# Fallback tolerances written into every provenance header
DEFAULT_TOLERANCES: Dict[str, float] = {
    "quadrature": 1e-12,
    "biortho": 1e-8,
    "block": 1e-10,
    "galerkin": 1e-6,
    "null_ratio": 1e-3,
    "duality": 1e-5,
}

# Process exit codes of the command surface
EXIT_CODES: Dict[str, int] = {
    "yes": 0,
    "error": 1,
    "no": 2,
    "inconclusive": 3,
    "config": 4,
    "verification_failed": 5,
}
