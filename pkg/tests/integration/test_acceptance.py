"""
Acceptance gates for the full toolkit, run end to end through the core
modules and the command surface
"""

import json
import math

import numpy as np
import pytest

from src.cli.main import run
from src.config.settings import EXIT_CODES
from src.core.biortho import build_family
from src.core.classify import approx_distributed, estimate_T0, estimate_T1, fattorini_witness
from src.core.funcspace import PI, CosineSeries, Interval, PiecewiseFunction, integrate_callable
from src.core.spectral import CouplingPair, SpectralEngine, index_table
from src.core.transform import Jk_closed_form, lower_bound_exponent, regularize
from src.models.types import Verdict
from src.tools.csv_export import read_table
from src.tools.presets import tune_vanishing_mode


pytestmark = [pytest.mark.integration, pytest.mark.slow]


def write_config(path, payload):
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path


def report(path):
    return dict(line.split("=", 1) for line in path.read_text(encoding="utf-8").splitlines()
                if "=" in line and not line.startswith("#"))


class TestEigenStructure:
    """Eigen-structure residuals up to k = 30."""

    @pytest.mark.parametrize("cp", [
        CouplingPair.from_functions(q=PiecewiseFunction.constant(1.0), name="q1"),
        CouplingPair.from_functions(p=PiecewiseFunction.polynomial([0.0, 1.0]), name="px"),
    ])
    def test_residuals(self, cp):
        """Test both eigen relations hold to 1e-8 for every k ≤ 30."""
        records = SpectralEngine(cp).records(30)
        worst = max(r.eigen_residual for r in records)
        assert worst <= 1e-8
        assert max(r.boundary_defect for r in records) <= 1e-9


class TestBiorthogonality:
    """Minimal-norm family at K = 8."""

    def test_delta_residual(self):
        """Test the residual matrix of the K = 8, T = 1 family."""
        fam = build_family(8, 1.0)
        assert fam.max_residual <= 1e-8

    def test_single_mode_against_hand_solution(self):
        """Test K = 1 against the explicit 2×2 Gram inverse."""
        fam = build_family(1, 1.0)
        # G = [[∫e^{-2t}, ∫te^{-2t}], [∫te^{-2t}, ∫t²e^{-2t}]] on (0, 1)
        e = math.exp(-2.0)
        g00 = (1.0 - e) / 2.0
        g01 = (1.0 - 3.0 * e) / 4.0
        g11 = (1.0 - 5.0 * e) / 4.0
        det = g00 * g11 - g01 ** 2
        expected = np.array([[g11, -g01], [-g01, g00]]) / det
        assert np.allclose(fam.coefficients, expected, rtol=1e-12, atol=0.0)


class TestClosedFormIndexShift:
    """Closed-form J_k against quadrature on random windows."""

    def test_random_windows(self):
        """Test 100 non-resonant (α, β, k) to relative error 1e-10."""
        rng = np.random.default_rng(20240601)
        checked = 0
        while checked < 100:
            alpha = rng.uniform(0.05, 2.5)
            beta = rng.uniform(alpha + 0.1, min(PI - 0.05, alpha + 1.5))
            k = int(rng.integers(1, 31))
            w = 2.0 * PI / (beta - alpha)
            if abs(2 * k - w) < 1e-3:
                continue
            xi_prime = lambda x: (PI / (beta - alpha)) * np.sin(2.0 * PI * (x - alpha) / (beta - alpha))
            integrand = lambda x: 0.5 * xi_prime(x) * (2.0 / PI) * np.sin(k * x) ** 2
            numeric = integrate_callable(integrand, Interval(alpha, beta), frequency=2.0 * k + w).value
            closed = Jk_closed_form(alpha, beta, k)
            assert closed == pytest.approx(numeric, rel=1e-10, abs=1e-13)
            checked += 1


class TestDistributedNullControl:
    """Synthesize → verify with a coupling whose support meets ω."""

    def test_bump_coupling(self, tmp_path):
        """Test y⁰ = (φ₁, φ₂) is driven below 1e-3 at T = 0.5."""
        cfg = write_config(tmp_path / "c.json", {
            "coupling": {"preset": "bump_p"},
            "omega": {"lo": 1.0, "hi": 2.0},
            "T": 0.5,
            "K": 8,
            "initial_data": {"y1_modes": {"1": 1.0}, "y2_modes": {"2": 1.0}},
        })
        out = tmp_path / "out"
        assert run(["synthesize", "--config", str(cfg), "--out", str(out)]) == EXIT_CODES["yes"]
        assert run(["verify", "--config", str(cfg), "--out", str(out)]) == EXIT_CODES["yes"]
        lines = report(out / "verify.txt")
        assert lines["result"] == "pass"
        assert float(lines["ratio"]) <= 1e-3


class TestBoundaryNullControl:
    """Boundary control with q ≡ 1."""

    def test_duality_residuals(self, tmp_path):
        """Test every per-mode duality residual is ≤ 1e-5 for K = 6."""
        cfg = write_config(tmp_path / "c.json", {
            "coupling": {"preset": "q1"},
            "omega": {"lo": 1.0, "hi": 2.0},
            "T": 1.0,
            "K": 6,
            "mode": "boundary",
            "initial_data": {"y1_modes": {"1": 1.0, "3": -0.5}, "y2_modes": {"2": 1.0}},
        })
        out = tmp_path / "out"
        assert run(["synthesize", "--config", str(cfg), "--out", str(out)]) == EXIT_CODES["yes"]
        assert run(["verify", "--config", str(cfg), "--out", str(out)]) == EXIT_CODES["yes"]
        residuals = read_table(out / "residuals.csv")
        assert len(residuals) == 12
        assert residuals["residual"].max() <= 1e-5


class TestMinimalTimeEstimators:
    """T̂₀ and T̂₁ on the left-localized cosine surrogate."""

    @pytest.mark.parametrize("tau", [0.2, 0.5])
    def test_exact_recovery(self, tau):
        """Test I_k = e^{−k²τ} for k ≤ 40 gives T̂₀ = T̂₁ = τ."""
        cp = CouplingPair.from_functions(q=CosineSeries.surrogate(tau, 40, PI / 2))
        t0, _ = estimate_T0(cp, 2.0, 40)
        t1, _ = estimate_T1(cp, 40)
        assert abs(t0 - tau) <= 1e-6
        assert abs(t1 - tau) <= 1e-6


class TestNegativeTimeEvidence:
    """Observability quotients either side of the minimal time."""

    def quotient_growth(self, tmp_path, T):
        cfg = write_config(tmp_path / f"c_{T}.json", {
            "coupling": {"preset": "surrogate_left", "params": {"tau": 0.2, "modes": 40}},
            "omega": {"lo": 2.0, "hi": 2.8},
            "T": T,
            "K": 30,
            "quotient_modes": [10, 20, 30],
        })
        out = tmp_path / f"out_{T}"
        assert run(["quotient", "--config", str(cfg), "--out", str(out)]) == EXIT_CODES["yes"]
        lines = report(out / "report.txt")
        assert lines["degenerate"] == "false"
        return float(lines["log_growth"])

    def test_below_minimal_time(self, tmp_path):
        """Test T = τ/2 makes the quotient grow at least tenfold."""
        assert self.quotient_growth(tmp_path, 0.1) >= math.log(10.0)

    def test_above_minimal_time(self, tmp_path):
        """Test T = 2τ keeps the quotient within a factor 3."""
        assert self.quotient_growth(tmp_path, 0.4) <= math.log(3.0)


class TestDichotomy:
    """Approximate controllability verdicts and witnesses."""

    def setup_method(self):
        """Set up test fixtures."""
        self.omega = Interval(2.0, 2.6)

    def test_zero_coupling(self):
        """Test p = q ≡ 0 gives no with a witness invisible on ω."""
        cp = CouplingPair.from_functions(name="zero")
        verdict = approx_distributed(cp, self.omega, 10)
        assert verdict.verdict == Verdict.NO
        witness = fattorini_witness(cp, self.omega, verdict.witness)
        assert witness.first_component_sup <= 1e-8

    def test_q_one(self):
        """Test q ≡ 1 gives yes."""
        cp = CouplingPair.from_functions(q=PiecewiseFunction.constant(1.0))
        assert approx_distributed(cp, Interval(0.3, 1.5), 10).verdict == Verdict.YES

    def test_tuned_second_mode(self):
        """Test a q tuned to I_2 = I_{a,2} = 0 fails at k = 2."""
        cp = tune_vanishing_mode(2, self.omega)
        verdict = approx_distributed(cp, self.omega, 10)
        assert verdict.verdict == Verdict.NO
        assert verdict.witness == 2
        assert fattorini_witness(cp, self.omega, 2).first_component_sup <= 1e-8


class TestRegularization:
    """Constant p with every index zero."""

    def test_constant_p(self):
        """Test regularize makes all thirty indices nonzero with a k⁻⁶ or better envelope."""
        cp = CouplingPair.from_functions(p=PiecewiseFunction.constant(1.0), name="p1")
        omega = Interval(1.0, 2.0)
        assert np.all(index_table(cp, omega.lo, 30).Ik == 0.0)
        result, trace = regularize(cp, omega, 30)
        table = index_table(result, omega.lo, 30)
        assert np.min(np.abs(table.Ik)) > 0.0
        slope, envelope = lower_bound_exponent(table.Ik, table.ks)
        assert slope >= -6.0
        assert envelope > 0.0
        assert trace.initial_failing == list(range(1, 31))
