"""
Unit tests for the controllability classifier
"""

import math
from unittest.mock import patch

import numpy as np
import pytest

from src.core.classify import (
    approx_boundary, approx_distributed, classification_report, estimate_T0, estimate_T1,
    fattorini_witness, limsup_surrogate,
)
from src.core.exceptions import FailedPrecondition, SupportOverlap
from src.core.funcspace import PI, CosineSeries, Interval, PiecewiseFunction
from src.core.spectral import CouplingPair, log_index
from src.models.types import Verdict
from src.tools.presets import bump, tune_vanishing_mode


class TestVerdicts:
    """Approximate-controllability dichotomy."""

    def setup_method(self):
        """Set up test fixtures."""
        self.omega = Interval(2.0, 2.6)
        self.zero = CouplingPair.from_functions(name="zero")
        self.q_one = CouplingPair.from_functions(q=PiecewiseFunction.constant(1.0), name="q1")

    def test_zero_coupling_is_not_controllable(self):
        """Test p = q ≡ 0 gives 'no' with witness k = 1."""
        result = approx_distributed(self.zero, self.omega, 8)
        assert result.verdict == Verdict.NO
        assert result.witness == 1

    def test_support_intersection(self):
        """Test q ≡ 1 meets every ω and gives 'yes'."""
        result = approx_distributed(self.q_one, self.omega, 8)
        assert result.verdict == Verdict.YES
        assert "support" in result.reason

    def test_localized_cosine_verdict(self):
        """Test a coupling localized left of ω is classified from its index table."""
        cp = CouplingPair.from_functions(q=bump(0.3, 1.5), name="left-bump")
        result = approx_distributed(cp, Interval(2.8, 3.0), 12)
        assert result.verdict == Verdict.YES

    def test_inconclusive_when_limits_vanish(self):
        """Test the surrogate passes every k ≤ K yet has I = I_a = 0."""
        cp = CouplingPair.from_functions(q=CosineSeries.surrogate(0.1, 20, PI / 2))
        result = approx_distributed(cp, self.omega, 10)
        assert result.verdict == Verdict.INCONCLUSIVE

    def test_boundary_verdicts(self):
        """Test boundary verdicts for q ≡ 1, cos 2x and p = x."""
        assert approx_boundary(self.q_one, 10).verdict == Verdict.YES
        cos2 = CouplingPair.from_functions(q=CosineSeries.from_coefficients([0.0, 1.0]))
        result = approx_boundary(cos2, 10)
        assert result.verdict == Verdict.NO
        assert result.witness == 2
        px = CouplingPair.from_functions(p=PiecewiseFunction.polynomial([0.0, 1.0]))
        assert approx_boundary(px, 10).verdict == Verdict.YES

    def test_tuned_coupling_witness(self):
        """Test I_2 = I_{a,2} = 0 gives 'no' at k = 2 with a Fattorini witness."""
        omega = Interval(1.0, 2.0)
        cp = tune_vanishing_mode(2, omega)
        result = approx_distributed(cp, omega, 8)
        assert result.verdict == Verdict.NO
        assert result.witness == 2
        witness = fattorini_witness(cp, omega, 2)
        assert witness is not None
        assert witness.first_component_sup <= 1e-8

    def test_witness_checks_single_mode(self):
        """Test the witness evaluates the indices of mode k only."""
        omega = Interval(1.0, 2.0)
        cp = tune_vanishing_mode(2, omega)
        with patch("src.core.classify.log_index", wraps=log_index) as spy, \
                patch("src.core.classify.index_table", side_effect=AssertionError("full table built")):
            witness = fattorini_witness(cp, omega, 2)
        assert witness is not None
        assert witness.first_component_sup <= 1e-8
        assert {call.args[1] for call in spy.call_args_list} == {2}

    def test_dichotomy_coherence(self):
        """Test fattorini_witness agrees with the verdict."""
        witness = fattorini_witness(self.zero, self.omega, 1)
        assert witness is not None
        assert witness.first_component_sup == pytest.approx(0.0, abs=1e-14)
        left = CouplingPair.from_functions(q=bump(0.3, 1.5))
        assert fattorini_witness(left, self.omega, 3) is None

    def test_witness_needs_disjoint_supports(self):
        """Test witnesses are only defined for disjoint supports."""
        with pytest.raises(SupportOverlap, match="avoid"):
            fattorini_witness(self.q_one, self.omega, 1)


class TestMinimalTimes:
    """T̂₀ and T̂₁ surrogates."""

    def test_q_one(self):
        """Test q ≡ 1 gives T̂₀ = T̂₁ = 0."""
        cp = CouplingPair.from_functions(q=PiecewiseFunction.constant(1.0))
        t0, _ = estimate_T0(cp, 2.0, 12)
        t1, _ = estimate_T1(cp, 12)
        assert t0 == pytest.approx(0.0, abs=1e-10)
        assert t1 == pytest.approx(0.0, abs=1e-10)

    def test_p_x(self):
        """Test p = x gives ratio log 2/k²."""
        cp = CouplingPair.from_functions(p=PiecewiseFunction.polynomial([0.0, 1.0]))
        t1, trend = estimate_T1(cp, 12)
        # Expected: max over k ∈ [6, 12] of log 2/k² = log 2/36
        assert t1 == pytest.approx(math.log(2) / 36, rel=1e-10)
        assert trend.ratios[0] == pytest.approx(math.log(2), rel=1e-10)

    @pytest.mark.parametrize("tau", [0.2, 0.5])
    def test_surrogate_exactness(self, tau):
        """Test I_k = e^{−k²τ} gives T̂₀ = T̂₁ = τ for every K ≤ M."""
        cp = CouplingPair.from_functions(q=CosineSeries.surrogate(tau, 40, PI / 2))
        omega = Interval(2.6, 3.0)
        for K in (10, 25, 40):
            t0, trend = estimate_T0(cp, omega.lo, K)
            t1, _ = estimate_T1(cp, K)
            assert t0 == pytest.approx(tau, abs=1e-9)
            assert t1 == pytest.approx(tau, abs=1e-9)
            assert np.allclose(trend.ratios, tau, atol=1e-12)

    def test_failing_modes_raise(self):
        """Test T̂₀ is ill-posed when both indices vanish."""
        cp = CouplingPair.from_functions(name="zero")
        with pytest.raises(FailedPrecondition, match="modes") as info:
            estimate_T0(cp, 2.0, 4)
        assert info.value.modes == [1, 2, 3, 4]

    def test_infinite_when_ratios_explode(self):
        """Test growing ratios above the cap are reported as +inf."""
        ks = np.arange(1, 13)
        trend = limsup_surrogate(ks, np.exp(ks.astype(float)), cap=50.0)
        assert math.isinf(trend.estimate)

    def test_report_consistency(self):
        """Test T̂₀ ≤ T̂₁ in the combined report."""
        cp = CouplingPair.from_functions(q=bump(0.3, 1.5))
        report = classification_report(cp, Interval(2.0, 2.6), 12)
        assert report.T0_estimate <= report.T1_estimate + 1e-12
        assert "T0_estimate=" in "\n".join(report.to_lines())
