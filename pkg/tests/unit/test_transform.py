"""
Unit tests for changes of unknown and the regularization pipeline
"""

import math

import numpy as np
import pytest

from src.core.exceptions import (
    InsufficientSmoothness, NoNonvanishingWindow, ResonantMode, ScanExhausted, ThetaNotPositive,
)
from src.core.funcspace import PI, CosineSeries, Interval, PiecewiseFunction, integrate_callable, phi
from src.core.spectral import CouplingPair, compute_Iak, compute_Ik, index_table
from src.core.transform import (
    Jk_closed_form, UnknownChange, apply_change, build_bump_change, build_step2_bump, build_step3_case1,
    build_theta_qzero, choose_kappa, half_nonzero_floor, hermite_quintic, lower_bound_exponent, map_control_back,
    nonvanishing_window, regularize, select_ell, sin_gap, step1_limit, step2_weights,
    step3_case2_determinant,
)
from src.models.types import ChangeProvenance, RegularizationStep, SmoothnessClass
from src.tools.presets import bump, tune_vanishing_mode


def constant_pair(p_value: float, q_value: float) -> CouplingPair:
    return CouplingPair(PiecewiseFunction.constant(p_value), PiecewiseFunction.constant(q_value), "const")


def sloped_pair() -> CouplingPair:
    return CouplingPair(PiecewiseFunction.polynomial([1.0, 0.1]), PiecewiseFunction.zero(), "sloped")


def numeric_J(alpha: float, beta: float, k: int) -> float:
    length = beta - alpha

    def integrand(x):
        s = (np.asarray(x) - alpha) / length
        return 0.5 * (PI / length) * np.sin(2.0 * PI * s) * phi(k, x) ** 2

    return integrate_callable(integrand, Interval(alpha, beta), None, (), 2.0 * PI / length + 2 * k).value


class TestUnknownChange:
    """θ validation, coupling transform and control maps."""

    def setup_method(self):
        """Set up test fixtures."""
        self.x = np.linspace(0.0, PI, 401)

    def test_identity_leaves_coupling_unchanged(self):
        """Test θ ≡ 1 maps (p, q) to itself."""
        cp = CouplingPair(PiecewiseFunction.polynomial([0.5, 0.2]), bump(0.2, 0.9), "base")
        change = UnknownChange.identity(Interval(1.0, 2.0), ChangeProvenance.QZERO)
        assert change.is_identity()
        moved = apply_change(cp, change)
        assert np.allclose(moved.p(self.x), cp.p(self.x), atol=1e-14)
        assert np.allclose(moved.q(self.x), cp.q(self.x), atol=1e-14)

    def test_product_rule(self):
        """Test p ≡ 1, q ≡ 0 gives q̂ = ∂ₓθ = κ(π/L) sin(2π(x−α)/L) on the window."""
        alpha, beta, kappa = 1.2, 1.9, 0.5
        change = build_bump_change(alpha, beta, kappa)
        moved = apply_change(constant_pair(1.0, 0.0), change)
        xs = np.linspace(alpha, beta, 51)
        expected = kappa * PI / (beta - alpha) * np.sin(2.0 * PI * (xs - alpha) / (beta - alpha))
        assert np.allclose(moved.q(xs), expected, atol=1e-9)
        assert np.allclose(moved.p(xs), 1.0 + kappa * np.sin(PI * (xs - alpha) / (beta - alpha)) ** 2, atol=1e-12)

    def test_index_shift_is_linear_in_kappa(self):
        """Test p ≡ 1 with q left of the window gives Î_k = I_k + κJ_k."""
        cp = CouplingPair(PiecewiseFunction.constant(1.0), bump(0.2, 0.8), "left-q")
        alpha, beta, kappa = 1.2, 1.9, 0.5
        moved = apply_change(cp, build_bump_change(alpha, beta, kappa))
        for k in range(1, 7):
            expected = compute_Ik(cp, k) + kappa * Jk_closed_form(alpha, beta, k)
            assert compute_Ik(moved, k) == pytest.approx(expected, abs=1e-10)

    def test_theta_must_stay_positive(self):
        """Test a bump with κ ≤ −1 is rejected."""
        with pytest.raises(ThetaNotPositive, match="floor"):
            build_bump_change(1.0, 2.0, -1.0)

    def test_theta_needs_w2(self):
        """Test a W1 weight is rejected."""
        theta = PiecewiseFunction([0.0, 1.0, PI], [[1.0], [1.0]], SmoothnessClass.W1INFTY)
        with pytest.raises(InsufficientSmoothness, match="W2infty"):
            UnknownChange(theta, [], Interval(1.0, 2.0), ChangeProvenance.BUMP)

    def test_inverse_round_trip(self):
        """Test applying θ then θ⁻¹ recovers the coupling."""
        cp = CouplingPair(PiecewiseFunction.polynomial([1.0, 0.1]), bump(0.2, 0.8), "base")
        change = build_bump_change(1.2, 1.9, 0.7)
        back = apply_change(apply_change(cp, change), change.inverse())
        # Expected: p and q agree to approximant accuracy amplified by one derivative
        assert np.max(np.abs(back.p(self.x) - cp.p(self.x))) <= 1e-9
        assert np.max(np.abs(back.q(self.x) - cp.q(self.x))) <= 1e-9

    def test_control_stays_on_omega(self):
        """Test v̂ vanishes where v does when the window lies inside ω."""
        omega = Interval(1.0, 2.0)
        change = build_bump_change(1.2, 1.8, 0.6)
        rng = np.random.default_rng(7)
        y1 = rng.normal(size=self.x.size)
        dy1 = rng.normal(size=self.x.size)
        v = np.where(omega.contains(self.x), rng.normal(size=self.x.size), 0.0)
        v_hat = change.transform_control(self.x, y1, dy1, v)
        outside = ~omega.contains(self.x)
        assert np.max(np.abs(v_hat[outside])) <= 1e-12

    def test_map_control_back_round_trip(self):
        """Test map_control_back inverts the forward control map over a chain."""
        chain = [
            build_bump_change(1.2, 1.8, 0.5),
            build_theta_qzero(constant_pair(1.0, 1.0), Interval(1.0, 2.0), 4),
        ]
        rng = np.random.default_rng(11)
        y1 = rng.normal(size=(3, self.x.size))
        dy1 = rng.normal(size=(3, self.x.size))
        v = rng.normal(size=(3, self.x.size))
        y, dy, w = y1, dy1, v
        for change in chain:
            th, d1, _ = change.derivatives(self.x)
            w = change.transform_control(self.x, y, dy, w)
            y, dy = y / th, dy / th - d1 * y / th ** 2
        v_back, y_back, dy_back = map_control_back(chain, self.x, y, dy, w)
        assert np.allclose(v_back, v, atol=1e-9)
        assert np.allclose(y_back, y1, atol=1e-12)
        assert np.allclose(dy_back, dy1, atol=1e-12)

    def test_record_fields(self):
        """Test the serialized change carries provenance and window."""
        record = build_bump_change(1.2, 1.8, 0.5).to_record()
        assert record["provenance"] == "bump"
        assert record["window"] == [1.2, 1.8]
        assert record["kappa_values"] == [0.5]
        assert record["kappa_floor"] == pytest.approx(1.0, abs=1e-12)


class TestQZero:
    """θ with p∂ₓθ + qθ = 0 on a core window."""

    def test_vanishing_q_gives_identity(self):
        """Test q ≡ 0 on ω returns θ ≡ 1 with the whole window as core."""
        change = build_theta_qzero(constant_pair(1.0, 0.0), Interval(1.0, 2.0), 6)
        assert change.is_identity()
        assert change.core.as_tuple() == pytest.approx((1.0, 2.0))

    def test_constant_coefficients(self):
        """Test p = q = 1 gives θ = e^{−(x−α)} on the core."""
        change = build_theta_qzero(constant_pair(1.0, 1.0), Interval(1.0, 2.0), 6)
        core = change.core
        xs = np.linspace(core.lo, core.hi, 41)
        assert np.allclose(change.theta(xs), np.exp(-(xs - core.lo)), rtol=1e-10)
        assert change.residual <= 1e-10
        assert change.kappa_left == pytest.approx(1.0, abs=1e-12)
        assert change.kappa_right == pytest.approx(1.0, abs=1e-12)

    def test_generic_residual(self):
        """Test the transformed q̂ vanishes on the core for non-constant coefficients."""
        cp = CouplingPair(PiecewiseFunction.polynomial([1.0, 0.2]), PiecewiseFunction.polynomial([0.3, 0.0, 0.1]))
        change = build_theta_qzero(cp, Interval(1.0, 2.0), 6)
        assert change.residual <= 1e-10
        xs = np.linspace(change.core.lo, change.core.hi, 41)
        assert np.max(np.abs(apply_change(cp, change).q(xs))) <= 1e-9
        assert change.kappa_floor > 0.0

    def test_requires_nonvanishing_p(self):
        """Test p ≡ 0 on ω has no usable window."""
        with pytest.raises(NoNonvanishingWindow, match="scanned"):
            build_theta_qzero(constant_pair(0.0, 1.0), Interval(1.0, 2.0), 4)


class TestBumpConstruction:
    """Closed-form J_k, ℓ selection and κ scan."""

    @pytest.mark.parametrize("alpha,beta,k", [
        (1.0, 1.0 + math.sqrt(2.0), 1),
        (0.4, 1.3, 3),
        (1.1, 2.9, 5),
        (0.2, 0.9, 7),
    ])
    def test_closed_form_matches_quadrature(self, alpha, beta, k):
        """Test J_k against ½∫ ∂ₓξ φ_k²."""
        assert Jk_closed_form(alpha, beta, k) == pytest.approx(numeric_J(alpha, beta, k), rel=1e-9, abs=1e-13)

    def test_symmetric_window_vanishes(self):
        """Test k(β+α) = π gives J_k = 0."""
        assert Jk_closed_form(1.0, PI - 1.0, 1) == pytest.approx(0.0, abs=1e-14)

    def test_resonant_mode(self):
        """Test 2k = 2π/(β−α) raises ResonantMode."""
        with pytest.raises(ResonantMode, match="2k") as info:
            Jk_closed_form(0.5, 0.5 + PI / 2, 2)
        assert info.value.k == 2

    def test_select_ell(self):
        """Test ℓ on (1, 2) uses n = 2 and keeps (nℓ, (n+1)ℓ) inside."""
        choice = select_ell(1.0, 2.0)
        assert choice.n == 2
        assert 1.0 < choice.alpha < choice.beta < 2.0
        assert choice.ell == pytest.approx(choice.numerator / choice.denominator * math.sqrt(2.0))
        assert choice.sin_gap > 0.0
        assert select_ell(0.3, 3.0).n == 1

    def test_sin_gap(self):
        """Test j|sin jℓ| stays away from zero for ℓ = √2 and hits zero at ℓ = π."""
        assert sin_gap(math.sqrt(2.0)) > 1e-3
        assert sin_gap(PI) == pytest.approx(0.0, abs=1e-12)

    def test_choose_kappa(self):
        """Test the smallest separating grid value."""
        # Expected: u ≡ 0 needs κ ≥ 1; u_k = −1/k needs |κ − 1| ≥ 1
        assert choose_kappa(np.zeros(6), 0.0) == 1.0
        u = -1.0 / np.arange(1, 9)
        assert choose_kappa(u, float(u[-1])) == 2.0

    def test_choose_kappa_exhausted(self):
        """Test a scan range too small for the bound raises ScanExhausted."""
        with pytest.raises(ScanExhausted, match="κ"):
            choose_kappa(np.zeros(4), 0.0, step=0.125, upper=0.2)

    def test_lower_bound_exponent(self):
        """Test a pure power law is recovered."""
        ks = np.arange(1, 11)
        slope, envelope = lower_bound_exponent(3.0 * ks ** -2.0, ks)
        assert slope == pytest.approx(-2.0, abs=1e-10)
        assert envelope == pytest.approx(3.0, rel=1e-10)


class TestSteps:
    """Building blocks of the three-step pipeline."""

    def test_hermite_quintic(self):
        """Test endpoint values, slopes and curvatures."""
        poly = hermite_quintic(1.0, 1.5, (1.0, -0.5, 0.25), (2.0, 0.0, 0.0))
        assert poly(1.0) == pytest.approx(1.0, abs=1e-12)
        assert poly.deriv()(1.0) == pytest.approx(-0.5, abs=1e-10)
        assert poly.deriv(2)(1.0) == pytest.approx(0.25, abs=1e-8)
        assert poly(1.5) == pytest.approx(2.0, abs=1e-12)
        assert poly.deriv()(1.5) == pytest.approx(0.0, abs=1e-10)

    def test_nonvanishing_window(self):
        """Test the longest run avoiding the zero of p = x − 1.5."""
        window = nonvanishing_window(PiecewiseFunction.polynomial([-1.5, 1.0]), Interval(1.0, 2.0))
        assert window.lo == pytest.approx(1.0)
        assert window.hi <= 1.5
        assert window.length > 0.4

    def test_step1_limit(self):
        """Test p = x gives J = −(β−α)/(2π) equal to the bound in magnitude."""
        J, bound = step1_limit(PiecewiseFunction.polynomial([0.0, 1.0]), 1.0, 1.6)
        assert J == pytest.approx(-0.6 / (2.0 * PI), rel=1e-10)
        assert bound == pytest.approx(0.6 / (2.0 * PI), rel=1e-10)

    def test_step2_shift_matches_weights(self):
        """Test the Step-2 bump shifts I_k by (κ/2)s_k."""
        cp = sloped_pair()
        alpha, beta, j, kappa = 1.3, 1.7, 2, 0.4
        change = build_step2_bump(cp.p, alpha, beta, j, kappa)
        moved = apply_change(cp, change)
        weights, _ = step2_weights(cp.p, alpha, beta, j, 4)
        for k in range(1, 5):
            shift = compute_Ik(moved, k) - compute_Ik(cp, k)
            assert shift == pytest.approx(0.5 * kappa * weights[k - 1], abs=1e-10)
        assert change.constancy_defect() <= 1e-12

    def test_step2_floor_skips_zero_indices(self):
        """Test the Step-2 sizing floor ignores every zero index, listed in S or not."""
        cos2 = CouplingPair.from_functions(q=CosineSeries.from_coefficients([0.0, 1.0]))
        table = index_table(cos2, 1.0, 4)
        assert [table.zero_Ik(k) for k in range(1, 5)] == [False, True, True, True]
        # Expected: ½|I_1| = ¼
        assert half_nonzero_floor(table) == pytest.approx(0.25, rel=1e-14)
        zero = CouplingPair.from_functions(name="zero")
        assert half_nonzero_floor(index_table(zero, 1.0, 3)) == math.inf

    def test_step3_case1_prediction(self):
        """Test ξ_α shifts I_m by −γ²ξ_α/(2p(α)) when pφ_m ≡ γ and I_{α,m} = 0."""
        alpha, beta = 1.0, 2.0
        gamma = math.sqrt(2.0 / PI)
        p = PiecewiseFunction.from_callable(lambda x: 1.0 / np.sin(np.clip(x, alpha, beta)),
                                            (0.0, alpha, beta, PI), SmoothnessClass.W1INFTY)
        cp = CouplingPair(p, PiecewiseFunction.zero(), "flat-mode")
        assert compute_Iak(cp, alpha, 1) == pytest.approx(0.0, abs=1e-12)
        change, predicted = build_step3_case1(p, alpha, beta, 0.2, gamma)
        shift = compute_Ik(apply_change(cp, change), 1) - compute_Ik(cp, 1)
        assert predicted == pytest.approx(-gamma ** 2 * 0.2 * math.sin(alpha) / 2.0, rel=1e-10)
        assert shift == pytest.approx(predicted, abs=1e-9)
        assert change.kappa_left == pytest.approx(1.2, abs=1e-12)

    def test_step3_case2_determinant(self):
        """Test det A₁ is linear in I_{α,m} and vanishes with parallel profiles."""
        window = Interval(1.2, 1.8)
        f1 = PiecewiseFunction.bump(window.lo, window.hi)
        f2 = f1 * PiecewiseFunction.polynomial([-window.midpoint, 1.0])
        det, B = step3_case2_determinant(3, 0.5, f1, f2, window)
        det2, _ = step3_case2_determinant(3, 1.0, f1, f2, window)
        assert det2 == pytest.approx(2.0 * det, rel=1e-12)
        assert det == pytest.approx(-math.sqrt(PI / 2.0) / 3.0 * 0.5 * B, rel=1e-12)
        _, parallel = step3_case2_determinant(3, 1.0, f1, f1 * 2.0, window)
        assert parallel == pytest.approx(0.0, abs=1e-14)


class TestRegularize:
    """End-to-end regularization with its trace."""

    def test_passing_pair_is_untouched(self):
        """Test q ≡ 1 needs no change and every mode is certified original."""
        cp = constant_pair(0.0, 1.0)
        result, trace = regularize(cp, Interval(1.0, 2.0), 6)
        assert result is cp
        assert trace.is_identity
        assert set(trace.certifications.values()) == {RegularizationStep.ORIGINAL}

    def test_constant_p_takes_bump_path(self):
        """Test p ≡ 1 on ω = (1, 2) is regularized by one bump with κ = 1."""
        cp = constant_pair(1.0, 0.0)
        result, trace = regularize(cp, Interval(1.0, 2.0), 8)
        assert trace.initial_failing == list(range(1, 9))
        assert trace.ell.n == 2
        assert [ch.provenance for ch in trace.chain] == [ChangeProvenance.BUMP]
        assert trace.steps[0].details["kappa"] == 1.0
        assert all(trace.certifications[k] == RegularizationStep.BUMP for k in range(1, 9))
        table = index_table(result, 1.0, 8)
        for k in range(1, 9):
            # Expected: Î_k = c·κ·J_k with c = κ = 1
            assert table.Ik[k - 1] == pytest.approx(Jk_closed_form(trace.ell.alpha, trace.ell.beta, k), abs=1e-10)
            assert not table.zero_Ik(k)
        lines = trace.to_lines()
        assert any(line.startswith("ell=") for line in lines)
        assert "certify k=1 bump" in lines

    def test_sloped_p_takes_step2(self):
        """Test a tuned vanishing mode with non-constant p is repaired by Step 2."""
        omega = Interval(1.0, 2.0)
        cp = tune_vanishing_mode(2, omega, base=sloped_pair())
        result, trace = regularize(cp, omega, 6)
        assert trace.initial_failing == [2]
        assert trace.certifications[2] == RegularizationStep.STEP2
        assert trace.residual_sets[0] == [2]
        assert trace.residual_sets[-1] == []
        table = index_table(result, omega.lo, 6)
        assert not table.zero_Ik(2)
        assert all(not (table.zero_Ik(k) and table.zero_Iak(k)) for k in range(1, 7))

    def test_zero_pair_has_no_window(self):
        """Test p = q ≡ 0 cannot be regularized."""
        with pytest.raises(NoNonvanishingWindow):
            regularize(CouplingPair.from_functions(name="zero"), Interval(1.0, 2.0), 4)
