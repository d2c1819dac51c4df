"""
Unit tests for the biorthogonal time family
"""

import math

import numpy as np
import pytest

from src.core.biortho import (
    build_family, evaluate, family_table, fit_norm_growth, gram_matrix, gram_matrix_mp, integrate_time,
    time_moment, time_nodes,
)
from src.core.exceptions import IllConditioned, OutOfDomain
from src.models.types import PrecisionMode


def hand_gram(T: float) -> np.ndarray:
    """2×2 Gram matrix of e^{−t}, t e^{−t} on (0,T) from the antiderivatives (s = 2)."""
    e = math.exp(-2.0 * T)
    g11 = (1.0 - e) / 2.0
    g12 = (1.0 - (1.0 + 2.0 * T) * e) / 4.0
    g22 = (2.0 - (2.0 + 4.0 * T + 4.0 * T * T) * e) / 8.0
    return np.array([[g11, g12], [g12, g22]])


class TestGramMatrix:
    """Closed-form Gram entries."""

    def test_first_entry(self):
        """Test the (e_{1,1}, e_{1,1}) entry at T = 1."""
        # Expected: ∫₀¹ e^{−2t} dt = (1 − e^{−2})/2 ≈ 0.432332
        G = gram_matrix(1, 1.0)
        assert abs(G[0, 0] - (1.0 - math.exp(-2.0)) / 2.0) < 1e-15

    def test_hand_two_by_two(self):
        """Test K = 1 against the antiderivative formulas."""
        for T in (0.25, 1.0, 2.0):
            assert np.allclose(gram_matrix(1, T), hand_gram(T), rtol=1e-13, atol=0.0)

    def test_symmetry(self):
        """Test G = Gᵀ exactly."""
        G = gram_matrix(6, 0.7)
        assert np.array_equal(G, G.T)

    def test_closed_forms_against_quadrature(self):
        """Test entries against adaptive quadrature of the products."""
        rng = np.random.default_rng(7)
        for _ in range(20):
            K = 5
            T = float(rng.uniform(0.25, 2.0))
            m, n = rng.integers(0, 2 * K, 2)
            G = gram_matrix(K, T)
            km, kn = m % K + 1, n % K + 1
            pm, pn = m // K, n // K
            g = lambda t: t ** (pm + pn) * np.exp(-(km ** 2 + kn ** 2) * t)
            value = integrate_time(g, T).value
            assert abs(G[m, n] - value) <= 1e-11 * abs(value)

    def test_extended_matches_double(self):
        """Test the mpmath Gram agrees with the double one."""
        G = gram_matrix(4, 1.0)
        G_mp = gram_matrix_mp(4, 1.0)
        for i in range(8):
            for j in range(8):
                assert abs(float(G_mp[i, j]) - G[i, j]) <= 1e-14 * abs(G[i, j])

    def test_time_moment(self):
        """Test ∫₀^T t e^{−st} dt = (1 − (1+sT)e^{−sT})/s²."""
        s, T = 5.0, 0.8
        expected = (1.0 - (1.0 + s * T) * math.exp(-s * T)) / s ** 2
        assert abs(time_moment(1, s, T) - expected) < 1e-15
        assert abs(time_moment(2, 0.0, 2.0) - 8.0 / 3.0) < 1e-15

    def test_invalid_arguments(self):
        """Test K ≥ 1 and T > 0 are enforced."""
        with pytest.raises(ValueError, match="K ≥ 1"):
            gram_matrix(0, 1.0)
        with pytest.raises(ValueError, match="K ≥ 1"):
            gram_matrix(2, -1.0)


class TestBuildFamily:
    """Minimal-norm biorthogonal family."""

    def setup_method(self):
        """Set up test fixtures."""
        self.small = build_family(2, 1.0)

    def test_hand_solved_k1(self):
        """Test K = 1, T = 1 coefficients equal the inverse of the hand Gram matrix."""
        fam = build_family(1, 1.0)
        expected = np.linalg.inv(hand_gram(1.0))
        assert np.allclose(fam.coefficients, expected, rtol=1e-12, atol=0.0)
        assert fam.max_residual <= 1e-12

    def test_delta_property_k8(self):
        """Test the full residual matrix for K = 8, T = 1."""
        fam = build_family(8, 1.0)
        assert fam.residual_matrix.shape == (16, 16)
        assert fam.max_residual <= 1e-8
        assert fam.min_eigenvalue > 0.0

    def test_extended_request(self):
        """Test an explicit extended-precision build keeps mpmath coefficients."""
        fam = build_family(3, 0.5, precision=PrecisionMode.EXTENDED)
        assert fam.precision == PrecisionMode.EXTENDED
        assert fam.mp_coefficients is not None
        assert fam.max_residual <= 1e-8

    def test_double_rejection(self):
        """Test DOUBLE mode raises with the achieved residual when tol is unreachable."""
        with pytest.raises(IllConditioned, match="residual") as info:
            build_family(2, 1.0, tol=1e-40, precision=PrecisionMode.DOUBLE)
        assert info.value.residual > 1e-40

    def test_minimal_norm_diagonal(self):
        """Test ‖q_n‖² equals the Gram-inverse diagonal by quadrature."""
        for j in (1, 2):
            for l in (1, 2):
                value = integrate_time(lambda t: evaluate(self.small, j, l, t) ** 2, 1.0).value
                n = self.small.index(j, l)
                assert abs(value - self.small.coefficients[n, n]) <= 1e-8 * self.small.coefficients[n, n]
                assert abs(self.small.norm(j, l) ** 2 - value) <= 1e-8 * value

    def test_norm_growth_fit(self):
        """Test the fitted (ε, C_ε) bound covers every computed mode."""
        fam = build_family(6, 1.0)
        growth = fit_norm_growth(fam)
        ks = np.arange(1, 7)
        assert growth.epsilon >= 0.0
        assert np.all(growth.log_norms <= growth.epsilon * ks ** 2 + growth.constant + 1e-12)

    def test_family_table(self):
        """Test one row per (j, l)."""
        rows = family_table(self.small)
        assert len(rows) == 4
        assert {(r["j"], r["l"]) for r in rows} == {(1, 1), (1, 2), (2, 1), (2, 2)}


class TestEvaluate:
    """Pointwise evaluation and series collapse."""

    def setup_method(self):
        """Set up test fixtures."""
        self.fam = build_family(2, 1.0)

    def test_value_at_zero(self):
        """Test q_{j,l}(0) is the sum of the e_{1,·} coefficients."""
        # e_{1,k}(0) = 1 and e_{2,k}(0) = 0
        for j in (1, 2):
            for l in (1, 2):
                n = self.fam.index(j, l)
                assert abs(evaluate(self.fam, j, l, 0.0) - np.sum(self.fam.coefficients[n, :2])) < 1e-9

    def test_biorthogonality_by_quadrature(self):
        """Test ∫ e_{1,1} q_{1,1} = 1 and q_{2,l} ⟂ e_{1,k} for k ≠ l."""
        one = integrate_time(lambda t: np.exp(-t) * evaluate(self.fam, 1, 1, t), 1.0).value
        assert abs(one - 1.0) <= 1e-8
        zero = integrate_time(lambda t: np.exp(-4.0 * t) * evaluate(self.fam, 2, 1, t), 1.0).value
        assert abs(zero) <= 1e-8

    def test_out_of_domain(self):
        """Test evaluation outside [0, T] is rejected."""
        with pytest.raises(OutOfDomain, match="t must lie"):
            evaluate(self.fam, 1, 1, 1.5)

    def test_bad_index(self):
        """Test j ∈ {1, 2} and 1 ≤ l ≤ K."""
        with pytest.raises(ValueError, match="family index"):
            evaluate(self.fam, 3, 1, 0.5)

    def test_collapse_single_term(self):
        """Test a one-term weight table reproduces the family member."""
        weights = np.zeros((2, 2))
        weights[1, 0] = 2.5
        t = np.linspace(0.0, 1.0, 11)
        assert np.allclose(self.fam.collapse(weights)(t), 2.5 * evaluate(self.fam, 2, 1, t), atol=1e-9)

    def test_series_norm(self):
        """Test ‖Σ w q‖ from the Gram inverse against quadrature."""
        weights = np.array([[1.0, -0.5], [0.25, 2.0]])
        series = self.fam.collapse(weights)
        t, w = time_nodes(1.0)
        direct = math.sqrt(float(np.sum(w * series(t) ** 2)))
        assert abs(self.fam.series_norm(weights) - direct) <= 1e-8 * direct
