"""Tests for the Marchenko-Pastur utilities."""

import numpy as np
import pytest
from scipy import integrate

from src.core.errors import InvalidLawError, NumericError
from src.core.models import MPLaw
from src.services.mp_dist import (
    mp_cdf,
    mp_density,
    mp_point_mass,
    mp_quantile,
    mp_sample,
    mp_sample_many,
    mp_support,
    random_direction_angle_quantile,
)


class TestDensity:
    """Test mp_density."""

    def test_interior_value(self):
        """Test the density against the closed form at one point."""
        law = MPLaw(beta=0.25)
        expected = np.sqrt((2.25 - 1.0) * (1.0 - 0.25)) / (2 * np.pi * 0.25 * 1.0)
        assert mp_density(law, 1.0) == pytest.approx(expected, rel=1e-12)

    def test_outside_support(self):
        """Test that the density vanishes beyond the upper edge."""
        assert mp_density(MPLaw(beta=1.0), 5.0) == 0.0

    def test_singular_at_zero_for_square(self):
        """Test the boundary singularity for beta = 1."""
        assert mp_density(MPLaw(beta=1.0), 0.0) == float("inf")

    @pytest.mark.parametrize("beta, mass", [(0.3, 1.0), (2.0, 0.5)])
    def test_integrates_to_continuous_mass(self, beta, mass):
        """Test that the continuous part carries min(1, 1/beta)."""
        law = MPLaw(beta=beta)
        lower, upper = mp_support(law)
        total, _ = integrate.quad(lambda x: mp_density(law, x), lower, upper, epsabs=1e-13, limit=500)
        assert total == pytest.approx(mass, abs=1e-8)

    def test_negative_lambda(self):
        """Test that a negative argument is rejected."""
        with pytest.raises(NumericError):
            mp_density(MPLaw(beta=0.5), -1.0)


class TestCdfAndQuantile:
    """Test mp_cdf and mp_quantile."""

    def test_cdf_edges_square(self):
        """Test the CDF at the support edges for beta = 1."""
        law = MPLaw(beta=1.0)
        assert mp_cdf(law, 0.0) == 0.0
        assert mp_cdf(law, 4.0) == 1.0

    def test_median_square(self):
        """Test that the CDF of the median is one half."""
        law = MPLaw(beta=1.0)
        assert mp_cdf(law, mp_quantile(law, 0.5)) == pytest.approx(0.5, abs=1e-8)

    @pytest.mark.parametrize("lam", [0.2, 0.5, 1.0, 1.7, 2.5])
    def test_quantile_inverts_cdf(self, lam):
        """Test quantile(cdf(x)) = x in the interior of the support."""
        law = MPLaw(beta=0.5)
        assert mp_quantile(law, mp_cdf(law, lam)) == pytest.approx(lam, abs=1e-7)

    @pytest.mark.parametrize("q", [1e-4, 1e-3, 0.01, 0.05])
    def test_square_small_levels_round_trip(self, q):
        """Test that low quantiles of the square law invert through the CDF."""
        law = MPLaw(beta=1.0)
        lam = mp_quantile(law, q)
        assert lam > 0.0
        assert mp_cdf(law, lam) == pytest.approx(q, rel=1e-7)

    @pytest.mark.parametrize("lam", [1e-8, 1e-6, 1e-4])
    def test_square_cdf_near_zero(self, lam):
        """Test the square-law CDF against its 2√λ/π behaviour at the hard edge."""
        assert mp_cdf(MPLaw(beta=1.0), lam) == pytest.approx(2.0 * np.sqrt(lam) / np.pi, rel=1e-3)

    def test_square_vectorized_draws(self):
        """Test tabulated square-law draws against the quadrature CDF near zero."""
        law = MPLaw(beta=1.0)
        draws = np.sort(mp_sample_many(law, np.random.default_rng(2), 100_000))
        assert np.all(np.isfinite(draws))
        grid = np.array([1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 3.5])
        empirical = np.searchsorted(draws, grid, side="right") / draws.size
        theoretical = np.array([mp_cdf(law, x) for x in grid])
        assert np.max(np.abs(empirical - theoretical)) <= 0.01

    def test_small_level_at_lower_edge(self):
        """Test that tiny levels map to the lower edge."""
        law = MPLaw(beta=0.5)
        lower, _ = mp_support(law)
        assert mp_quantile(law, 1e-12) == pytest.approx(lower, abs=1e-5)

    def test_point_mass_above_one(self):
        """Test the atom at zero for beta > 1."""
        law = MPLaw(beta=2.0)
        assert mp_point_mass(law) == pytest.approx(0.5)
        assert mp_quantile(law, 0.3) == 0.0
        assert mp_cdf(law, 0.0) == pytest.approx(0.5)

    def test_variance_scales_quantiles(self):
        """Test that sigma2 scales every quantile."""
        assert mp_quantile(MPLaw(beta=0.4, sigma2=3.0), 0.7) == pytest.approx(
            3.0 * mp_quantile(MPLaw(beta=0.4), 0.7), rel=1e-10
        )

    def test_cdf_is_monotone(self):
        """Test that the CDF never decreases."""
        law = MPLaw(beta=0.2)
        lower, upper = mp_support(law)
        values = [mp_cdf(law, x) for x in np.linspace(lower, upper, 60)]
        assert np.all(np.diff(values) >= -1e-12)

    def test_square_matrix_spectrum(self):
        """Test the spectrum of a 500 x 500 Gaussian matrix against the CDF."""
        rng = np.random.default_rng(7)
        x = rng.standard_normal((500, 500))
        eig = np.sort(np.linalg.svd(x, compute_uv=False) ** 2 / 500)
        law = MPLaw(beta=1.0)
        cdf = np.array([mp_cdf(law, min(e, 4.0)) for e in eig])
        m = eig.size
        ks = max(np.max(np.arange(1, m + 1) / m - cdf), np.max(cdf - np.arange(m) / m))
        assert ks <= 0.02

    @pytest.mark.parametrize("bad", [MPLaw(beta=0.0), MPLaw(beta=-1.0), MPLaw(beta=0.5, sigma2=0.0)])
    def test_invalid_law(self, bad):
        """Test that invalid parameters raise InvalidLawError."""
        with pytest.raises(InvalidLawError):
            mp_cdf(bad, 1.0)
        with pytest.raises(InvalidLawError):
            mp_quantile(bad, 0.5)

    def test_level_outside_unit_interval(self):
        """Test that quantile levels must lie in (0, 1)."""
        with pytest.raises(NumericError):
            mp_quantile(MPLaw(beta=0.5), 1.0)


class TestSampling:
    """Test mp_sample and mp_sample_many."""

    def test_single_draw_deterministic(self):
        """Test that equal seeds give equal draws."""
        law = MPLaw(beta=0.3)
        first = mp_sample(law, np.random.default_rng(3))
        second = mp_sample(law, np.random.default_rng(3))
        assert first == second
        lower, upper = mp_support(law)
        assert lower <= first <= upper

    def test_vectorized_draws_follow_the_law(self):
        """Test tabulated draws against the quadrature CDF on a grid."""
        law = MPLaw(beta=0.5)
        draws = np.sort(mp_sample_many(law, np.random.default_rng(11), 100_000))
        lower, upper = mp_support(law)
        grid = np.linspace(lower, upper, 200)
        empirical = np.searchsorted(draws, grid, side="right") / draws.size
        theoretical = np.array([mp_cdf(law, x) for x in grid])
        assert np.max(np.abs(empirical - theoretical)) <= 0.01

    def test_vectorized_atom(self):
        """Test the share of zero draws for beta > 1."""
        draws = mp_sample_many(MPLaw(beta=4.0), np.random.default_rng(5), 20_000)
        assert np.mean(draws == 0.0) == pytest.approx(0.75, abs=0.02)


class TestRandomDirectionAngle:
    """Test random_direction_angle_quantile."""

    def test_plane_median(self):
        """Test a uniform direction in the plane against a line."""
        assert random_direction_angle_quantile(2, 1, 0.5) == pytest.approx(45.0, abs=1e-9)

    @pytest.mark.parametrize("n, r", [(100, 2), (400, 3), (400, 50)])
    def test_monte_carlo(self, n, r):
        """Test the 5% level against simulated directions."""
        rng = np.random.default_rng(n + r)
        inside = rng.chisquare(r, size=100_000)
        outside = rng.chisquare(n - r, size=100_000)
        angles = np.degrees(np.arccos(np.sqrt(inside / (inside + outside))))
        assert random_direction_angle_quantile(n, r, 0.05) == pytest.approx(np.quantile(angles, 0.05), abs=0.2)

    def test_increasing_in_level(self):
        """Test that higher levels give larger angles."""
        assert random_direction_angle_quantile(50, 3, 0.05) < random_direction_angle_quantile(50, 3, 0.5)

    def test_subspace_must_be_proper(self):
        """Test that r >= n is rejected."""
        with pytest.raises(NumericError):
            random_direction_angle_quantile(5, 5, 0.05)
