"""Tests for principal angles and the θ₂* percentile."""

import numpy as np
import pytest

from src.core.errors import NumericError
from src.core.models import BootstrapCache, SpaceTag, SubspaceBasis
from src.services.principal_angles import (
    max_principal_angle,
    order_statistic,
    principal_angles,
    theta2_star_percentile,
    theta2_star_samples,
    vector_subspace_angle,
)


def random_basis(rng, n, r):
    q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    return q


class TestPrincipalAngles:
    """Test principal_angles and max_principal_angle."""

    def test_same_subspace(self, rng):
        """Test that a subspace meets itself at 0°."""
        a = random_basis(rng, 6, 3)
        np.testing.assert_allclose(principal_angles(a, a), 0.0, atol=1e-5)

    def test_coordinate_planes(self):
        """Test span(e1, e2) against span(e1, e3)."""
        e = np.eye(4)
        np.testing.assert_allclose(principal_angles(e[:, [0, 1]], e[:, [0, 2]]), [0.0, 90.0], atol=1e-10)

    def test_orthogonal_invariance(self, rng):
        """Test that a common rotation leaves the angles unchanged."""
        a, b = random_basis(rng, 8, 3), random_basis(rng, 8, 2)
        q = random_basis(rng, 8, 8)
        np.testing.assert_allclose(principal_angles(q @ a, q @ b), principal_angles(a, b), atol=1e-8)

    def test_symmetric_and_basis_free(self, rng):
        """Test symmetry and invariance to re-rotation inside each subspace."""
        a, b = random_basis(rng, 9, 3), random_basis(rng, 9, 3)
        rot = random_basis(rng, 3, 3)
        np.testing.assert_allclose(principal_angles(a, b), principal_angles(b, a), atol=1e-8)
        np.testing.assert_allclose(principal_angles(a @ rot, b), principal_angles(a, b), atol=1e-8)

    def test_extended(self):
        """Test the trailing 90° angles for unequal ranks."""
        e = np.eye(5)
        angles = principal_angles(e[:, [0]], e[:, [0, 1, 2]], extended=True)
        np.testing.assert_allclose(angles, [0.0, 90.0, 90.0], atol=1e-10)

    def test_ambient_mismatch(self):
        """Test that different ambient dimensions are rejected."""
        with pytest.raises(NumericError):
            principal_angles(np.eye(3)[:, :1], np.eye(4)[:, :1])

    def test_empty_is_ninety(self):
        """Test that an empty subspace gives the 90° maximum."""
        assert max_principal_angle(np.zeros((4, 0)), np.eye(4)[:, :2]) == 90.0

    def test_accepts_subspace_basis(self):
        """Test SubspaceBasis arguments."""
        e = np.eye(3)
        assert max_principal_angle(SubspaceBasis(matrix=e[:, :2]), SubspaceBasis(matrix=e[:, 1:])) == pytest.approx(90.0)


class TestVectorSubspaceAngle:
    """Test vector_subspace_angle."""

    def test_examples(self):
        """Test inside, orthogonal and diagonal vectors."""
        e = np.eye(2)
        assert vector_subspace_angle(e[:, 0], e[:, [0]]) == pytest.approx(0.0, abs=1e-6)
        assert vector_subspace_angle(e[:, 1], e[:, [0]]) == pytest.approx(90.0)
        assert vector_subspace_angle(np.array([1.0, 1.0]) / np.sqrt(2), e[:, [0]]) == pytest.approx(45.0)

    def test_matches_principal_angle(self, rng):
        """Test agreement with the first principal angle of span(v)."""
        v = rng.standard_normal(7)
        b = random_basis(rng, 7, 3)
        expected = principal_angles(v / np.linalg.norm(v), b)[0]
        assert vector_subspace_angle(v, b) == pytest.approx(expected, abs=1e-9)

    def test_zero_vector(self):
        """Test that the zero vector is rejected."""
        with pytest.raises(NumericError):
            vector_subspace_angle(np.zeros(3), np.eye(3)[:, :1])

    def test_triangle_bounds(self, rng):
        """Test (θ̂ − φ)₊ ≤ θ ≤ θ̂ + θ₂* for random directions and a perturbed subspace."""
        n, r = 30, 3
        truth = random_basis(rng, n, r)
        estimate, _ = np.linalg.qr(truth + 0.2 * rng.standard_normal((n, r)))
        phi = max_principal_angle(truth, estimate)
        for _ in range(500):
            v = rng.standard_normal(n)
            theta = vector_subspace_angle(v, truth)
            theta_hat = vector_subspace_angle(v, estimate)
            coords = estimate.T @ v
            theta2 = np.degrees(np.arccos(min(1.0, np.linalg.norm(truth.T @ estimate @ coords) / np.linalg.norm(coords))))
            assert max(0.0, theta_hat - phi) <= theta + 1e-9
            assert theta <= theta_hat + theta2 + 1e-9


class TestTheta2Star:
    """Test order_statistic and the θ₂* percentile."""

    def test_order_statistic(self):
        """Test the ceil(q·M)-th smallest value."""
        values = np.arange(1.0, 101.0)
        assert order_statistic(values, 0.95) == 95.0
        assert order_statistic(values, 0.001) == 1.0

    def test_identity_alignments(self, rng):
        """Test that perfect alignment gives 0°."""
        basis = SubspaceBasis(matrix=random_basis(rng, 6, 2))
        cache = BootstrapCache(trait_aligns=np.tile(np.eye(2), (20, 1, 1)), object_aligns=np.tile(np.eye(2), (20, 1, 1)))
        angle, degenerate = theta2_star_percentile(basis.matrix @ np.array([0.3, 0.8]), basis, cache)
        assert angle == pytest.approx(0.0, abs=1e-6)
        assert not degenerate

    def test_fixed_rotation(self):
        """Test a one-dimensional alignment cos α."""
        alpha = 25.0
        basis = SubspaceBasis(matrix=np.eye(4)[:, :1])
        aligns = np.full((30, 1, 1), np.cos(np.radians(alpha)))
        angle, _ = theta2_star_percentile(np.array([1.0, 0.5, 0.0, 0.0]), basis, aligns)
        assert angle == pytest.approx(alpha, abs=1e-9)

    def test_object_space_stack(self):
        """Test that object bases read the object alignments."""
        basis = SubspaceBasis(matrix=np.eye(3)[:, :1], space_tag=SpaceTag.OBJECT)
        cache = BootstrapCache(trait_aligns=np.ones((10, 1, 1)), object_aligns=np.zeros((10, 1, 1)))
        angle, _ = theta2_star_percentile(np.array([1.0, 0.0, 0.0]), basis, cache)
        assert angle == pytest.approx(90.0)

    def test_orthogonal_vector_is_degenerate(self):
        """Test the 90° convention when v has no component in the basis."""
        basis = SubspaceBasis(matrix=np.eye(3)[:, :1])
        angle, degenerate = theta2_star_percentile(np.array([0.0, 1.0, 0.0]), basis, np.ones((5, 1, 1)))
        assert angle == 90.0
        assert degenerate

    def test_shape_mismatch(self):
        """Test that a cache at another rank is rejected."""
        with pytest.raises(NumericError):
            theta2_star_samples(np.ones(3), np.eye(3)[:, :2], np.ones((5, 1, 1)))
