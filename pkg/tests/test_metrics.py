import numpy as np
import pytest

from gsvgd.metrics import (
    MetricError,
    covariance_error,
    dim_avg_marginal_variance,
    energy_distance,
)


class TestEnergyDistance:
    def test_identical_samples_zero(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((20, 3))
        assert energy_distance(x, x.copy()) == pytest.approx(0.0, abs=1e-12)

    def test_hand_two_points_1d(self):
        # 2 E||X - Y|| = 4, both within-sample terms vanish
        assert energy_distance([[0.0]], [[2.0]]) == pytest.approx(4.0, abs=1e-14)

    def test_nonnegative_on_random_pairs(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n, k, d = rng.integers(1, 12), rng.integers(1, 12), rng.integers(1, 4)
            x, y = rng.standard_normal((n, d)), rng.standard_normal((k, d))
            assert energy_distance(x, y) >= -1e-12

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        x, y = rng.standard_normal((9, 2)), rng.standard_normal((6, 2))
        assert energy_distance(x, y) == pytest.approx(energy_distance(y, x), abs=1e-14)

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        x, y = rng.standard_normal((8, 3)), rng.standard_normal((5, 3))
        shift = rng.standard_normal(3)
        # exact in real arithmetic; the norm-expansion distance loses a few
        # digits under common shifts, so compare at single-precision level
        assert energy_distance(x + shift, y + shift) == pytest.approx(
            energy_distance(x, y), rel=1e-6
        )

    def test_dimension_mismatch(self):
        with pytest.raises(MetricError):
            energy_distance(np.zeros((3, 2)), np.zeros((3, 3)))

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(4)
        x, y = rng.standard_normal((7, 2)), rng.standard_normal((5, 2))
        cross = np.mean([np.linalg.norm(a - b) for a in x for b in y])
        within_x = np.mean([np.linalg.norm(a - b) for a in x for b in x])
        within_y = np.mean([np.linalg.norm(a - b) for a in y for b in y])
        expected = 2 * cross - within_x - within_y
        assert energy_distance(x, y) == pytest.approx(expected, rel=1e-12)


class TestCovarianceError:
    def test_hand_two_point_cloud(self):
        # unbiased covariance of {(-1,0), (1,0)} is diag(2, 0)
        x = np.array([[-1.0, 0.0], [1.0, 0.0]])
        assert covariance_error(x, np.diag([2.0, 0.0])) == pytest.approx(0.0, abs=1e-14)

    def test_zero_when_reference_matches(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((40, 3))
        centered = x - x.mean(axis=0)
        ref = centered.T @ centered / 39
        assert covariance_error(x, ref) == pytest.approx(0.0, abs=1e-12)

    def test_scaling_behaviour(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((30, 2))
        ref = np.zeros((2, 2))
        base = covariance_error(x, ref)
        assert covariance_error(2.0 * x, ref) == pytest.approx(4.0 * base, rel=1e-12)

    def test_reorder_invariance(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((25, 3))
        ref = np.eye(3)
        shuffled = x[rng.permutation(25)]
        assert covariance_error(shuffled, ref) == pytest.approx(
            covariance_error(x, ref), abs=1e-12
        )

    def test_needs_two_samples(self):
        with pytest.raises(MetricError):
            covariance_error(np.zeros((1, 2)), np.eye(2))

    def test_asymmetric_reference_rejected(self):
        with pytest.raises(MetricError):
            covariance_error(np.zeros((3, 2)), np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestDimAvgMarginalVariance:
    def test_hand_two_points(self):
        assert dim_avg_marginal_variance([[0.0, 0.0], [2.0, 2.0]]) == pytest.approx(2.0)

    def test_constant_sample_zero(self):
        assert dim_avg_marginal_variance(np.full((10, 4), 3.3)) == pytest.approx(0.0)

    def test_standard_normal_monte_carlo(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((100_000, 5))
        assert dim_avg_marginal_variance(x) == pytest.approx(1.0, rel=0.05)

    def test_needs_two_samples(self):
        with pytest.raises(MetricError):
            dim_avg_marginal_variance(np.zeros((1, 3)))

    def test_finite_on_finite_inputs(self):
        rng = np.random.default_rng(9)
        x = 1e8 * rng.standard_normal((50, 4))
        assert np.isfinite(dim_avg_marginal_variance(x))
