import numpy as np
import pytest

from gsvgd.manifold import (
    ManifoldError,
    Projector,
    init_projectors,
    polar_retract,
    reorthonormalize,
    sample_tangent_noise,
    subspace_distance,
    tangent_project,
)


def random_projector(rng, d, m):
    q, r = np.linalg.qr(rng.standard_normal((d, m)))
    return Projector(q * np.where(np.diagonal(r) < 0, -1.0, 1.0))


def random_orthogonal(rng, m):
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    return q * np.where(np.diagonal(r) < 0, -1.0, 1.0)


class TestProjector:
    def test_accepts_orthonormal(self):
        p = Projector(np.eye(4)[:, :2])
        assert p.d == 4 and p.m == 2

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ManifoldError):
            Projector(np.ones((3, 2)))

    def test_rejects_wide_matrix(self):
        with pytest.raises(ManifoldError):
            Projector(np.eye(2, 3))

    def test_matrix_read_only(self):
        p = Projector(np.eye(3)[:, :1])
        with pytest.raises(ValueError):
            p.matrix[0, 0] = 2.0


class TestTangentProject:
    def test_projecting_base_gives_zero(self):
        rng = np.random.default_rng(0)
        a = random_projector(rng, 5, 2)
        assert np.linalg.norm(tangent_project(a, a.matrix).delta) < 1e-12

    def test_idempotent_on_tangent_input(self):
        rng = np.random.default_rng(1)
        a = random_projector(rng, 6, 3)
        inner = tangent_project(a, rng.standard_normal((6, 3))).delta
        again = tangent_project(a, inner).delta
        np.testing.assert_allclose(again, inner, atol=1e-12)

    def test_hand_case_2d(self):
        # A = e1, G = (3, 4):  (I - A A^T) G = (0, 4)
        a = Projector(np.array([[1.0], [0.0]]))
        out = tangent_project(a, np.array([[3.0], [4.0]])).delta
        np.testing.assert_allclose(out, [[0.0], [4.0]], atol=1e-14)

    def test_shape_mismatch(self):
        a = Projector(np.eye(3)[:, :1])
        with pytest.raises(ManifoldError):
            tangent_project(a, np.ones((2, 1)))


class TestPolarRetract:
    def test_zero_step_keeps_subspace(self):
        rng = np.random.default_rng(2)
        for d, m in [(3, 1), (5, 3), (4, 4)]:
            a = random_projector(rng, d, m)
            out = polar_retract(a, np.zeros((d, m)))
            assert subspace_distance(out, a) <= 1e-10

    def test_hand_case_2d(self):
        # A + delta = (1, 1)^T has thin SVD u = (1,1)/sqrt(2), s = sqrt(2), v = 1
        a = Projector(np.array([[1.0], [0.0]]))
        out = polar_retract(a, np.array([[0.0], [1.0]]))
        np.testing.assert_allclose(out.matrix, np.full((2, 1), 1 / np.sqrt(2)), atol=1e-14)

    def test_orthonormal_closure_random(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = random_projector(rng, 7, 3)
            delta = tangent_project(a, 0.5 * rng.standard_normal((7, 3))).delta
            out = polar_retract(a, delta)
            defect = np.linalg.norm(out.matrix.T @ out.matrix - np.eye(3))
            assert defect <= 1e-12

    def test_svd_oracle_random(self):
        # independent check: the output spans the column space of A + delta
        rng = np.random.default_rng(4)
        a = random_projector(rng, 6, 2)
        delta = tangent_project(a, 0.3 * rng.standard_normal((6, 2))).delta
        out = polar_retract(a, delta)
        q, _ = np.linalg.qr(a.matrix + delta)
        assert subspace_distance(out, Projector(q)) <= 1e-12

    def test_degenerate_step_raises(self):
        a = Projector(np.eye(3)[:, :1])
        with pytest.raises(ManifoldError):
            polar_retract(a, -a.matrix)  # A + delta = 0

    def test_representative_invariance(self):
        rng = np.random.default_rng(5)
        a = random_projector(rng, 6, 3)
        delta = tangent_project(a, rng.standard_normal((6, 3))).delta
        c = random_orthogonal(rng, 3)
        first = polar_retract(a, delta)
        second = polar_retract(Projector(a.matrix @ c), delta @ c)
        assert subspace_distance(first, second) <= 1e-10

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        a = random_projector(rng, 5, 2)
        delta = tangent_project(a, rng.standard_normal((5, 2))).delta
        np.testing.assert_array_equal(
            polar_retract(a, delta).matrix, polar_retract(a, delta).matrix
        )


class TestSampleTangentNoise:
    def test_deterministic_given_seed(self):
        a = Projector(np.eye(5)[:, :2])
        first = sample_tangent_noise(a, np.random.default_rng(42)).delta
        second = sample_tangent_noise(a, np.random.default_rng(42)).delta
        np.testing.assert_array_equal(first, second)

    def test_tangency(self):
        rng = np.random.default_rng(7)
        a = random_projector(rng, 6, 2)
        noise = sample_tangent_noise(a, rng).delta
        assert np.linalg.norm(a.matrix.T @ noise) <= 1e-10

    def test_entry_variance_matches_projection_diagonal(self):
        # Var[(Pi_A xi)_{ij}] = (Pi_A)_{ii}; Monte-Carlo over 10^4 draws
        rng = np.random.default_rng(8)
        a = random_projector(rng, 4, 2)
        pi_diag = np.diagonal(np.eye(4) - a.matrix @ a.matrix.T)
        draws = np.stack([sample_tangent_noise(a, rng).delta for _ in range(10_000)])
        emp_var = draws.var(axis=0)
        expected = np.repeat(pi_diag[:, None], 2, axis=1)
        np.testing.assert_allclose(emp_var, expected, rtol=0.10)


class TestInitProjectors:
    def test_one_hot_blocks(self):
        blocks = init_projectors(4, 2, 2)
        np.testing.assert_array_equal(blocks[0].matrix, np.eye(4)[:, :2])
        np.testing.assert_array_equal(blocks[1].matrix, np.eye(4)[:, 2:])

    def test_capped_default_count(self):
        blocks = init_projectors(50, 5, min(20, 50 // 5))
        assert len(blocks) == 10
        stacked = np.concatenate([b.matrix for b in blocks], axis=1)
        np.testing.assert_allclose(stacked.T @ stacked, np.eye(50), atol=1e-14)

    def test_overfull_raises(self):
        with pytest.raises(ManifoldError):
            init_projectors(3, 2, 2)


class TestReorthonormalize:
    def test_already_orthonormal_preserves_subspaces(self):
        rng = np.random.default_rng(9)
        blocks = init_projectors(6, 2, 3)
        out = reorthonormalize(blocks)
        for before, after in zip(blocks, out):
            assert subspace_distance(before, after) <= 1e-10

    def test_hand_gram_schmidt(self):
        # second projector (1,1)/sqrt(2) becomes e2 after orthogonalizing against e1
        first = Projector(np.array([[1.0], [0.0]]))
        second = Projector(np.full((2, 1), 1 / np.sqrt(2)))
        out = reorthonormalize([first, second])
        assert subspace_distance(out[0], first) <= 1e-12
        np.testing.assert_allclose(np.abs(out[1].matrix), [[0.0], [1.0]], atol=1e-12)

    def test_total_rank_overflow_raises(self):
        blocks = init_projectors(4, 2, 2) + [Projector(np.eye(4)[:, :1])]
        with pytest.raises(ManifoldError):
            reorthonormalize(blocks)

    def test_rank_deficient_batch_raises(self):
        p = Projector(np.eye(3)[:, :1])
        with pytest.raises(ManifoldError):
            reorthonormalize([p, p])

    def test_joint_orthonormality_restored(self):
        rng = np.random.default_rng(10)
        blocks = [random_projector(rng, 8, 2) for _ in range(3)]
        out = reorthonormalize(blocks)
        stacked = np.concatenate([b.matrix for b in out], axis=1)
        assert np.linalg.norm(stacked.T @ stacked - np.eye(6)) <= 1e-10


class TestSubspaceDistance:
    def test_zero_under_orthogonal_factor(self):
        rng = np.random.default_rng(11)
        a = random_projector(rng, 5, 2)
        c = random_orthogonal(rng, 2)
        assert subspace_distance(a, Projector(a.matrix @ c)) <= 1e-12

    def test_hand_axes(self):
        e1 = Projector(np.array([[1.0], [0.0]]))
        e2 = Projector(np.array([[0.0], [1.0]]))
        assert subspace_distance(e1, e2) == pytest.approx(np.sqrt(2), abs=1e-14)

    def test_symmetry(self):
        rng = np.random.default_rng(12)
        a = random_projector(rng, 6, 3)
        b = random_projector(rng, 6, 3)
        assert subspace_distance(a, b) == pytest.approx(subspace_distance(b, a), abs=0)

    def test_dimension_mismatch(self):
        with pytest.raises(ManifoldError):
            subspace_distance(Projector(np.eye(3)[:, :1]), Projector(np.eye(4)[:, :1]))
