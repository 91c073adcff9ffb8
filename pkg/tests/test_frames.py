import numpy as np
import pytest

from conftest import admissible_triples, apply_lam, lorentz_batch
from lloca import minkowski as mink
from lloca.errors import DegenerateInput, DomainError
from lloca.frames import frame_gs4, frame_pd, frame_so3, gram_schmidt3, levi_civita_u3

G = mink.METRIC


def frame_residual(frames):
    return np.abs(frames @ G @ np.swapaxes(frames, -1, -2) - G).max()


REST_TRIPLE = (np.array([1.0, 0, 0, 0]), np.array([0.5, 1.0, 0, 0]),
               np.array([0.5, 0, 1.0, 0]))


class TestGramSchmidt3:
    def test_axis_aligned(self):
        u1, u2, u3 = gram_schmidt3(np.array([1.0, 0, 0]), np.array([0, 2.0, 0]))
        np.testing.assert_allclose(u1, [1, 0, 0], atol=1e-14)
        np.testing.assert_allclose(u2, [0, 1, 0], atol=1e-14)
        np.testing.assert_allclose(u3, [0, 0, 1], atol=1e-14)

    def test_hand_computed(self):
        # w2 - u1 (u1.w2) = (1,1,0) - (1,0,0) = (0,1,0)
        _, u2, _ = gram_schmidt3(np.array([2.0, 0, 0]), np.array([1.0, 1.0, 0]))
        np.testing.assert_allclose(u2, [0, 1, 0], atol=1e-14)

    def test_orthonormal_and_right_handed(self, rng):
        for _ in range(100):
            u1, u2, u3 = gram_schmidt3(rng.normal(size=3), rng.normal(size=3))
            triad = np.stack([u1, u2, u3])
            np.testing.assert_allclose(triad @ triad.T, np.eye(3), atol=1e-12)
            assert np.linalg.det(triad) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateInput):
            gram_schmidt3(np.array([1.0, 0, 0]), np.array([2.0, 0, 0]))
        with pytest.raises(DegenerateInput):
            gram_schmidt3(np.zeros(3), np.array([1.0, 0, 0]))
        with pytest.raises(DegenerateInput):
            gram_schmidt3(np.array([1.0, 0, 0]),
                          np.array([1.0, 1e-12, 0]))  # below relative threshold


class TestFramePD:
    def test_rest_frame_identity(self):
        np.testing.assert_allclose(frame_pd(*REST_TRIPLE), np.eye(4), atol=1e-14)

    def test_validity(self, rng):
        v0, v1, v2 = admissible_triples(rng, 500)
        frames = frame_pd(v0, v1, v2)
        assert frame_residual(frames) < 1e-10
        assert np.abs(np.linalg.det(frames) - 1.0).max() < 1e-10
        assert frames[:, 0, 0].min() >= 1.0 - 1e-12

    def test_equivariance(self, rng):
        v0, v1, v2 = admissible_triples(rng, 300)
        lam = lorentz_batch(rng, 300, beta_max=0.9)
        lhs = frame_pd(apply_lam(lam, v0), apply_lam(lam, v1), apply_lam(lam, v2))
        rhs = frame_pd(v0, v1, v2) @ mink.lorentz_inverse(lam)
        assert np.abs(lhs - rhs).max() < 1e-8

    def test_maps_v0_to_rest_direction(self, rng):
        v0, v1, v2 = admissible_triples(rng, 100)
        rest = np.einsum("bij,bj->bi", frame_pd(v0, v1, v2), v0)
        assert np.abs(rest[:, 1:]).max() < 1e-10 * np.abs(rest[:, 0]).max()

    def test_preconditions(self):
        spacelike = np.array([0.5, 2.0, 0, 0])
        with pytest.raises(DomainError):
            frame_pd(spacelike, *REST_TRIPLE[1:])
        with pytest.raises(DegenerateInput):
            frame_pd(REST_TRIPLE[0], REST_TRIPLE[1], 2.0 * REST_TRIPLE[1])


class TestFrameGS4:
    def test_rest_frame_identity(self):
        np.testing.assert_allclose(frame_gs4(*REST_TRIPLE), np.eye(4), atol=1e-14)

    def test_agrees_with_polar_decomposition(self, rng):
        v0, v1, v2 = admissible_triples(rng, 2000)
        diff = np.abs(frame_gs4(v0, v1, v2) - frame_pd(v0, v1, v2)).max()
        assert diff < 1e-6

    def test_equivariance(self, rng):
        v0, v1, v2 = admissible_triples(rng, 300)
        lam = lorentz_batch(rng, 300, beta_max=0.9)
        lhs = frame_gs4(apply_lam(lam, v0), apply_lam(lam, v1), apply_lam(lam, v2))
        rhs = frame_gs4(v0, v1, v2) @ mink.lorentz_inverse(lam)
        assert np.abs(lhs - rhs).max() < 1e-8

    def test_tetrad_completion_needs_no_renormalization(self, rng):
        # The antisymmetric completion of an orthonormal triple is already
        # normalized; the defensive renormalization must be a no-op.
        v0, v1, v2 = admissible_triples(rng, 200)
        frames = frame_gs4(v0, v1, v2)
        last_row = frames[:, 3, :] * np.array([1.0, -1.0, -1.0, -1.0])  # covector -> vector
        norm2 = mink.mink_product(last_row, last_row)
        assert np.abs(norm2 + 1.0).max() < 1e-10


class TestFrameSO3:
    def test_axis_aligned_identity(self):
        lam = frame_so3(np.array([0.3, 1.0, 0, 0]), np.array([0.2, 0, 2.0, 0]))
        np.testing.assert_allclose(lam, np.eye(4), atol=1e-14)

    def test_pure_rotation_structure(self, rng):
        for _ in range(50):
            lam = frame_so3(rng.normal(size=4), rng.normal(size=4))
            assert lam[0, 0] == 1.0
            assert np.array_equal(lam[0, 1:], np.zeros(3))
            assert np.array_equal(lam[1:, 0], np.zeros(3))
            assert frame_residual(lam) < 1e-12

    def test_rotation_equivariance(self, rng):
        for _ in range(50):
            v1, v2 = rng.normal(size=(2, 4))
            rot = mink.random_rotation(rng)
            lhs = frame_so3(rot @ v1, rot @ v2)
            rhs = frame_so3(v1, v2) @ mink.lorentz_inverse(rot)
            assert np.abs(lhs - rhs).max() < 1e-10


class TestLeviCivitaCompletion:
    # Frozen from the direct epsilon-contraction oracle: completing
    # (e_t, e_x, e_y) gives +e_z with the eps_0123 = +1 convention.
    def test_canonical_completion(self):
        basis = np.eye(4)
        u3 = levi_civita_u3(basis[0], basis[1], basis[2])
        np.testing.assert_allclose(u3, [0, 0, 0, 1.0], atol=1e-15)

    def test_antisymmetry(self, rng):
        a, b, c = rng.normal(size=(3, 4))
        np.testing.assert_allclose(levi_civita_u3(a, c, b), -levi_civita_u3(a, b, c),
                                   atol=1e-13)

    def test_boosted_completion_stays_orthonormal(self, rng):
        v0, v1, v2 = admissible_triples(rng, 100)
        frames = frame_gs4(v0, v1, v2)
        # rows are covectors u_a^T g with raised labels; recover the tetrad
        signs = np.array([1.0, -1.0, -1.0, -1.0])
        tetrad = (signs[:, None] * frames) * signs[None, :]
        u3 = levi_civita_u3(tetrad[:, 0], tetrad[:, 1], tetrad[:, 2])
        assert np.abs(mink.mink_product(u3, u3) + 1.0).max() < 1e-10
        for k in range(3):
            assert np.abs(mink.mink_product(u3, tetrad[:, k])).max() < 1e-10


def test_canonicalized_vector_invariance(rng):
    # L(Lam v) (Lam x) = L(v) x for x in the span of the inputs.
    v0, v1, v2 = admissible_triples(rng, 200)
    coeffs = rng.normal(size=(200, 3))
    x = coeffs[:, :1] * v0 + coeffs[:, 1:2] * v1 + coeffs[:, 2:] * v2
    lam = lorentz_batch(rng, 200, beta_max=0.9)
    local = np.einsum("bij,bj->bi", frame_pd(v0, v1, v2), x)
    local_t = np.einsum("bij,bj->bi", frame_pd(apply_lam(lam, v0), apply_lam(lam, v1),
                                               apply_lam(lam, v2)), apply_lam(lam, x))
    assert np.abs(local_t - local).max() < 1e-8
