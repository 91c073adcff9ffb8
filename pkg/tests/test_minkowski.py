import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import apply_lam, lorentz_batch, timelike_vectors
from lloca import minkowski as mink
from lloca.errors import DomainError

G = mink.METRIC


def test_mink_product_examples():
    e_t = np.array([1.0, 0, 0, 0])
    assert mink.mink_product(e_t, e_t) == 1.0
    null = np.array([1.0, 1.0, 0, 0])
    assert mink.mink_product(null, null) == 0.0
    # term-by-term: 2*3 - 1*0 - 0*1 - 0*0
    x = np.array([2.0, 1.0, 0, 0])
    y = np.array([3.0, 0, 1.0, 0])
    assert mink.mink_product(x, y) == 6.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=8, max_size=8))
def test_mink_product_symmetric_bilinear(values):
    x = np.array(values[:4])
    y = np.array(values[4:])
    assert mink.mink_product(x, y) == pytest.approx(mink.mink_product(y, x))
    assert mink.mink_product(2.0 * x, y) == pytest.approx(2.0 * mink.mink_product(x, y))


def test_mink_norm_examples():
    assert mink.mink_norm(np.array([1.0, 0, 0, 0])) == 1.0
    assert mink.mink_norm(np.array([3.0, 0, 0, 5.0])) == pytest.approx(4.0)  # sqrt|9-25|
    assert mink.mink_norm(np.array([1.0, 1.0, 0, 0])) == 0.0


def test_boost_identity_at_rest():
    np.testing.assert_allclose(mink.boost_from_vector(np.array([1.0, 0, 0, 0])),
                               np.eye(4), atol=1e-15)


def test_boost_closed_form():
    p = np.array([5.0, 3.0, 0, 0])
    b = mink.boost_from_vector(p)
    gamma, beta = 1.25, 0.6
    assert b[0, 0] == pytest.approx(gamma)
    assert b[0, 1] == pytest.approx(-gamma * beta)
    np.testing.assert_allclose(b @ p, [4.0, 0, 0, 0], atol=1e-12)


def test_boost_rest_frame_property(rng):
    p = timelike_vectors(rng, (200,))
    rest = np.einsum("bij,bj->bi", mink.boost_from_vector(p), p)
    norms = np.linalg.norm(p, axis=-1)
    assert np.all(np.abs(rest[:, 1:]) < 1e-12 * norms[:, None] + 1e-12)
    np.testing.assert_allclose(rest[:, 0], np.sqrt(mink.mink_product(p, p)), rtol=1e-12)


def test_boost_preconditions():
    with pytest.raises(DomainError):
        mink.boost_from_vector(np.array([1.0, 2.0, 0, 0]))  # spacelike
    with pytest.raises(DomainError):
        mink.boost_from_vector(np.array([-2.0, 1.0, 0, 0]))  # past-directed


def test_is_lorentz():
    assert mink.is_lorentz(np.eye(4), 1e-12)
    assert not mink.is_lorentz(np.diag([1.0, 1.0, 1.0, 2.0]), 1e-12)
    assert mink.is_lorentz(mink.boost_from_vector(np.array([5.0, 3.0, 0, 0])), 1e-12)


def test_lorentz_inverse():
    assert np.array_equal(mink.lorentz_inverse(np.eye(4)), np.eye(4))
    rot = mink.random_rotation(np.random.default_rng(1))
    np.testing.assert_allclose(mink.lorentz_inverse(rot), rot.T, atol=1e-15)
    beta = np.array([0.3, -0.2, 0.5])
    np.testing.assert_allclose(mink.lorentz_inverse(mink.boost_from_velocity(beta)),
                               mink.boost_from_velocity(-beta), atol=1e-14)


def test_lorentz_inverse_involution_and_product(rng):
    lams = lorentz_batch(rng, 100, beta_max=0.9)
    inv = mink.lorentz_inverse(lams)
    assert np.abs(mink.lorentz_inverse(inv) - lams).max() < 1e-12
    assert np.abs(inv @ lams - np.eye(4)).max() < 1e-12


def test_random_rotation_properties():
    rng = np.random.default_rng(7)
    for _ in range(20):
        rot = mink.random_rotation(rng)
        assert mink.is_lorentz(rot, 1e-12)
        assert np.array_equal(rot[0], [1.0, 0, 0, 0])
        assert np.array_equal(rot[:, 0], [1.0, 0, 0, 0])
        assert np.linalg.det(rot) == pytest.approx(1.0, abs=1e-12)


def test_random_rotation_uniformity():
    # Entrywise mean of the spatial block vanishes for Haar-uniform rotations;
    # Var(R_ij) = 1/3, so bound by five standard errors of the mean.
    rng = np.random.default_rng(123)
    n = 100_000
    total = np.zeros((3, 3))
    for _ in range(n):
        total += mink.random_rotation(rng)[1:, 1:]
    bound = 5.0 * np.sqrt(1.0 / 3.0) / np.sqrt(n)
    assert np.abs(total / n).max() < bound


def test_random_boost_defaults_truncated():
    rng = np.random.default_rng(5)
    for _ in range(300):
        b = mink.random_boost(rng)
        assert mink.is_lorentz(b, 1e-12)
        beta = -b[0, 1:] / b[0, 0]
        assert np.all(np.abs(beta) <= 0.3 + 1e-12)  # 3 sigma * 0.1


def test_random_boost_zero_sigma_is_identity():
    assert np.array_equal(mink.random_boost(np.random.default_rng(0), sigma=0.0),
                          np.eye(4))


def test_random_lorentz_proper_orthochronous(rng):
    for _ in range(100):
        lam = mink.random_lorentz(rng)
        assert mink.is_lorentz(lam, 1e-12)
        assert np.linalg.det(lam) == pytest.approx(1.0, abs=1e-12)
        assert lam[0, 0] >= 1.0 - 1e-12


def test_product_invariance_under_sampled_transformations(rng):
    x = rng.normal(size=(200, 4))
    y = rng.normal(size=(200, 4))
    lam = lorentz_batch(rng, 200, beta_max=0.9)
    before = mink.mink_product(x, y)
    after = mink.mink_product(apply_lam(lam, x), apply_lam(lam, y))
    assert np.all(np.abs(after - before) < 1e-10 * (1.0 + np.abs(before)))
