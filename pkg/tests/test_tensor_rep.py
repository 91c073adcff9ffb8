import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import lorentz_batch
from lloca import minkowski as mink
from lloca.errors import DimensionError
from lloca.tensor_rep import RepSpec, TensorFeature, apply_rep, rep_matrix, rep_metric


def order2_oracle(lam, tensor_flat):
    """Explicit double loop over the index contraction."""
    t = tensor_flat.reshape(4, 4)
    out = np.zeros((4, 4))
    for m1 in range(4):
        for m2 in range(4):
            for n1 in range(4):
                for n2 in range(4):
                    out[m1, m2] += lam[m1, n1] * lam[m2, n2] * t[n1, n2]
    return out.reshape(-1)


def test_repspec_parse_roundtrip():
    spec = RepSpec.parse("8x0+2x1")
    assert spec.blocks == ((0, 8), (1, 2))
    assert spec.dimension == 16
    assert str(spec) == "8x0+2x1"
    assert RepSpec.parse("1x2").dimension == 16
    with pytest.raises(DimensionError):
        RepSpec.parse("nonsense")
    with pytest.raises(DimensionError):
        RepSpec(((0, 0),))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(1, 5)), min_size=1, max_size=4))
def test_repspec_encoding_is_canonical(blocks):
    spec = RepSpec(tuple(blocks))
    assert RepSpec.parse(str(spec)) == spec


def test_rep_matrix_scalars_and_vector(rng):
    lam = mink.random_lorentz(rng, beta_max=0.7)
    np.testing.assert_array_equal(rep_matrix(lam, RepSpec.parse("3x0")), np.eye(3))
    np.testing.assert_array_equal(rep_matrix(lam, RepSpec.parse("1x1")), lam)


def test_rep_matrix_order2_against_oracle():
    lam = mink.boost_from_velocity(np.array([0.6, 0.0, 0.0]))
    spec = RepSpec.parse("1x2")
    dense = rep_matrix(lam, spec)
    rng = np.random.default_rng(3)
    for _ in range(5):
        f = rng.normal(size=16)
        np.testing.assert_allclose(dense @ f, order2_oracle(lam, f), atol=1e-13)
    np.testing.assert_allclose(dense, np.kron(lam, lam), atol=0)


def test_rep_matrix_rejects_unsupported_order(rng):
    lam = mink.random_lorentz(rng)
    with pytest.raises(DimensionError):
        rep_matrix(lam, RepSpec.parse("1x3"))
    assert rep_matrix(lam, RepSpec.parse("1x3"), max_order=3).shape == (64, 64)


def test_apply_rep_identity_and_scalars(rng):
    spec = RepSpec.parse("2x0+1x1+1x2")
    f = rng.normal(size=(5, spec.dimension))
    assert np.array_equal(apply_rep(np.eye(4), f, spec), f)
    lam = mink.random_lorentz(rng, beta_max=0.8)
    scalar_spec = RepSpec.parse("6x0")
    g = rng.normal(size=(3, 6))
    assert apply_rep(lam, g, scalar_spec) is g


def test_apply_rep_matches_dense_path(rng):
    spec = RepSpec.parse("8x0+2x1")
    lam = mink.random_lorentz(rng, beta_max=0.8)
    f = rng.normal(size=(7, spec.dimension))
    np.testing.assert_allclose(apply_rep(lam, f, spec), f @ rep_matrix(lam, spec).T,
                               atol=1e-13)


def test_apply_rep_order2_matches_dense(rng):
    spec = RepSpec.parse("1x0+1x2")
    lam = mink.random_lorentz(rng, beta_max=0.8)
    f = rng.normal(size=spec.dimension)
    np.testing.assert_allclose(apply_rep(lam, f, spec), rep_matrix(lam, spec) @ f,
                               atol=1e-12)


def test_apply_rep_batched_frames(rng):
    spec = RepSpec.parse("2x0+1x1")
    lams = lorentz_batch(rng, 6, beta_max=0.6).reshape(2, 3, 4, 4)
    f = rng.normal(size=(2, 3, spec.dimension))
    out = apply_rep(lams, f, spec)
    for b in range(2):
        for n in range(3):
            np.testing.assert_allclose(out[b, n], rep_matrix(lams[b, n], spec) @ f[b, n],
                                       atol=1e-13)


def test_apply_rep_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        apply_rep(np.eye(4), rng.normal(size=(3, 5)), RepSpec.parse("1x1"))
    with pytest.raises(DimensionError):
        TensorFeature(rng.normal(size=3), RepSpec.parse("1x1"))


def test_rep_metric_examples():
    np.testing.assert_array_equal(rep_metric(RepSpec.parse("4x0")), np.eye(4))
    np.testing.assert_array_equal(rep_metric(RepSpec.parse("1x1")), mink.METRIC)
    np.testing.assert_array_equal(rep_metric(RepSpec.parse("1x2")),
                                  np.kron(mink.METRIC, mink.METRIC))


def test_rep_metric_squares_to_identity():
    for text in ["3x0", "2x1", "8x0+2x1", "1x0+1x1+1x2"]:
        g = rep_metric(RepSpec.parse(text))
        np.testing.assert_array_equal(g @ g, np.eye(g.shape[0]))


def test_representation_property(rng):
    specs = [RepSpec.parse(s) for s in ["3x0", "1x1", "1x2", "2x0+2x1+1x2"]]
    for _ in range(50):
        lam1 = mink.random_lorentz(rng, beta_max=0.8)
        lam2 = mink.random_lorentz(rng, beta_max=0.8)
        for spec in specs:
            lhs = rep_matrix(lam1 @ lam2, spec)
            rhs = rep_matrix(lam1, spec) @ rep_matrix(lam2, spec)
            assert np.abs(lhs - rhs).max() < 1e-10


def test_inverse_roundtrip(rng):
    spec = RepSpec.parse("2x0+2x1+1x2")
    for _ in range(30):
        lam = mink.random_lorentz(rng, beta_max=0.9)
        f = rng.normal(size=spec.dimension)
        back = apply_rep(mink.lorentz_inverse(lam), apply_rep(lam, f, spec), spec)
        assert np.abs(back - f).max() < 1e-11


def test_metric_invariance(rng):
    spec = RepSpec.parse("8x0+2x1")
    g = rep_metric(spec)
    for _ in range(50):
        lam = mink.random_lorentz(rng, beta_max=0.9)
        x = rng.normal(size=spec.dimension)
        y = rng.normal(size=spec.dimension)
        before = x @ g @ y
        after = apply_rep(lam, x, spec) @ g @ apply_rep(lam, y, spec)
        assert abs(after - before) < 1e-9 * (1.0 + abs(before))


def test_tensor_feature_transform(rng):
    spec = RepSpec.parse("1x1")
    lam = mink.random_lorentz(rng, beta_max=0.5)
    feature = TensorFeature(rng.normal(size=4), spec)
    np.testing.assert_allclose(feature.transform(lam).values, lam @ feature.values)
