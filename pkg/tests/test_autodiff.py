import numpy as np
import pytest

from conftest import admissible_triples, toy_batch
from lloca import minkowski as mink
from lloca.autodiff import (Adam, Parameter, Tape, adam_init, adam_step, backward,
                            load_checkpoint, ops, save_checkpoint, variable,
                            zero_grad)
from lloca.errors import GraphError, ShapeError
from lloca.frames import frame_pd
from lloca.gradcheck import finite_difference_check
from lloca.nn import MLP, LayerNorm, ParamStore


def test_softmax_uniform():
    out = ops.softmax(np.zeros(3))
    np.testing.assert_allclose(out, np.ones(3) / 3.0)


def test_square_derivative():
    with Tape() as tape:
        x = variable(3.0)
        y = ops.mul(x, x)
    backward(tape, y)
    assert x.grad == pytest.approx(6.0)


def test_forward_values_match_numpy(rng):
    x = rng.normal(size=(3, 4))
    node = variable(x)
    pairs = [
        (ops.exp, np.exp), (ops.gelu, None), (ops.relu, lambda a: np.maximum(a, 0)),
        (lambda a: ops.softmax(a, axis=-1), None),
    ]
    for op, ref in pairs:
        with Tape():
            got = ops.value_of(op(node))
        expected = ops.value_of(op(x)) if ref is None else ref(x)
        np.testing.assert_allclose(got, expected, atol=1e-13)


def test_mink_product_vjp_fd(rng):
    err = finite_difference_check(ops.mink_product,
                                  [rng.normal(size=(5, 4)), rng.normal(size=(5, 4))])
    assert err < 1e-7


def test_primitive_vjps_fd(rng):
    cases = [
        (lambda a, b: ops.matmul(a, b), [rng.normal(size=(3, 4)), rng.normal(size=(4, 2))]),
        (ops.sqrt, [np.abs(rng.normal(size=(3,))) + 0.5]),
        (lambda a: ops.softmax(a, axis=-2), [rng.normal(size=(3, 4))]),
        (ops.gelu, [rng.normal(size=(4,))]),
        (lambda a: ops.layernorm(a, np.ones(5), np.zeros(5)), [rng.normal(size=(2, 5))]),
        (lambda a, b: ops.cross_product(a, b), [rng.normal(size=(4, 3)), rng.normal(size=(4, 3))]),
        (lambda a, b, c: ops.eps_contract(a, b, c), [rng.normal(size=4)] * 3),
        (lambda a: ops.getitem(a, (slice(None), [True, False, True, False])),
         [rng.normal(size=(3, 4))]),
        (lambda a: ops.broadcast_to(a, (5, 3, 2)), [rng.normal(size=(3, 2))]),
        (lambda a, b: ops.concat([a, b], axis=-1), [rng.normal(size=(2, 3)), rng.normal(size=(2, 2))]),
        (lambda a, b: ops.stack([a, b], axis=1), [rng.normal(size=(2, 3)), rng.normal(size=(2, 3))]),
    ]
    for fn, args in cases:
        assert finite_difference_check(fn, args) < 1e-7


def test_graph_level_fd_mlp(rng):
    store = ParamStore(np.random.default_rng(1))
    mlp = MLP(store, "m", [4, 8, 2])
    x = rng.normal(size=(5, 4))

    def fn(*weights):
        h = ops.gelu(ops.add(ops.matmul(x, weights[0]), weights[1]))
        return ops.add(ops.matmul(h, weights[2]), weights[3])

    args = [mlp.layers[0].w.value, mlp.layers[0].b.value,
            mlp.layers[1].w.value, mlp.layers[1].b.value]
    assert finite_difference_check(fn, args) < 1e-6


def test_graph_level_fd_attention_block(rng):
    from lloca.lloca_model import mink_attention
    from lloca.tensor_rep import RepSpec
    spec = RepSpec.parse("2x0+1x1+1x2")  # 22-dim head with an order-2 block
    v0, v1, v2 = admissible_triples(rng, 4)
    frames = frame_pd(v0, v1, v2)

    def fn(q, k, v):
        return mink_attention(q, k, v, frames, spec, metric="minkowski")

    args = [rng.normal(size=(4, 1, spec.dimension)) for _ in range(3)]
    assert finite_difference_check(fn, args) < 1e-6


def test_graph_level_fd_frame_chain(rng):
    v0, v1, v2 = admissible_triples(rng, 3)
    assert finite_difference_check(frame_pd, [v0, v1, v2]) < 1e-6
    from lloca.frames import frame_gs4
    assert finite_difference_check(frame_gs4, [v0, v1, v2]) < 1e-6


def test_backward_requires_recorded_scalar_loss(rng):
    with Tape() as tape:
        x = variable(rng.normal(size=3))
        y = ops.mul(x, x)
    with pytest.raises(GraphError):
        backward(tape, y)  # not scalar
    stray = variable(1.0)  # created outside the tape
    with pytest.raises(GraphError):
        backward(tape, stray)


def test_backward_unused_parameter_gets_zero_gradient():
    p = Parameter(np.ones(3), "unused")
    q = Parameter(np.ones(3), "used")
    with Tape() as tape:
        tape.watch(p)
        loss = ops.sum(ops.mul(q, q))
    grads = backward(tape, loss)
    assert np.array_equal(grads["unused"], np.zeros(3))
    np.testing.assert_allclose(grads["used"], 2.0 * np.ones(3))


def test_matmul_shape_errors(rng):
    with pytest.raises(ShapeError):
        ops.matmul(rng.normal(size=(3, 4)), rng.normal(size=(3, 4)))
    with pytest.raises(ShapeError):
        ops.matmul(rng.normal(size=4), rng.normal(size=(4, 2)))


def test_gradients_flow_through_frame_construction(rng):
    # Perturbing frames-net parameters must move the loss: nonzero gradient.
    from lloca.frames_net import FramePolicy
    from lloca.lloca_model import LLoCaTransformer, ModelConfig
    cfg = ModelConfig(hidden_dim=32, num_heads=2, num_blocks=1, n_scalars=2,
                      frames_hidden=8)
    model = LLoCaTransformer(cfg, seed=0)
    ps = toy_batch(rng, 6)
    with Tape() as tape:
        loss = model.loss(ps, rng.normal(size=6), FramePolicy.parse("learned-pd"))
    grads = backward(tape, loss)
    norm = sum(float((g ** 2).sum()) for n, g in grads.items()
               if n.startswith("frames_net"))
    assert norm > 0.0


def test_adam_zero_gradient_keeps_params():
    params = {"w": np.array([1.0, -2.0])}
    state = adam_init(params)
    new_params, new_state = adam_step(params, {"w": np.zeros(2)}, state, lr=0.1)
    np.testing.assert_array_equal(new_params["w"], params["w"])
    assert new_state["t"] == 1


def test_adam_first_step_is_learning_rate():
    # With bias correction, m_hat = v_hat = 1 after one unit-gradient step.
    params = {"w": np.array([0.5])}
    state = adam_init(params)
    new_params, _ = adam_step(params, {"w": np.array([1.0])}, state, lr=0.1)
    assert new_params["w"][0] == pytest.approx(0.5 - 0.1, rel=1e-7)


def test_adam_default_betas():
    import inspect
    sig = inspect.signature(adam_step)
    assert sig.parameters["beta1"].default == 0.99
    assert sig.parameters["beta2"].default == 0.999


def test_training_determinism(rng):
    def short_run():
        store = ParamStore(np.random.default_rng(42))
        layer_norm = LayerNorm(store, "ln", 4)
        mlp = MLP(store, "mlp", [4, 8, 1])
        opt = Adam(store.params, lr=1e-2)
        data_rng = np.random.default_rng(7)
        for _ in range(5):
            x = data_rng.normal(size=(16, 4))
            y = data_rng.normal(size=(16, 1))
            with Tape() as tape:
                pred = mlp(layer_norm(x))
                diff = ops.sub(pred, y)
                loss = ops.mean(ops.mul(diff, diff))
            backward(tape, loss)
            opt.step()
            opt.zero_grad()
        return {k: p.value.copy() for k, p in store.params.items()}

    run1, run2 = short_run(), short_run()
    assert all(np.array_equal(run1[k], run2[k]) for k in run1)


def test_checkpoint_roundtrip(tmp_path, rng):
    params = {
        "layer.w": rng.normal(size=(4, 8)),
        "layer.b": rng.normal(size=8),
        "scalar": np.array(2.5),
    }
    path = tmp_path / "ckpt.bin"
    save_checkpoint(path, params)
    back = load_checkpoint(path)
    assert set(back) == set(params)
    for k in params:
        assert np.array_equal(back[k], params[k])


def test_checkpoint_bad_magic(tmp_path):
    from lloca.errors import FormatError
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_zero_grad():
    p = Parameter(np.ones(2), "p")
    p.grad = np.ones(2)
    zero_grad({"p": p})
    assert p.grad is None
