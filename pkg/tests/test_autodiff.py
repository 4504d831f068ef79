import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smner import autodiff as ad


def test_relu_values():
    out = ad.relu(ad.constant([-1.0, 0.0, 2.0]))
    assert np.array_equal(out.value, [0.0, 0.0, 2.0])


def test_row_softmax_uniform_on_zeros():
    out = ad.row_softmax(ad.constant(np.zeros((2, 5))))
    assert np.allclose(out.value, 0.2)


@given(st.integers(1, 6), st.integers(1, 6))
@settings(max_examples=20, deadline=None)
def test_row_softmax_rows_sum_to_one(rows, cols):
    rng = np.random.default_rng(rows * 7 + cols)
    out = ad.row_softmax(ad.constant(rng.normal(size=(rows, cols)) * 10))
    assert np.abs(out.value.sum(axis=-1) - 1.0).max() < 1e-12


def test_dropout_eval_mode_is_identity():
    x = np.arange(6.0).reshape(2, 3)
    out = ad.dropout(ad.constant(x), 0.5, train=False, rng=None)
    assert np.array_equal(out.value, x)


def test_dropout_train_reproducible_and_inverted():
    x = np.ones(1000)
    a = ad.dropout(ad.constant(x), 0.5, train=True, rng=np.random.default_rng(3))
    b = ad.dropout(ad.constant(x), 0.5, train=True, rng=np.random.default_rng(3))
    assert np.array_equal(a.value, b.value)
    kept = a.value[a.value > 0]
    assert np.allclose(kept, 2.0)  # scaled by 1/(1-p)


def test_dropout_rejects_bad_rate():
    with pytest.raises(ValueError):
        ad.dropout(ad.constant(np.ones(3)), 1.0, train=True, rng=np.random.default_rng(0))


def test_matmul_shape_mismatch_names_shapes():
    a = ad.constant(np.zeros((2, 3)))
    b = ad.constant(np.zeros((4, 5)))
    with pytest.raises(ad.DimensionError, match=r"\(2, 3\).*\(4, 5\)"):
        ad.matmul(a, b)


def test_backward_outer_product_structure():
    rng = np.random.default_rng(0)
    w = ad.Parameter("W", rng.normal(size=(3, 4)))
    x = rng.normal(size=(4, 2))
    loss = ad.sum_all(ad.matmul(w, ad.constant(x)))
    ad.backward(loss)
    # d/dW sum(Wx) = ones @ x^T, i.e. each row of grad is the row-sum pattern of x
    assert np.allclose(w.grad, np.ones((3, 2)) @ x.T)


def test_unused_parameter_grad_stays_zero():
    used = ad.Parameter("used", np.ones(3))
    unused = ad.Parameter("unused", np.ones(3))
    ad.backward(ad.sum_all(ad.mul(used, used)))
    assert np.array_equal(unused.grad, np.zeros(3))
    assert np.allclose(used.grad, 2.0)


def test_loss_scaling_scales_grads():
    w = ad.Parameter("w", np.array([1.0, -2.0, 0.5]))
    ad.backward(ad.sum_all(ad.mul(w, w)))
    g1 = w.grad.copy()
    w.zero_grad()
    ad.backward(ad.scale(ad.sum_all(ad.mul(w, w)), 3.5))
    assert np.allclose(w.grad, 3.5 * g1)


def test_grad_accumulates_across_shared_use():
    w = ad.Parameter("w", np.array([2.0]))
    loss = ad.add(ad.sum_all(w), ad.sum_all(w))
    ad.backward(loss)
    assert np.allclose(w.grad, 2.0)


def test_backward_requires_scalar():
    w = ad.Parameter("w", np.ones(3))
    with pytest.raises(ValueError):
        ad.backward(ad.mul(w, w))


def test_finite_difference_quadratic_closed_form():
    theta = ad.Parameter("theta", np.array([1.0, -2.0, 0.3]))

    def loss():
        return ad.scale(ad.sum_all(ad.mul(theta, theta)), 0.5)

    err = ad.finite_difference_check(loss, [theta])
    assert err < 1e-9
    assert np.allclose(theta.grad, theta.value)


def test_finite_difference_constant_loss_zero_error():
    theta = ad.Parameter("theta", np.zeros(2))

    def loss():
        return ad.add(ad.sum_all(ad.mul(theta, ad.constant(np.zeros(2)))), ad.constant(1.0))

    assert ad.finite_difference_check(loss, [theta]) == 0.0


@pytest.mark.parametrize("op,tol", [
    (lambda x: ad.sum_all(ad.sigmoid(x)), 1e-6),
    (lambda x: ad.sum_all(ad.tanh(x)), 1e-6),
    (lambda x: ad.sum_all(ad.mul(ad.relu(x), ad.relu(x))), 1e-6),
    (lambda x: ad.sum_all(ad.mul(ad.row_softmax(x), x)), 1e-6),
    (lambda x: ad.sum_all(ad.slice_cols(x, 1, 3)), 1e-6),
    (lambda x: ad.sum_all(ad.mul(ad.concat([x, x], axis=1), ad.concat([x, x], axis=1))), 1e-6),
])
def test_op_gradients_pass_fd(op, tol):
    rng = np.random.default_rng(5)
    x = ad.Parameter("x", rng.normal(size=(3, 4)) + 0.1)
    assert ad.finite_difference_check(lambda: op(x), [x]) < tol


def test_deep_graph_does_not_overflow_recursion():
    x = ad.Parameter("x", np.array([0.5]))
    node = x
    for _ in range(5000):
        node = ad.add(node, ad.constant(np.array([0.0])))
    ad.backward(ad.sum_all(node))
    assert np.allclose(x.grad, 1.0)


def test_checkpoint_round_trip(tmp_path):
    tensors = {
        "a.W": np.arange(6.0).reshape(2, 3),
        "b": np.array(3.25),
        "c.v": np.linspace(-1, 1, 7),
    }
    path = tmp_path / "model.ckpt"
    ad.save_checkpoint(tensors, path)
    loaded = ad.load_checkpoint(path)
    assert set(loaded) == set(tensors)
    for name in tensors:
        assert np.array_equal(loaded[name], tensors[name])


def test_checkpoint_bytes_deterministic(tmp_path):
    tensors = {"x": np.linspace(0, 1, 11)}
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    ad.save_checkpoint(tensors, p1)
    ad.save_checkpoint(tensors, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(ValueError):
        ad.load_checkpoint(path)
