import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphcl_dta import autodiff as ad
from graphcl_dta.autodiff import ShapeError, Tensor, backward, finite_diff_check


def param(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def fd_ok(build, params, tol=1e-4):
    rep = finite_diff_check(build, params, h=1e-6, tol=tol)
    assert rep.passed, rep
    return rep


# --- worked examples -------------------------------------------------------

def test_matmul_identity(rng):
    m = rng.standard_normal((3, 3))
    np.testing.assert_array_equal(ad.matmul(Tensor(np.eye(3)), Tensor(m)).data, m)


def test_relu_forward_backward():
    x = Tensor([-1.0, 0.0, 2.0], requires_grad=True)
    y = ad.relu(x)
    np.testing.assert_array_equal(y.data, [0, 0, 2])
    backward(ad.tsum(y))
    np.testing.assert_array_equal(x.grad, [0, 0, 1])


def test_conv1d_hand_example():
    y = ad.conv1d(Tensor([1.0, 2.0, 3.0, 4.0]), Tensor([1.0, 1.0]))
    np.testing.assert_array_equal(y.data, [3, 5, 7])


def test_sum_of_squares_grad():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    loss = ad.tsum(ad.mul(x, x))
    backward(loss)
    np.testing.assert_array_equal(x.grad, [2, 4, 6])
    assert loss.grad == 1.0


def test_mean_grad():
    x = Tensor(np.arange(4.0), requires_grad=True)
    backward(ad.mean(x))
    np.testing.assert_array_equal(x.grad, [0.25] * 4)


def test_non_scalar_backward_rejected():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ShapeError):
        backward(ad.mul(x, 2.0))


def test_graph_is_single_use():
    x = Tensor([1.0, 2.0], requires_grad=True)
    loss = ad.tsum(x)
    backward(loss)
    with pytest.raises(RuntimeError):
        backward(loss)


def test_shape_mismatch_names_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4, 5\)"):
        ad.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))


def test_log_of_zero_rejected():
    with pytest.raises(ValueError):
        ad.log(Tensor([1.0, 0.0]))


def test_row_norm_zero_has_zero_subgradient():
    x = Tensor(np.zeros((2, 3)), requires_grad=True)
    backward(ad.tsum(ad.row_norm(x)))
    np.testing.assert_array_equal(x.grad, 0.0)


def test_max_ties_route_to_lowest_index():
    x = Tensor([[1.0, 5.0], [3.0, 5.0], [3.0, 0.0]], requires_grad=True)
    y = ad.tmax(x, axis=0)
    np.testing.assert_array_equal(y.data, [3, 5])
    backward(ad.tsum(y))
    np.testing.assert_array_equal(x.grad, [[0, 1], [1, 0], [0, 0]])


def test_embedding_padding_row_gets_no_grad(rng):
    table = param(rng, 5, 3)
    out = ad.embedding(table, np.array([[0, 2, 2, 0]]), padding_idx=0)
    backward(ad.tsum(out))
    np.testing.assert_array_equal(table.grad[0], 0.0)
    np.testing.assert_array_equal(table.grad[2], 2.0)


def test_no_grad_records_nothing(rng):
    x = param(rng, 3)
    with ad.no_grad():
        y = ad.mul(x, x)
    assert not y.requires_grad and y._parents == ()


def test_quadratic_fd_is_near_exact(rng):
    x = param(rng, 4, 3)
    rep = finite_diff_check(lambda: ad.tsum(ad.mul(x, x)), [x])
    assert rep.max_rel_err < 1e-9


# --- gradient correctness per op family -------------------------------------

dims = st.integers(1, 8)


@settings(max_examples=15, deadline=None)
@given(n=dims, m=dims, k=dims, seed=st.integers(0, 2**16))
def test_matmul_add_grad(n, m, k, seed):
    rng = np.random.default_rng(seed)
    a, b, c = param(rng, n, m), param(rng, m, k), param(rng, k)
    w = rng.standard_normal((n, k))
    fd_ok(lambda: ad.tsum(ad.mul(ad.add(ad.matmul(a, b), c), w)), [a, b, c])


@settings(max_examples=15, deadline=None)
@given(n=dims, m=dims, seed=st.integers(0, 2**16))
def test_elementwise_grads(n, m, seed):
    rng = np.random.default_rng(seed)
    a, b = param(rng, n, m), param(rng, n, m)
    pos = Tensor(rng.uniform(0.5, 2.0, (n, m)), requires_grad=True)

    def build():
        x = ad.sub(ad.mul(a, b), ad.scale(a, 0.3))
        x = ad.add(x, ad.div(b, pos))
        x = ad.add(x, ad.exp(ad.mul(a, 0.2)))
        x = ad.add(x, ad.log(pos))
        return ad.mean(ad.mul(x, x))

    fd_ok(build, [a, b, pos])


@settings(max_examples=15, deadline=None)
@given(n=dims, m=dims, seed=st.integers(0, 2**16))
def test_reductions_grads(n, m, seed):
    rng = np.random.default_rng(seed)
    x = param(rng, n, m)
    w0, w1 = rng.standard_normal(m), rng.standard_normal(n)

    def build():
        a = ad.tsum(ad.mul(ad.tmax(x, axis=0), w0))
        b = ad.tsum(ad.mul(ad.logsumexp(x, axis=1), w1))
        c = ad.tsum(ad.mul(ad.row_norm(x), w1))
        d = ad.mean(ad.tsum(x, axis=1))
        return ad.add(ad.add(a, b), ad.add(c, d))

    fd_ok(build, [x])


@settings(max_examples=15, deadline=None)
@given(n=dims, m=dims, seed=st.integers(0, 2**16))
def test_shape_ops_grads(n, m, seed):
    rng = np.random.default_rng(seed)
    x, y = param(rng, n, m), param(rng, n, 2)
    w = rng.standard_normal((m + 2, n))

    def build():
        z = ad.concat([x, y], axis=1)
        z = ad.relu(ad.add(ad.transpose(z), 0.1))
        return ad.tsum(ad.mul(ad.reshape(z, (m + 2, n)), w))

    fd_ok(build, [x, y])


@settings(max_examples=10, deadline=None)
@given(length=st.integers(6, 12), k=st.integers(1, 5), cin=st.integers(1, 4), cout=st.integers(1, 4),
       seed=st.integers(0, 2**16))
def test_conv1d_embedding_grads(length, k, cin, cout, seed):
    rng = np.random.default_rng(seed)
    table = param(rng, 6, cin)
    w, b = param(rng, k, cin, cout), param(rng, cout)
    idx = rng.integers(1, 6, size=(2, length))
    wout = rng.standard_normal((2, length - k + 1, cout))

    def build():
        x = ad.embedding(table, idx, padding_idx=0)
        return ad.tsum(ad.mul(ad.conv1d(x, w, b), wout))

    fd_ok(build, [table, w, b])


def test_conv1d_matches_direct_sliding_window(rng):
    x = rng.standard_normal((9, 3))
    w = rng.standard_normal((4, 3, 2))
    b = rng.standard_normal(2)
    ref = np.array([[np.sum(x[i:i + 4] * w[:, :, o]) + b[o] for o in range(2)] for i in range(6)])
    np.testing.assert_allclose(ad.conv1d(Tensor(x), Tensor(w), Tensor(b)).data, ref, rtol=1e-12)


def test_linearity_of_backward(rng):
    x = param(rng, 5)
    a, b = 1.7, -0.4

    def grad(build):
        x.grad = None
        backward(build())
        return x.grad.copy()

    f = lambda: ad.tsum(ad.exp(x))
    g = lambda: ad.tsum(ad.mul(x, x))
    combo = grad(lambda: ad.add(ad.mul(f(), a), ad.mul(g(), b)))
    np.testing.assert_allclose(combo, a * grad(f) + b * grad(g), rtol=1e-12)


def test_deterministic_forward_and_grad():
    def run():
        rng = np.random.default_rng(3)
        a, b = param(rng, 4, 4), param(rng, 4, 4)
        loss = ad.logsumexp(ad.reshape(ad.matmul(a, b), (-1,)), axis=0)
        backward(loss)
        return loss.data.copy(), a.grad.copy(), b.grad.copy()

    for u, v in zip(run(), run()):
        assert np.array_equal(u, v)
