"""Tensor core: forward semantics against brute-force oracles, gradient
correctness against central finite differences."""

import numpy as np
import pytest

from hyperrestore.tensor import (
    ContractViolation,
    Tensor,
    conv2d,
    l1_loss,
    matmul,
    no_grad,
    pixel_unshuffle,
    pixelshuffle,
    relu,
    reshape,
    tmean,
    tsum,
)

from oracles import central_difference, conv2d_loops, l1_scalar_loop

F64 = np.float64


def rand(rng, *shape, lo=-1.0, hi=1.0):
    return rng.uniform(lo, hi, size=shape)


# -- conv2d ------------------------------------------------------------------


def test_conv_identity_kernel():
    x = Tensor(np.random.default_rng(0).random((1, 3, 3)))
    k = Tensor(np.ones((1, 1, 1, 1)))
    out = conv2d(x, k)
    np.testing.assert_array_equal(out.data, x.data)


def test_conv_stride2_pad1_output_shape():
    x = Tensor(np.zeros((1, 4, 4)))
    k = Tensor(np.random.default_rng(1).random((1, 1, 3, 3)))
    assert conv2d(x, k, stride=2, padding=1).shape == (1, 2, 2)


def test_conv_matches_loop_oracle_single():
    rng = np.random.default_rng(7)
    x = rand(rng, 2, 5, 5)
    k = rand(rng, 3, 2, 3, 3)
    out = conv2d(Tensor(x, dtype=F64), Tensor(k, dtype=F64))
    np.testing.assert_allclose(out.data, conv2d_loops(x, k), atol=1e-6)


@pytest.mark.parametrize("case", range(100))
def test_conv_oracle_equivalence_sampled(case):
    rng = np.random.default_rng(1000 + case)
    cin = int(rng.integers(1, 4))
    cout = int(rng.integers(1, 5))
    k = int(rng.choice([1, 3]))
    stride = int(rng.choice([1, 2]))
    padding = int(rng.choice([0, 1]))
    h = int(rng.integers(max(k - 2 * padding, 1), 9))
    w = int(rng.integers(max(k - 2 * padding, 1), 9))
    if h + 2 * padding < k or w + 2 * padding < k:
        h, w = k, k
    x = rand(rng, cin, h, w)
    kern = rand(rng, cout, cin, k, k)
    bias = rand(rng, cout)
    out = conv2d(Tensor(x, dtype=F64), Tensor(kern, dtype=F64),
                 Tensor(bias, dtype=F64), stride=stride, padding=padding)
    expected = conv2d_loops(x, kern, bias, stride=stride, padding=padding)
    np.testing.assert_allclose(out.data, expected, atol=1e-6)


def test_conv_batched_equals_per_image():
    rng = np.random.default_rng(3)
    xs = rand(rng, 4, 2, 6, 6)
    k = rand(rng, 3, 2, 3, 3)
    batched = conv2d(Tensor(xs, dtype=F64), Tensor(k, dtype=F64), padding=1)
    for i in range(4):
        single = conv2d(Tensor(xs[i], dtype=F64), Tensor(k, dtype=F64), padding=1)
        np.testing.assert_allclose(batched.data[i], single.data, atol=1e-12)


def test_conv_channel_mismatch_names_both_shapes():
    x = Tensor(np.zeros((2, 4, 4)))
    k = Tensor(np.zeros((1, 3, 3, 3)))
    with pytest.raises(ContractViolation) as err:
        conv2d(x, k)
    assert "(2, 4, 4)" in str(err.value) and "(1, 3, 3, 3)" in str(err.value)


def test_conv_even_kernel_rejected():
    with pytest.raises(ContractViolation):
        conv2d(Tensor(np.zeros((1, 4, 4))), Tensor(np.zeros((1, 1, 2, 2))))


def test_conv_too_small_input_rejected():
    with pytest.raises(ContractViolation):
        conv2d(Tensor(np.zeros((1, 2, 2))), Tensor(np.zeros((1, 1, 3, 3))))


# -- pixelshuffle -------------------------------------------------------------


def test_pixelshuffle_r1_identity():
    x = Tensor(np.random.default_rng(0).random((3, 4, 4)))
    np.testing.assert_array_equal(pixelshuffle(x, 1).data, x.data)


def test_pixelshuffle_2x2_layout():
    x = Tensor(np.array([1.0, 2.0, 3.0, 4.0]).reshape(4, 1, 1))
    out = pixelshuffle(x, 2)
    np.testing.assert_array_equal(out.data, [[[1.0, 2.0], [3.0, 4.0]]])


def test_pixelshuffle_index_formula():
    rng = np.random.default_rng(5)
    r, c, h, w = 2, 2, 3, 3
    x = rng.random((c * r * r, h, w)).astype(np.float32)
    out = pixelshuffle(Tensor(x), r).data
    for ch in range(c):
        for yy in range(h):
            for xx in range(w):
                for dy in range(r):
                    for dx in range(r):
                        assert out[ch, r * yy + dy, r * xx + dx] == \
                            x[ch * r * r + dy * r + dx, yy, xx]


@pytest.mark.parametrize("r", [1, 2, 3])
def test_pixelshuffle_roundtrip(r):
    rng = np.random.default_rng(10 + r)
    x = Tensor(rng.random((2 * r * r, 3, 3)))
    back = pixel_unshuffle(pixelshuffle(x, r), r)
    np.testing.assert_array_equal(back.data, x.data)


def test_pixelshuffle_preserves_value_multiset():
    rng = np.random.default_rng(6)
    x = Tensor(rng.random((8, 3, 3)))
    out = pixelshuffle(x, 2)
    np.testing.assert_array_equal(np.sort(out.data.ravel()),
                                  np.sort(x.data.ravel()))


def test_pixelshuffle_bad_channels():
    with pytest.raises(ContractViolation):
        pixelshuffle(Tensor(np.zeros((3, 2, 2))), 2)


# -- relu ----------------------------------------------------------------------


def test_relu_values():
    out = relu(Tensor(np.array([-1.0, 0.0, 2.0])))
    np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])


def test_relu_all_negative_zero_gradient():
    x = Tensor(-np.ones((3, 3)), requires_grad=True)
    loss = tsum(relu(x))
    loss.backward()
    np.testing.assert_array_equal(x.grad, np.zeros((3, 3)))


def test_relu_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    x = rand(rng, 4, 4, lo=0.1, hi=1.0)  # positive: away from the kink

    def f():
        return tsum(relu(Tensor(x, dtype=F64) * 1.5)).item()

    xt = Tensor(x, requires_grad=True, dtype=F64)
    loss = tsum(relu(xt * 1.5))
    loss.backward()
    numeric = central_difference(f, x)
    np.testing.assert_allclose(xt.grad, numeric, rtol=1e-4)


# -- l1_loss -------------------------------------------------------------------


def test_l1_identical_is_zero():
    x = Tensor(np.random.default_rng(0).random((3, 5)))
    assert l1_loss(x, x).item() == 0.0


def test_l1_constant_offset():
    rng = np.random.default_rng(1)
    t = rand(rng, 2, 4, lo=0.0, hi=0.4)
    p = t + 0.5
    loss = l1_loss(Tensor(p, dtype=F64), Tensor(t, dtype=F64))
    assert loss.item() == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("case", range(100))
def test_l1_matches_scalar_loop(case):
    rng = np.random.default_rng(2000 + case)
    shape = tuple(rng.integers(1, 6, size=int(rng.integers(1, 4))))
    a, b = rand(rng, *shape), rand(rng, *shape)
    loss = l1_loss(Tensor(a, dtype=F64), Tensor(b, dtype=F64))
    assert loss.item() == pytest.approx(l1_scalar_loop(a, b), abs=1e-7)


def test_l1_shape_mismatch():
    with pytest.raises(ContractViolation):
        l1_loss(Tensor(np.zeros((2, 2))), Tensor(np.zeros((2, 3))))


# -- backward ------------------------------------------------------------------


def test_backward_of_sum_is_ones():
    x = Tensor(np.random.default_rng(0).random((3, 4)), requires_grad=True)
    tsum(x).backward()
    np.testing.assert_array_equal(x.grad, np.ones((3, 4)))


def test_backward_conv_l1_matches_finite_differences():
    rng = np.random.default_rng(11)
    x = rand(rng, 1, 4, 4)
    k = rand(rng, 1, 1, 3, 3)
    t = rand(rng, 1, 4, 4)

    kt = Tensor(k, requires_grad=True, dtype=F64)
    loss = l1_loss(conv2d(Tensor(x, dtype=F64), kt, padding=1), Tensor(t, dtype=F64))
    loss.backward()

    def f():
        return l1_loss(conv2d(Tensor(x, dtype=F64), Tensor(k, dtype=F64), padding=1),
                       Tensor(t, dtype=F64)).item()

    numeric = central_difference(f, k)
    np.testing.assert_allclose(kt.grad, numeric, rtol=1e-3, atol=1e-6)


def test_two_losses_sum_equals_separate_grads():
    rng = np.random.default_rng(12)
    xdata = rand(rng, 3, 3)
    t1, t2 = rand(rng, 3, 3), rand(rng, 3, 3)

    x = Tensor(xdata, requires_grad=True, dtype=F64)
    (l1_loss(x, Tensor(t1, dtype=F64)) + l1_loss(x, Tensor(t2, dtype=F64))).backward()
    combined = x.grad.copy()

    g = np.zeros_like(xdata)
    for t in (t1, t2):
        xi = Tensor(xdata, requires_grad=True, dtype=F64)
        l1_loss(xi, Tensor(t, dtype=F64)).backward()
        g += xi.grad
    np.testing.assert_allclose(combined, g, atol=1e-12)


def test_gradient_accumulates_through_shared_subexpression():
    x = Tensor(np.array([2.0, -3.0]), requires_grad=True, dtype=F64)
    y = x * 3.0
    (tsum(y) + tsum(y)).backward()
    np.testing.assert_allclose(x.grad, [6.0, 6.0])


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ContractViolation):
        (x * 2.0).backward()


def test_no_grad_skips_recording():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = x * 2.0
    assert not y.requires_grad
    assert y._backward_rule is None


def test_trainable_leaf_grad_populated_from_creation():
    x = Tensor(np.ones(3), requires_grad=True)
    np.testing.assert_array_equal(x.grad, np.zeros(3))


# -- finite-difference sweep over every differentiable op -----------------------


def _fd_check(build, arrays, rtol=1e-3, atol=1e-6):
    """build(tensors) -> scalar Tensor; checks every input's gradient."""
    tensors = [Tensor(a, requires_grad=True, dtype=F64) for a in arrays]
    build(tensors).backward()
    for i, arr in enumerate(arrays):
        def f(i=i):
            ts = [Tensor(a, dtype=F64) for a in arrays]
            return build(ts).item()
        numeric = central_difference(f, arr)
        np.testing.assert_allclose(tensors[i].grad, numeric, rtol=rtol, atol=atol)


@pytest.mark.parametrize("trial", range(20))
def test_fd_conv2d(trial):
    rng = np.random.default_rng(3000 + trial)
    x = rand(rng, 2, 4, 4)
    k = rand(rng, 2, 2, 3, 3)
    b = rand(rng, 2)
    t = rand(rng, 2, 2, 2, lo=5.0, hi=6.0)  # clear of the L1 kink
    _fd_check(lambda ts: l1_loss(conv2d(ts[0], ts[1], ts[2], stride=2, padding=1), Tensor(t, dtype=F64)),
              [x, k, b])


@pytest.mark.parametrize("trial", range(20))
def test_fd_elementwise_and_reductions(trial):
    rng = np.random.default_rng(4000 + trial)
    a = rand(rng, 3, 3)
    b = rand(rng, 3, 3)
    _fd_check(lambda ts: tmean(relu(ts[0] * 0.7 + ts[1]) * ts[0]), [a, b])


@pytest.mark.parametrize("trial", range(20))
def test_fd_pixelshuffle_reshape(trial):
    rng = np.random.default_rng(5000 + trial)
    x = rand(rng, 4, 2, 2)
    t = rand(rng, 1, 4, 4, lo=2.0, hi=3.0)  # |diff| bounded away from the L1 kink
    _fd_check(lambda ts: l1_loss(pixelshuffle(ts[0], 2), Tensor(t, dtype=F64)), [x])


@pytest.mark.parametrize("trial", range(20))
def test_fd_matmul(trial):
    rng = np.random.default_rng(6000 + trial)
    a = rand(rng, 3, 4)
    b = rand(rng, 4, 2)
    t = rand(rng, 3, 2, lo=5.0, hi=6.0)  # clear of the L1 kink
    _fd_check(lambda ts: l1_loss(matmul(ts[0], ts[1]), Tensor(t, dtype=F64)), [a, b])


@pytest.mark.parametrize("trial", range(20))
def test_fd_l1_loss_both_sides(trial):
    rng = np.random.default_rng(7000 + trial)
    a = rand(rng, 3, 3)
    b = a + rand(rng, 3, 3, lo=0.1, hi=0.5)  # keep |diff| away from the kink
    _fd_check(lambda ts: l1_loss(ts[0], ts[1]), [a, b])


def test_reshape_roundtrip_grad():
    x = Tensor(np.arange(6.0), requires_grad=True, dtype=F64)
    tsum(reshape(reshape(x, (2, 3)), (6,))).backward()
    np.testing.assert_array_equal(x.grad, np.ones(6))
