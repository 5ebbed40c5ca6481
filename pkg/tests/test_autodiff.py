"""Finite-difference checks for every op in the autodiff engine."""

import numpy as np
import pytest

from hsc import autodiff as ad
from hsc.autodiff import Param, Tape
from hsc.errors import ShapeError


def central_diff(f, x, idx, h=1e-6):
    xp = x.copy()
    xp[idx] += h
    xm = x.copy()
    xm[idx] -= h
    return (f(xp) - f(xm)) / (2 * h)


def check_gradient(build, x, n_coords=6, seed=0, tol=1e-6):
    """Compare the analytic input gradient of scalar build(x) against FD."""
    node = ad.const(x)
    out = build(node)
    ad.backward(out)
    rng = np.random.default_rng(seed)
    f = lambda xv: float(build(ad.const(xv)).value)
    for _ in range(n_coords):
        idx = tuple(rng.integers(0, s) for s in x.shape)
        fd = central_diff(f, x, idx)
        an = node.grad[idx]
        assert abs(fd - an) <= tol * max(abs(fd), abs(an), 1.0), \
            f"grad mismatch at {idx}: fd={fd} analytic={an}"


RNG = np.random.default_rng(42)

UNARY_CASES = [
    ("tanh", lambda x: ad.sum_all(ad.tanh(x)), (3, 4)),
    ("sigmoid", lambda x: ad.sum_all(ad.sigmoid(x)), (3, 4)),
    ("softplus", lambda x: ad.sum_all(ad.softplus(x)), (3, 4)),
    ("exp", lambda x: ad.sum_all(ad.exp(ad.scale(x, 0.3))), (3, 4)),
    ("square", lambda x: ad.sum_all(ad.square(x)), (5,)),
    ("sqrt_of_square", lambda x: ad.sqrt(ad.sum_all(ad.square(x))), (5,)),
    ("normal_cdf", lambda x: ad.sum_all(ad.normal_cdf(x)), (3, 4)),
    ("mean", lambda x: ad.mean_all(ad.square(x)), (4, 4)),
    ("neg", lambda x: ad.sum_all(ad.neg(ad.tanh(x))), (5,)),
    ("shift_scale", lambda x: ad.sum_all(ad.square(ad.shift(ad.scale(x, 1.7), 0.3))), (5,)),
    ("reshape", lambda x: ad.sum_all(ad.square(ad.reshape(x, (2, 6)))), (3, 4)),
    ("upsample2", lambda x: ad.sum_all(ad.square(ad.upsample2(x))), (1, 2, 3, 3)),
    ("avgpool2", lambda x: ad.sum_all(ad.square(ad.avgpool2(x))), (1, 2, 4, 4)),
    ("spatial_mean", lambda x: ad.sum_all(ad.square(ad.spatial_mean(x))), (2, 3, 4, 4)),
    ("channel_slice", lambda x: ad.sum_all(ad.square(ad.channel_slice(x, 1, 3))), (2, 4, 3, 3)),
    ("log", lambda x: ad.sum_all(ad.log(ad.shift(ad.sigmoid(x), 0.1))), (3, 3)),
]


@pytest.mark.parametrize("name,build,shape", UNARY_CASES,
                         ids=[c[0] for c in UNARY_CASES])
def test_unary_gradients(name, build, shape):
    check_gradient(build, RNG.standard_normal(shape))


def test_binary_gradients_with_broadcast():
    a = RNG.standard_normal((3, 4))
    b = RNG.standard_normal((1, 4))

    for combine in (ad.add, ad.sub, ad.mul):
        an = ad.const(a)
        bn = ad.const(b)
        out = ad.sum_all(ad.square(combine(an, bn)))
        ad.backward(out)
        for node, arr, other in ((an, a, b), (bn, b, a)):
            idx = tuple(RNG.integers(0, s) for s in arr.shape)
            if node is an:
                f = lambda v: float(ad.sum_all(ad.square(
                    combine(ad.const(v), ad.const(b)))).value)
            else:
                f = lambda v: float(ad.sum_all(ad.square(
                    combine(ad.const(a), ad.const(v)))).value)
            fd = central_diff(f, arr, idx)
            assert abs(fd - node.grad[idx]) <= 1e-6 * max(abs(fd), 1.0)


def test_div_gradient():
    a = RNG.standard_normal((4,))
    b = RNG.standard_normal((4,)) + 3.0
    check_gradient(lambda x: ad.sum_all(ad.div(x, ad.const(b))), a)
    check_gradient(lambda x: ad.sum_all(ad.div(ad.const(a), ad.shift(ad.square(x), 1.0))),
                   b)


def test_matmul_bmm_gradients():
    a = RNG.standard_normal((3, 4))
    b = RNG.standard_normal((4, 2))
    check_gradient(lambda x: ad.sum_all(ad.square(ad.matmul(x, ad.const(b)))), a)
    check_gradient(lambda x: ad.sum_all(ad.square(ad.matmul(ad.const(a), x))), b)

    p = RNG.standard_normal((5, 2, 3))
    q = RNG.standard_normal((5, 3, 2))
    check_gradient(lambda x: ad.sum_all(ad.square(ad.bmm(x, ad.const(q)))), p)
    check_gradient(lambda x: ad.sum_all(ad.square(ad.bmm(ad.const(p), x))), q)


def test_conv2d_gradients():
    x = RNG.standard_normal((2, 3, 6, 6))
    w = RNG.standard_normal((4, 3, 3, 3)) * 0.5
    for stride, pad in ((1, 1), (2, 1), (1, 0)):
        check_gradient(lambda v: ad.sum_all(ad.square(
            ad.conv2d(v, ad.const(w), stride, pad))), x)
        check_gradient(lambda v: ad.sum_all(ad.square(
            ad.conv2d(ad.const(x), v, stride, pad))), w)


def test_concat_and_broadcast_gradients():
    a = RNG.standard_normal((1, 2, 3, 3))
    b = RNG.standard_normal((1, 3, 3, 3))
    check_gradient(lambda x: ad.sum_all(ad.square(
        ad.concat([x, ad.const(b)], axis=1))), a)
    v = RNG.standard_normal((2, 4))
    check_gradient(lambda x: ad.sum_all(ad.square(ad.spatial_broadcast(x, 3, 3))), v)


def test_clamp_min_gradient_semantics():
    x = np.array([-1.0, 0.5, 2.0])
    node = ad.const(x)
    out = ad.sum_all(ad.clamp_min(node, 1.0))
    ad.backward(out)
    assert np.array_equal(node.grad, [0.0, 0.0, 1.0])


def test_sqrt_at_zero_has_zero_gradient():
    node = ad.const(np.zeros(3))
    out = ad.sum_all(ad.sqrt(node))
    ad.backward(out)
    assert np.array_equal(node.grad, np.zeros(3))


def test_backward_requires_scalar():
    with pytest.raises(ShapeError):
        ad.backward(ad.const(np.zeros(3)))


def test_tape_collects_param_grads():
    p = Param(np.ones(3))
    with Tape() as tape:
        x = ad.leaf(p)
        y = ad.leaf(p)  # same param used twice: grads must sum
        out = ad.sum_all(ad.add(ad.square(x), ad.scale(y, 3.0)))
    ad.backward(out)
    grads = tape.grads()
    assert np.allclose(grads[id(p)], 2.0 * p.value + 3.0)


def test_diamond_graph_accumulation():
    x = ad.const(np.array(2.0))
    y = ad.mul(x, x)          # x reused: dy/dx = 2x
    z = ad.add(y, ad.scale(x, 3.0))
    ad.backward(z)
    assert x.grad == pytest.approx(2 * 2.0 + 3.0)
