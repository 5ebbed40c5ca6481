import numpy as np
import pytest

from hsc.errors import ShapeError
from hsc.numerics import (Rng, add, concat_channels, conv2d, matmul,
                          pool_mean, scale, std_normal_cdf, sub,
                          uniform_noise)


class TestNormalCdf:
    def test_center_exact(self):
        assert std_normal_cdf(0.0) == 0.5

    def test_frozen_oracle_values(self):
        # 40-digit mpmath ncdf evaluations, frozen
        assert abs(std_normal_cdf(0.5) - 0.69146246127401310364) < 1e-12
        assert abs(std_normal_cdf(-0.5) - 0.30853753872598689636) < 1e-12
        assert abs(std_normal_cdf(1.0) - 0.84134474606854294859) < 1e-12
        assert abs(std_normal_cdf(2.0) - 0.97724986805182079280) < 1e-12

    def test_against_live_high_precision_reference(self):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 40
        rng = np.random.default_rng(0)
        zs = np.concatenate([np.linspace(-8, 8, 201), rng.uniform(-30, 30, 100)])
        got = std_normal_cdf(zs)
        for z, g in zip(zs, got):
            want = float(mpmath.ncdf(mpmath.mpf(float(z))))
            assert abs(g - want) <= 1e-12

    def test_symmetry(self):
        zs = np.linspace(-12, 12, 1001)
        assert np.max(np.abs(std_normal_cdf(zs) + std_normal_cdf(-zs) - 1.0)) \
            <= 1e-12

    def test_monotone(self):
        zs = np.linspace(-10, 10, 5001)
        assert np.all(np.diff(std_normal_cdf(zs)) >= 0.0)


class TestRng:
    def test_empty_shape(self):
        assert uniform_noise([0], Rng(5)).shape == (0,)

    def test_large_sample_mean(self):
        # law-of-large-numbers bound, fixed seed
        draws = uniform_noise([10 ** 6], Rng(1))
        assert abs(draws.mean()) < 0.002
        assert draws.min() >= -0.5 and draws.max() < 0.5

    def test_determinism(self):
        a = uniform_noise([4], Rng(7))
        b = uniform_noise([4], Rng(7))
        assert np.array_equal(a, b)

    def test_streams_independent(self):
        base = Rng(9)
        s1 = base.stream(1).normal((8,))
        s2 = base.stream(2).normal((8,))
        assert not np.array_equal(s1, s2)
        assert np.array_equal(s1, Rng(9).stream(1).normal((8,)))


class TestTensorOps:
    def test_matmul_identity(self):
        a = np.arange(9.0).reshape(3, 3)
        assert np.array_equal(matmul(np.eye(3), a), a)

    def test_matmul_shape_error(self):
        with pytest.raises(ShapeError, match=r"\(3, 3\)"):
            matmul(np.eye(3), np.ones((4, 2)))

    def test_add_sub_scale(self):
        a, b = np.ones((2, 2)), np.full((2, 2), 3.0)
        assert np.array_equal(add(a, b), np.full((2, 2), 4.0))
        assert np.array_equal(sub(b, a), np.full((2, 2), 2.0))
        assert np.array_equal(scale(a, 0.5), np.full((2, 2), 0.5))
        with pytest.raises(ShapeError):
            add(a, np.ones(3))

    def test_conv_1x1_doubling(self):
        x = np.random.default_rng(0).standard_normal((2, 1, 5, 5))
        k = np.full((1, 1, 1, 1), 2.0)
        assert np.allclose(conv2d(x, k), 2.0 * x)

    def test_conv_output_shape(self):
        x = np.zeros((1, 3, 11, 9))
        w = np.zeros((4, 3, 3, 3))
        assert conv2d(x, w, stride=2, pad=1).shape == (1, 4, 6, 5)
        assert conv2d(x, w, stride=1, pad=0).shape == (1, 4, 9, 7)

    def test_conv_dirac_kernel_interior(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((1, 2, 8, 8))
        k = np.zeros((2, 2, 3, 3))
        k[0, 0, 1, 1] = 1.0
        k[1, 1, 1, 1] = 1.0
        out = conv2d(x, k, stride=1, pad=0)
        assert np.allclose(out, x[:, :, 1:-1, 1:-1])

    def test_conv_channel_mismatch(self):
        with pytest.raises(ShapeError, match="channels"):
            conv2d(np.zeros((1, 3, 8, 8)), np.zeros((4, 2, 3, 3)))

    def test_concat_channels(self):
        a, b = np.zeros((2, 4, 4)), np.ones((3, 4, 4))
        assert concat_channels([a, b]).shape == (5, 4, 4)
        with pytest.raises(ShapeError):
            concat_channels([a, np.ones((3, 5, 4))])

    def test_pool_mean(self):
        x = np.arange(16.0).reshape(1, 1, 4, 4)
        assert pool_mean(x)[0, 0] == pytest.approx(7.5)


def test_backend_kernels_agree():
    """Both kernel implementations compute the same convolutions."""
    from hsc.backend import implementations

    impls = implementations()
    if len(impls) < 2:
        pytest.skip("only one backend importable")
    rng = np.random.default_rng(2)
    x = rng.standard_normal((2, 5, 12, 12))
    w = rng.standard_normal((4, 5, 3, 3))
    gy = None
    results = {}
    for name, mod in impls.items():
        y = mod.conv2d_fwd(x, w, 2, 1)
        if gy is None:
            gy = rng.standard_normal(y.shape)
        results[name] = (y,
                         mod.conv2d_grad_input(gy, w, 2, 1, 12, 12),
                         mod.conv2d_grad_weight(gy, x, 2, 1, 3, 3))
    a, b = results["numba"], results["numpy"]
    for ya, yb in zip(a, b):
        assert np.allclose(ya, yb, atol=1e-12)
