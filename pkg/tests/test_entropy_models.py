import numpy as np
import pytest

from hsc import autodiff as ad
from hsc.autodiff import Tape
from hsc.entropy_models import (P_MIN, SIGMA_MIN, FactorizedDensity,
                                QuantMode, gaussian_bin_prob,
                                gaussian_bin_prob_node, gaussian_pmf_range,
                                quantize, rate_bits, rate_bits_node,
                                round_half_away)
from hsc.errors import CoderError, ShapeError
from hsc.numerics import Rng
from hsc.training import MomentumSGD

# frozen 40-digit oracle values (mpmath)
LOGISTIC_BIN0 = 0.24491866240370912928          # 2*sigmoid(1/2) - 1
GAUSS_BIN0 = 0.38292492254802620728             # ncdf(1/2) - ncdf(-1/2)
GAUSS_BIN0_BITS = 1.3848665342909896846         # -log2 of the above


class TestQuantize:
    def test_round_half_away(self):
        v = np.array([0.4, -1.6, 0.5, -0.5, 2.5, 0.0])
        got = quantize(v, QuantMode.ROUND)
        assert np.array_equal(got, [0.0, -2.0, 1.0, -1.0, 3.0, 0.0])

    def test_noise_support(self):
        v = Rng(4).normal((64,))
        noisy = quantize(v, QuantMode.NOISE, rng=Rng(5))
        assert np.max(np.abs(noisy - v)) <= 0.5

    def test_noise_replay(self):
        v = np.zeros(8)
        noise = Rng(6).uniform_noise(8)
        a = quantize(v, QuantMode.NOISE, noise=noise)
        b = quantize(v, QuantMode.NOISE, noise=noise)
        assert np.array_equal(a, b)

    def test_noise_needs_source(self):
        with pytest.raises(ValueError):
            quantize(np.zeros(3), QuantMode.NOISE)


class TestFactorized:
    def test_logistic_bin_probability(self):
        model = FactorizedDensity.logistic()
        p = model.bin_probs(np.array([[0.0]]))
        assert p[0, 0] == pytest.approx(LOGISTIC_BIN0, abs=1e-12)

    def test_logistic_mass_sum(self):
        """Grid summation over [-64, 64] plus tails accounts for all mass."""
        model = FactorizedDensity.logistic()
        pmf, tail = model.pmf_range(-64, 64)
        assert pmf.sum() >= 1.0 - 2.0 ** -10
        assert abs(pmf.sum() + tail.sum() - 1.0) <= 1e-9

    def test_default_init_is_near_logistic(self):
        model = FactorizedDensity(4, rng=Rng(0))
        p = model.bin_probs(np.zeros((1, 4)))
        assert np.allclose(p, LOGISTIC_BIN0, atol=0.02)

    def test_monotone_validation(self):
        model = FactorizedDensity(8, rng=Rng(1))
        assert model.validate_monotone()

    def test_mass_invariant_trained(self, light_trained):
        models, _, _, _ = light_trained
        density = models.semantic.density
        assert density.validate_monotone()
        pmf, tail = density.pmf_range(-127, 128)
        total = pmf.sum(axis=1) + tail
        assert np.all(total >= 1.0 - 2.0 ** -10)
        assert np.all(total <= 1.0 + 1e-9)

    def test_unimodal_after_fit(self):
        """Fitted on data concentrated near 2: probability falls off the mode."""
        model = FactorizedDensity(1, rng=Rng(2))
        data = Rng(3).normal((512, 1), scale=0.7) + 2.0
        opt = MomentumSGD(model.params("d").values(), 5e-3, 0.9)
        noise_rng = Rng(4)
        for step in range(300):
            batch = data[(step * 32) % 512:(step * 32) % 512 + 32]
            with Tape() as tape:
                noisy = ad.add(ad.const(batch), ad.const(
                    noise_rng.uniform_noise(batch.shape)))
                loss = rate_bits_node(model.bin_prob_node(noisy))
            ad.backward(loss)
            opt.step(tape.grads())
        grid = np.arange(-6, 11, dtype=float)
        p = model.bin_probs(grid[:, None]).ravel()
        mode = int(np.argmax(p))
        assert abs(grid[mode] - 2.0) <= 1.0
        assert np.all(np.diff(p[:mode]) >= -1e-12)
        assert np.all(np.diff(p[mode:]) <= 1e-12)

    def test_channel_mismatch(self):
        model = FactorizedDensity(4, rng=Rng(0))
        with pytest.raises(ShapeError):
            model.bin_probs(np.zeros((1, 5)))


class TestGaussian:
    def test_oracle_values(self):
        p = gaussian_bin_prob(np.zeros(1), np.ones(1), np.zeros(1))
        assert p[0] == pytest.approx(GAUSS_BIN0, abs=1e-12)
        assert rate_bits(p) == pytest.approx(GAUSS_BIN0_BITS, abs=1e-9)

    def test_sigma_clamped_to_minimum(self):
        at_min = gaussian_bin_prob(np.zeros(1), np.full(1, SIGMA_MIN),
                                   np.zeros(1))
        below = gaussian_bin_prob(np.zeros(1), np.full(1, 1e-9), np.zeros(1))
        assert np.array_equal(at_min, below)
        assert at_min[0] == pytest.approx(1.0, abs=1e-12)

    def test_probability_floor(self):
        p = gaussian_bin_prob(np.zeros(1), np.full(1, 1e6), np.zeros(1))
        assert p[0] == P_MIN

    def test_translation_invariance(self):
        rng = Rng(7)
        y = round_half_away(rng.normal((64,), scale=3.0))
        mu = rng.normal((64,))
        sigma = np.abs(rng.normal((64,))) + 0.2
        base = gaussian_bin_prob(mu, sigma, y)
        for n in (1, -3, 17):
            shifted = gaussian_bin_prob(mu + n, sigma, y + n)
            assert np.allclose(shifted, base, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            gaussian_bin_prob(np.zeros(3), np.ones(3), np.zeros(4))

    def test_bin_prob_maximized_at_mu_equal_y(self):
        """Grid search over mu: probability peaks (rate bottoms) at mu == y."""
        y = np.zeros(1)
        sigma = np.full(1, 0.8)
        mus = np.linspace(-3, 3, 241)
        probs = np.array([gaussian_bin_prob(np.array([m]), sigma, y)[0]
                          for m in mus])
        assert mus[np.argmax(probs)] == pytest.approx(0.0, abs=0.03)
        rates = -np.log2(probs)
        assert mus[np.argmin(rates)] == pytest.approx(0.0, abs=0.03)

    def test_pmf_range_matches_bin_probs(self):
        mu = np.array([0.3, -1.2])
        sigma = np.array([0.7, 2.0])
        pmf, tail = gaussian_pmf_range(mu, sigma, -8, 8)
        for i, v in enumerate(range(-8, 9)):
            p = gaussian_bin_prob(mu, sigma, np.full(2, float(v)))
            assert np.allclose(pmf[:, i], np.maximum(p, 0.0), atol=P_MIN)
        assert np.all(pmf.sum(axis=1) + tail <= 1.0 + 1e-9)


class TestRateBits:
    def test_half_probabilities(self):
        assert rate_bits(np.full(13, 0.5)) == pytest.approx(13.0)

    def test_certainty(self):
        assert rate_bits(np.ones(5)) == 0.0

    def test_mixed(self):
        assert rate_bits(np.array([0.5, 0.25])) == pytest.approx(3.0)

    def test_nonpositive_raises(self):
        with pytest.raises(CoderError):
            rate_bits(np.array([0.5, 0.0]))
        with pytest.raises(CoderError):
            rate_bits(np.array([np.nan]))


class TestGradients:
    def _fd(self, f, x, idx, h):
        xp = x.copy(); xp[idx] += h
        xm = x.copy(); xm[idx] -= h
        return (f(xp) - f(xm)) / (2 * h)

    def test_gaussian_rate_gradients(self):
        rng = Rng(3)
        worst = 0.0
        for draw in range(50):
            r = rng.stream(draw)
            mu = r.normal((6,))
            sigma = np.abs(r.normal((6,))) + 0.3
            y = r.normal((6,)) + r.uniform_noise(6)

            def loss(mu_v, sig_v, y_v):
                p = gaussian_bin_prob_node(ad.const(mu_v), ad.const(sig_v),
                                           ad.const(y_v))
                return rate_bits_node(p)

            nodes = [ad.const(mu), ad.const(sigma), ad.const(y)]
            out = rate_bits_node(gaussian_bin_prob_node(*nodes))
            ad.backward(out)
            for k, (arr, node) in enumerate(zip((mu, sigma, y), nodes)):
                idx = (int(r.integers(0, 6)),)
                h = 1e-5 * max(1.0, abs(arr[idx]))
                args = [mu.copy(), sigma.copy(), y.copy()]
                args[k] = arr.copy(); args[k][idx] += h
                hi = float(loss(*args).value)
                args[k][idx] -= 2 * h
                lo = float(loss(*args).value)
                fd = (hi - lo) / (2 * h)
                an = node.grad[idx]
                rel = abs(fd - an) / max(abs(fd), abs(an), 1.0)
                worst = max(worst, rel)
        assert worst <= 1e-4

    def test_sigma_gradient_zero_in_clamp_region(self):
        mu = ad.const(np.zeros(4))
        sigma = ad.const(np.full(4, 1e-4))  # below SIGMA_MIN
        y = ad.const(np.array([0.0, 1.0, -2.0, 3.0]))
        out = rate_bits_node(gaussian_bin_prob_node(mu, sigma, y))
        ad.backward(out)
        assert np.array_equal(sigma.grad, np.zeros(4))

    def test_factorized_rate_gradients(self):
        rng = Rng(9)
        model = FactorizedDensity(3, rng=rng.stream(0))
        params = list(model.params("d").values())
        v = rng.normal((5, 3))
        worst = 0.0
        for draw in range(25):
            r = rng.stream(100 + draw)
            with Tape() as tape:
                out = rate_bits_node(model.bin_prob_node(ad.const(v)))
            ad.backward(out)
            grads = tape.grads()
            p = params[int(r.integers(0, len(params)))]
            idx = tuple(int(r.integers(0, s)) for s in p.value.shape)
            h = 1e-5 * max(1.0, abs(p.value[idx]))
            orig = p.value[idx]
            p.value[idx] = orig + h
            hi = float(rate_bits_node(model.bin_prob_node(ad.const(v))).value)
            p.value[idx] = orig - h
            lo = float(rate_bits_node(model.bin_prob_node(ad.const(v))).value)
            p.value[idx] = orig
            fd = (hi - lo) / (2 * h)
            an = grads[id(p)][idx]
            worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1.0))
        assert worst <= 1e-4

    def test_stationary_point_of_symmetric_model(self):
        """Symmetric data at a symmetric model: the location bias gradient
        vanishes (a constructed stationary point)."""
        model = FactorizedDensity.logistic()
        v = np.array([[1.5], [-1.5]])  # symmetric pair
        with Tape() as tape:
            out = rate_bits_node(model.bin_prob_node(ad.const(v)))
        ad.backward(out)
        grads = tape.grads()
        bias = model._biases[0]
        assert abs(grads[id(bias)].ravel()[0]) <= 1e-12


def test_noise_vs_round_rate_band(light_trained, capsys):
    """Sanity band, logged not asserted: noisy rate should not sit far below
    the rounded rate on a trained model."""
    models, dataset, _, _ = light_trained
    from hsc.training import inversion_outputs
    codes, feats = inversion_outputs(models, dataset.images[:16])
    s_lat = models.semantic.analyze(ad.const(codes)).value
    rng = Rng(55)
    noisy = s_lat + rng.uniform_noise(s_lat.shape)
    rounded = round_half_away(s_lat)
    r_noise = rate_bits(models.semantic.density.bin_probs(noisy)) / 16
    r_round = rate_bits(models.semantic.density.bin_probs(rounded)) / 16
    n_el = s_lat.shape[1]
    print(f"noise-mode {r_noise:.2f} bits vs round-mode {r_round:.2f} bits "
          f"per sample ({n_el} elements); gap/element "
          f"{(r_noise - r_round) / n_el:+.4f}")
