import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsc.entropy_analysis import (DeterministicMap, FiniteDistribution,
                                  conditional_entropy, demo_cases, entropy,
                                  joint_distribution, push_forward,
                                  random_chain, render_reports,
                                  verify_chain_recursion,
                                  verify_semantic_identity)
from hsc.errors import DistributionError
from hsc.numerics import Rng


def brute_entropy(probs):
    """Independent oracle: direct evaluation of -sum p log2 p."""
    return float(sum(-p * np.log2(p) for p in probs if p > 0))


class TestEntropy:
    def test_uniform_four(self):
        assert entropy(FiniteDistribution.uniform("abcd")) == pytest.approx(2.0)

    def test_point_mass(self):
        d = FiniteDistribution((0, 1), np.array([1.0, 0.0]))
        assert entropy(d) == 0.0

    def test_direct_sum_oracle(self):
        probs = (0.5, 0.25, 0.25)
        d = FiniteDistribution("xyz", np.array(probs))
        assert entropy(d) == pytest.approx(1.5)
        assert entropy(d) == pytest.approx(brute_entropy(probs), abs=1e-12)

    def test_invalid_distribution(self):
        with pytest.raises(DistributionError):
            FiniteDistribution((0, 1), np.array([0.6, 0.6]))
        with pytest.raises(DistributionError):
            FiniteDistribution((0, 1), np.array([1.2, -0.2]))

    @given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=32))
    @settings(max_examples=60, deadline=None)
    def test_entropy_bounds(self, weights):
        probs = np.array(weights) / np.sum(weights)
        d = FiniteDistribution(tuple(range(len(weights))), probs)
        h = entropy(d)
        assert -1e-12 <= h <= np.log2(len(weights)) + 1e-12


class TestConditionalEntropy:
    def test_independent(self):
        pa = np.array([0.3, 0.7])
        pb = np.array([0.25, 0.25, 0.5])
        joint = np.outer(pa, pb)
        assert conditional_entropy(joint, given_axis=1) == \
            pytest.approx(brute_entropy(pa), abs=1e-12)

    def test_functional_dependence(self):
        # A = g(B): joint is a permutation-like matrix
        joint = np.array([[0.5, 0.0], [0.0, 0.5]])
        assert conditional_entropy(joint, given_axis=1) == pytest.approx(0.0)

    def test_merging_example(self):
        """Uniform quaternary source merged pairwise: 1 bit survives, 1 is lost."""
        x = FiniteDistribution.uniform((0, 1, 2, 3))
        merge = DeterministicMap({0: "a", 1: "a", 2: "b", 3: "b"})
        f1 = push_forward(x, merge)
        assert entropy(f1) == pytest.approx(1.0)
        ident = DeterministicMap({s: s for s in x.support})
        joint, _, _ = joint_distribution(x, ident, merge)
        assert conditional_entropy(joint, given_axis=1) == pytest.approx(1.0)


class TestChainRecursion:
    def test_single_bijection(self):
        x = FiniteDistribution((0, 1, 2), np.array([0.2, 0.3, 0.5]))
        perm = DeterministicMap({0: "c", 1: "a", 2: "b"})
        rep = verify_chain_recursion(x, [perm])
        assert rep.residual <= 1e-15
        assert rep.stage_entropies[0] == pytest.approx(entropy(x))
        assert rep.conditional_terms[0] == pytest.approx(0.0, abs=1e-12)

    def test_merging_chain(self):
        x = FiniteDistribution.uniform((0, 1, 2, 3))
        merge = DeterministicMap({0: "a", 1: "a", 2: "b", 3: "b"})
        rep = verify_chain_recursion(x, [merge])
        assert rep.residual <= 1e-9

    def test_three_stage_random_surjections_seed42(self):
        dist, maps = random_chain(Rng(42), 8, 3)
        rep = verify_chain_recursion(dist, maps)
        assert rep.residual <= 1e-9
        assert len(rep.stage_entropies) == 3

    def test_non_composable_chain(self):
        x = FiniteDistribution.uniform((0, 1))
        good = DeterministicMap({0: "a", 1: "b"})
        bad = DeterministicMap({"a": 0})  # no image for "b"
        with pytest.raises(DistributionError, match="stage 2"):
            verify_chain_recursion(x, [good, bad])

    def test_data_processing_inequality(self):
        rng = Rng(17)
        for case in range(40):
            dist, maps = random_chain(rng.stream(case), 24, 3)
            rep = verify_chain_recursion(dist, maps)
            hs = [rep.source_entropy] + rep.stage_entropies
            assert all(b <= a + 1e-12 for a, b in zip(hs, hs[1:]))


class TestSemanticIdentity:
    def test_identity_map(self):
        x = FiniteDistribution((0, 1, 2), np.array([0.2, 0.3, 0.5]))
        rep = verify_semantic_identity(x, DeterministicMap({s: s for s in x.support}))
        assert rep.conditional_entropy == pytest.approx(0.0, abs=1e-12)
        assert rep.residual <= 1e-12

    def test_constant_map(self):
        x = FiniteDistribution((0, 1, 2), np.array([0.2, 0.3, 0.5]))
        rep = verify_semantic_identity(x, DeterministicMap({s: "k" for s in x.support}))
        assert rep.semantic_entropy == pytest.approx(0.0, abs=1e-12)
        assert rep.conditional_entropy == pytest.approx(entropy(x))

    def test_mixture_with_merging_map(self):
        x = FiniteDistribution.uniform((0, 1, 2, 3))
        merge = DeterministicMap({0: "a", 1: "a", 2: "b", 3: "b"})
        halve = DeterministicMap({0: 0, 1: 0, 2: 1, 3: 1})
        keep = DeterministicMap({0: 0, 1: 1})
        rep = verify_semantic_identity(x, merge, alpha=0.5, chain=[halve, keep])
        assert rep.mixture_residual <= 1e-9

    def test_mixture_needs_chain(self):
        x = FiniteDistribution.uniform((0, 1))
        with pytest.raises(DistributionError):
            verify_semantic_identity(x, DeterministicMap({0: 0, 1: 1}), alpha=0.5)


def test_random_chain_property_small():
    """Residuals vanish for random chains; the full 500-case run is in
    the acceptance suite."""
    rng = Rng(123)
    for case in range(60):
        size = 2 + int(rng.stream(case).integers(0, 63))
        dist, maps = random_chain(rng.stream(1000 + case), size, 3)
        rep = verify_chain_recursion(dist, maps)
        assert rep.residual <= 1e-9
        for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
            sem = verify_semantic_identity(dist, maps[0], alpha=alpha,
                                           chain=maps)
            assert sem.mixture_residual <= 1e-9


def test_demo_reports_render():
    cases = demo_cases(seed=42)
    text = render_reports(cases)
    assert "chain recursion residual" in text
    assert "semantics cheaper" in text
    # the constructed case demonstrates both strict inequalities
    name, dist, maps, semantic = cases[2]
    chain_rep = verify_chain_recursion(dist, maps)
    sem_rep = verify_semantic_identity(dist, semantic)
    assert sem_rep.semantic_entropy < chain_rep.stage_entropies[-1]
    assert sem_rep.conditional_entropy > sum(chain_rep.conditional_terms)
