"""Discrete information-theory toolkit over small finite alphabets.

Verifies, by exhaustive enumeration, that chains of deterministic maps obey
the entropy recursion H(X) = H(F_n) + sum_i H(F_{i-1} | F_i), that a
semantic map obeys H(X) = H(S) + H(X | S), and that any convex mixture of
the two decompositions reproduces H(X). All quantities are in bits.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DistributionError

_ATOL = 1e-12


@dataclass(frozen=True)
class FiniteDistribution:
    """Probability distribution over an explicit finite support."""

    support: tuple
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(self.support))
        p = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", p)
        if len(self.support) != p.size:
            raise DistributionError(
                f"support size {len(self.support)} != probs size {p.size}")
        if p.size == 0:
            raise DistributionError("empty support")
        if np.any(p < 0):
            raise DistributionError("negative probability")
        if abs(p.sum() - 1.0) > _ATOL:
            raise DistributionError(f"probabilities sum to {p.sum()!r}, not 1")

    @staticmethod
    def uniform(support):
        support = tuple(support)
        n = len(support)
        return FiniteDistribution(support, np.full(n, 1.0 / n))


@dataclass(frozen=True)
class DeterministicMap:
    """Total mapping from input symbols to output symbols."""

    table: dict

    def apply(self, symbol):
        try:
            return self.table[symbol]
        except KeyError:
            raise DistributionError(f"map not total: no image for {symbol!r}")

    def image(self, support):
        return tuple(sorted({self.apply(s) for s in support}, key=repr))


def _entropy_from_probs(p):
    p = np.asarray(p, dtype=np.float64).ravel()
    nz = p[p > 0.0]
    return float(-(nz * np.log2(nz)).sum())


def entropy(dist):
    """Shannon entropy in bits, with the 0*log(0) = 0 convention."""
    return _entropy_from_probs(dist.probs)


def joint_distribution(x_dist, map_a, map_b):
    """Joint pmf matrix of (A, B) = (map_a(X), map_b(X)), plus axis labels."""
    a_syms = sorted({map_a.apply(s) for s in x_dist.support}, key=repr)
    b_syms = sorted({map_b.apply(s) for s in x_dist.support}, key=repr)
    a_idx = {s: i for i, s in enumerate(a_syms)}
    b_idx = {s: i for i, s in enumerate(b_syms)}
    joint = np.zeros((len(a_syms), len(b_syms)))
    for sym, p in zip(x_dist.support, x_dist.probs):
        joint[a_idx[map_a.apply(sym)], b_idx[map_b.apply(sym)]] += p
    return joint, a_syms, b_syms


def conditional_entropy(joint, given_axis=1):
    """H(A|B) from a joint pmf matrix over (A, B); given_axis selects B.

    Computed as H(A, B) - H(B). Zero-probability conditioning symbols
    contribute nothing (0*log0 convention).
    """
    joint = np.asarray(joint, dtype=np.float64)
    if np.any(joint < 0) or abs(joint.sum() - 1.0) > _ATOL:
        raise DistributionError("joint pmf must be nonnegative and sum to 1")
    marginal = joint.sum(axis=1 - given_axis)
    return _entropy_from_probs(joint) - _entropy_from_probs(marginal)


def push_forward(dist, dmap):
    """Distribution of dmap(X)."""
    syms = dmap.image(dist.support)
    idx = {s: i for i, s in enumerate(syms)}
    probs = np.zeros(len(syms))
    for sym, p in zip(dist.support, dist.probs):
        probs[idx[dmap.apply(sym)]] += p
    return FiniteDistribution(syms, probs)


def _identity_map(support):
    return DeterministicMap({s: s for s in support})


def _compose(maps, upto):
    """Map X -> F_upto (upto == 0 gives the identity)."""
    def chain(sym):
        for m in maps[:upto]:
            sym = m.apply(sym)
        return sym
    return chain


@dataclass
class ChainReport:
    """Exhaustive evaluation of the chain entropy recursion."""

    source_entropy: float
    stage_entropies: list
    conditional_terms: list
    residual: float = field(init=False)

    def __post_init__(self):
        tail = self.stage_entropies[-1] if self.stage_entropies else self.source_entropy
        self.residual = abs(self.source_entropy - tail - sum(self.conditional_terms))


def verify_chain_recursion(x_dist, maps):
    """Check H(X) = H(F_n) + sum_i H(F_{i-1}|F_i) by full enumeration.

    Raises DistributionError naming the first stage whose map is not total
    over the image of the previous stages.
    """
    support = x_dist.support
    current = set(support)
    for i, m in enumerate(maps):
        try:
            current = {m.apply(s) for s in current}
        except DistributionError as e:
            raise DistributionError(f"stage {i + 1} not composable: {e}") from None

    stage_entropies = []
    conditional_terms = []
    for i in range(1, len(maps) + 1):
        f_prev = _compose(maps, i - 1)
        f_cur = _compose(maps, i)
        map_prev = DeterministicMap({s: f_prev(s) for s in support})
        map_cur = DeterministicMap({s: f_cur(s) for s in support})
        stage_entropies.append(entropy(push_forward(x_dist, map_cur)))
        joint, _, _ = joint_distribution(x_dist, map_prev, map_cur)
        conditional_terms.append(conditional_entropy(joint, given_axis=1))
    return ChainReport(entropy(x_dist), stage_entropies, conditional_terms)


@dataclass
class SemanticReport:
    """Exhaustive evaluation of the semantic split and its convex mixture."""

    source_entropy: float
    semantic_entropy: float
    conditional_entropy: float
    residual: float = field(init=False)
    alpha: float | None = None
    mixture_value: float | None = None
    mixture_residual: float | None = None

    def __post_init__(self):
        self.residual = abs(self.source_entropy - self.semantic_entropy
                            - self.conditional_entropy)


def verify_semantic_identity(x_dist, semantic_map, alpha=None, chain=None):
    """Check H(X) = H(S) + H(X|S); optionally check the alpha-mixture.

    With ``alpha`` and a ``chain`` of deterministic maps supplied, also
    evaluates alpha*(H(S) + H(X|S)) + (1-alpha)*(H(F_n) + sum conditionals)
    and reports its deviation from H(X).
    """
    ident = _identity_map(x_dist.support)
    joint, _, _ = joint_distribution(x_dist, ident, semantic_map)
    h_s = entropy(push_forward(x_dist, semantic_map))
    h_x_given_s = conditional_entropy(joint, given_axis=1)
    report = SemanticReport(entropy(x_dist), h_s, h_x_given_s)
    if alpha is not None:
        if chain is None:
            raise DistributionError("mixture check needs a chain of maps")
        chain_rep = verify_chain_recursion(x_dist, chain)
        tail = chain_rep.stage_entropies[-1] if chain_rep.stage_entropies \
            else chain_rep.source_entropy
        mixture = (alpha * (h_s + h_x_given_s)
                   + (1.0 - alpha) * (tail + sum(chain_rep.conditional_terms)))
        report.alpha = alpha
        report.mixture_value = mixture
        report.mixture_residual = abs(mixture - report.source_entropy)
    return report


def random_chain(rng, alphabet_size, n_stages, shrink=2):
    """Random source plus a chain of random surjections with shrinking images.

    Each stage maps onto a codomain of roughly 1/shrink the size (at least 1
    symbol), hitting every codomain symbol at least once.
    """
    support = tuple(range(alphabet_size))
    raw = rng.uniform_noise(alphabet_size) + 0.75   # positive weights
    probs = raw / raw.sum()
    dist = FiniteDistribution(support, probs)

    maps = []
    domain = list(support)
    for _ in range(n_stages):
        n_out = max(1, len(domain) // shrink)
        codomain = list(range(n_out))
        targets = list(codomain)  # guarantee surjectivity
        extra = rng.integers(0, n_out, size=max(0, len(domain) - n_out))
        targets.extend(int(t) for t in extra)
        perm = rng.permutation(len(domain))
        table = {domain[i]: targets[k] for k, i in enumerate(perm)}
        maps.append(DeterministicMap(table))
        domain = codomain
    return dist, maps


# ---------------------------------------------------------------------------
# built-in demonstration cases for the CLI


def demo_cases(seed=42):
    """Named example chains used by the ``entropy-demo`` subcommand."""
    from .numerics import Rng

    cases = []

    support = (0, 1, 2, 3)
    x = FiniteDistribution.uniform(support)
    merge = DeterministicMap({0: "a", 1: "a", 2: "b", 3: "b"})
    cases.append(("pairwise merge of a uniform quaternary source", x, [merge], merge))

    rng = Rng(seed)
    x8, maps8 = random_chain(rng, 8, 3)
    cases.append(("3-stage random surjections on 8 symbols", x8, maps8, maps8[0]))

    # Constructed case where the semantic side is strictly cheaper than the
    # chain tail: H(S) < H(F_n) while H(X|S) > sum of chain conditionals.
    sup8 = tuple(range(8))
    xu = FiniteDistribution.uniform(sup8)
    semantic = DeterministicMap({s: s % 2 for s in sup8})
    halve = DeterministicMap({s: s // 2 for s in sup8})
    keep = DeterministicMap({s: s for s in range(4)})
    cases.append(("semantics cheaper than a shallow chain tail", xu,
                  [halve, keep], semantic))
    return cases


def render_reports(cases, alphas=(0.0, 0.25, 0.5, 0.75, 1.0)):
    """Text table of chain/semantic/mixture reports for the demo cases."""
    lines = []
    for name, dist, maps, semantic in cases:
        chain_rep = verify_chain_recursion(dist, maps)
        lines.append(f"case: {name}")
        lines.append(f"  H(X) = {chain_rep.source_entropy:.6f} bits")
        for i, (h, c) in enumerate(zip(chain_rep.stage_entropies,
                                       chain_rep.conditional_terms), 1):
            lines.append(f"  stage {i}: H(F{i}) = {h:.6f}   "
                         f"H(F{i - 1}|F{i}) = {c:.6f}")
        lines.append(f"  chain recursion residual  = {chain_rep.residual:.3e}")
        sem = verify_semantic_identity(dist, semantic)
        lines.append(f"  H(S) = {sem.semantic_entropy:.6f}   "
                     f"H(X|S) = {sem.conditional_entropy:.6f}   "
                     f"split residual = {sem.residual:.3e}")
        for a in alphas:
            rep = verify_semantic_identity(dist, semantic, alpha=a, chain=maps)
            lines.append(f"  mixture alpha={a:<5} value = {rep.mixture_value:.6f}"
                         f"   residual = {rep.mixture_residual:.3e}")
        lines.append("")
    return "\n".join(lines)
