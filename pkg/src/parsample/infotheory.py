"""Exact information-theoretic functionals on small explicit joints.

All quantities are in nats.  Subsets of variables are given as iterables
of 0-based indices.
"""

import itertools
import math

import numpy as np
from scipy.special import entr, rel_entr


class JointTable:
    """Joint law of ``m`` discrete variables stored as an m-dimensional array."""

    def __init__(self, probs, shape=None):
        probs = np.asarray(probs, dtype=np.float64)
        if shape is not None:
            probs = probs.reshape(shape)
        if probs.size > 2**20:
            raise ValueError("joint larger than 2^20 cells")
        if np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
            raise ValueError("probs must be nonnegative and sum to 1")
        self.probs = probs
        self.m = probs.ndim
        self._h = {}

    def _mask(self, A):
        mask = 0
        for i in A:
            if not 0 <= i < self.m:
                raise ValueError(f"variable {i} out of range")
            mask |= 1 << i
        return mask

    def _entropy_mask(self, mask):
        if mask not in self._h:
            drop = tuple(i for i in range(self.m) if not mask >> i & 1)
            marg = self.probs.sum(axis=drop) if drop else self.probs
            self._h[mask] = float(entr(marg).sum())
        return self._h[mask]

    def entropy(self, A):
        """``H(X_A)``; the empty set has entropy 0."""
        return self._entropy_mask(self._mask(A))

    def cond_entropy(self, A, B):
        """``H(X_A | X_B)``."""
        return self._entropy_mask(self._mask(A) | self._mask(B)) - self.entropy(B)


def entropy(j, A):
    return j.entropy(A)


def potential_phi(j, S, cond=()):
    """``sum_i [H(X_i | X_cond) - H(X_i | X_{S - i}, X_cond)]`` over i in S."""
    S, cond = list(S), list(cond)
    if not S:
        raise ValueError("S must be nonempty")
    if set(S) & set(cond):
        raise ValueError("S and cond must be disjoint")
    total = 0.0
    for i in S:
        rest = [s for s in S if s != i] + cond
        total += j.cond_entropy([i], cond) - j.cond_entropy([i], rest)
    return max(total, 0.0)


def total_correlation(j, S=None):
    """``sum_i H(X_i) - H(X_S)``."""
    S = range(j.m) if S is None else list(S)
    return max(sum(j.entropy([i]) for i in S) - j.entropy(S), 0.0)


def ordered_partitions(m, k):
    """All ordered partitions of ``range(m)`` into `k` blocks of equal size."""
    if k < 1 or m % k:
        raise ValueError(f"{m} variables cannot split into {k} equal parts")
    size = m // k

    def rec(items, parts):
        if parts == 1:
            yield (tuple(items),)
            return
        for first in itertools.combinations(items, size):
            rest = [x for x in items if x not in first]
            for tail in rec(rest, parts - 1):
                yield (first,) + tail

    return rec(list(range(m)), k)


def _chain_potential(j, parts):
    total, seen = 0.0, []
    for part in parts:
        total += potential_phi(j, part, seen)
        seen = seen + list(part)
    return total


def pinning_lemma_check(j, k, method="partitions"):
    """Average, over random orders, of the block-wise conditional potentials.

    A uniform permutation maps the fixed equal blocks ``A_1..A_k`` to a
    uniform ordered partition, so averaging over ordered partitions is
    exact.  ``method="permutations"`` averages over all ``m!`` orders
    instead (small ``m`` only).

    Returns
    -------
    (lhs, rhs, holds)
        ``rhs = phi(X) / k`` and ``holds = lhs <= rhs + 1e-9``.
    """
    m = j.m
    if k < 1 or m % k:
        raise ValueError(f"{m} variables cannot split into {k} equal parts")
    size = m // k
    if method == "partitions":
        vals = [_chain_potential(j, p) for p in ordered_partitions(m, k)]
    elif method == "permutations":
        if m > 8:
            raise ValueError("permutation averaging limited to m <= 8")
        vals = [
            _chain_potential(j, [perm[r * size:(r + 1) * size] for r in range(k)])
            for perm in itertools.permutations(range(m))
        ]
    else:
        raise ValueError(f"unknown method {method!r}")
    lhs = float(np.mean(vals))
    rhs = potential_phi(j, range(m)) / k
    return lhs, rhs, lhs <= rhs + 1e-9


def tv_distance(p, q):
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("length mismatch")
    return 0.5 * float(np.abs(p - q).sum())


def kl_divergence(p, q):
    """``sum p log(p/q)``; infinite when p charges a point q does not."""
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("length mismatch")
    return float(rel_entr(p, q).sum())


def random_joint(m, q, alpha, rng):
    """Symmetric Dirichlet(`alpha`) joint over ``q^m`` cells."""
    p = rng.dirichlet(np.full(q**m, alpha))
    return JointTable(p / p.sum(), (q,) * m)


def fully_correlated(m, q=2):
    """Uniform law on the ``q`` constant strings of length `m`."""
    p = np.zeros((q,) * m)
    for a in range(q):
        p[(a,) * m] = 1.0 / q
    return JointTable(p)


def dirichlet_alpha(index):
    """Concentration cycling through near-deterministic to diffuse regimes."""
    return (0.1, 1.0, 10.0)[index % 3]


def n_ordered_partitions(m, k):
    size = m // k
    return math.factorial(m) // math.factorial(size) ** k
