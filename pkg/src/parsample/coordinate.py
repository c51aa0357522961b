"""Parallel sampling from a coordinate denoiser.

Coordinates are visited in a fresh uniformly random order per sample.  A
tree node covering positions ``lo..hi-1`` of that order speculates its
whole block from the product of the coordinates' marginals given the
prefix, and the chain rule gives the exact density ratio in one extra
round.

Positions past ``n`` (padding up to the tree size) are constant dummies
that cost nothing.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .discrete import NoisyDiscreteOracle, draw_categorical
from .engine import (
    RecursiveSampler,
    RsConfig,
    build_binary_tree,
    build_root_heavy_tree,
    next_pow2,
)
from .infotheory import tv_distance
from .streams import RandomSource

CHUNK = 500000
MAX_AUDIT_BLOCK = 4096


@dataclass
class CoordState:
    assign: np.ndarray  # (B, n) pinned values in original coordinates, -1 free
    sigma: np.ndarray  # (B, n) coordinate visited at each position


@dataclass
class SampleResult:
    x: np.ndarray
    rounds: np.ndarray
    queries: np.ndarray
    info: dict = field(default_factory=dict)


class CoordinateScheme:
    """Product-of-marginals speculation for a :class:`DiscreteTarget`."""

    def __init__(self, target):
        self.target = target
        self.n = target.n

    def size(self, lo, hi):
        return max(0, min(hi, self.n) - lo)

    def take(self, state, idx):
        return CoordState(state.assign[idx], state.sigma[idx])

    def concat(self, states):
        return CoordState(np.concatenate([s.assign for s in states]),
                          np.concatenate([s.sigma for s in states]))

    def extend(self, state, lo, hi, block):
        r = self.size(lo, hi)
        if r == 0:
            return state
        assign = state.assign.copy()
        rows = np.arange(assign.shape[0])[:, None]
        assign[rows, state.sigma[:, lo:lo + r]] = block[:, :r]
        return CoordState(assign, state.sigma)

    def speculate(self, state, lo, hi, rng):
        B = state.assign.shape[0]
        block = np.zeros((B, hi - lo), dtype=np.int64)
        r = self.size(lo, hi)
        if r:
            p = self.target.marginals(state.assign, state.sigma[:, lo:lo + r])
            block[:, :r] = draw_categorical(p, rng.uniform(r))
        return block

    def log_ratio(self, state, lo, hi, block):
        r = self.size(lo, hi)
        if r == 0:
            return np.zeros(block.shape[0])
        coords = state.sigma[:, lo:lo + r]
        vals = block[:, :r]
        num = self.target.sequential_marginals(state.assign, coords, vals)
        den = self.target.marginals(state.assign, coords)
        pn = np.take_along_axis(num, vals[..., None], axis=2)[..., 0]
        pd = np.take_along_axis(den, vals[..., None], axis=2)[..., 0]
        dead = ~(pn > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.where(dead, 0.0, np.log(np.where(dead, 1.0, pn)) - np.log(pd)).sum(axis=1)
        return np.where(dead.any(axis=1), -np.inf, lr)

    def block_laws(self, state, lo, hi):
        """Exact ``mu_S`` and ``nu_S`` over all ``q^r`` blocks, shape (B, q^r)."""
        r = self.size(lo, hi)
        q = self.target.q
        B = state.assign.shape[0]
        blocks = np.array(list(itertools.product(range(q), repeat=r)), dtype=np.int64)
        K = blocks.shape[0]
        rows = np.repeat(np.arange(B), K)
        assign = state.assign[rows]
        coords = state.sigma[rows, lo:lo + r]
        vals = np.tile(blocks, (B, 1))
        num = self.target.sequential_marginals(assign, coords, vals)
        den = self.target.marginals(assign, coords)
        pn = np.take_along_axis(num, vals[..., None], axis=2)[..., 0]
        pd = np.take_along_axis(den, vals[..., None], axis=2)[..., 0]
        # rows past a zero numerator may be NaN; the product is zero anyway
        mu = np.prod(np.nan_to_num(pn, nan=0.0), axis=1)
        nu = np.prod(pd, axis=1)
        return mu.reshape(B, K), nu.reshape(B, K)

    def exact_dtv(self, state, lo, hi):
        r = self.size(lo, hi)
        B = state.assign.shape[0]
        if r <= 1:
            return np.zeros(B)
        if self.target.q**r > MAX_AUDIT_BLOCK:
            return np.full(B, np.nan)
        mu, nu = self.block_laws(state, lo, hi)
        return 0.5 * np.abs(mu - nu).sum(axis=1)


def parse_tree(kind):
    """``"binary"`` or ``"root-heavy:h"`` -> (name, h)."""
    if kind in (None, "binary"):
        return "binary", None
    if kind.startswith("root-heavy:"):
        h = int(kind.split(":", 1)[1])
        if h < 1:
            raise ValueError("root-heavy height must be >= 1")
        return "root-heavy", h
    raise ValueError(f"unknown tree kind {kind!r}")


def make_tree(n, kind="binary"):
    name, h = parse_tree(kind)
    if name == "binary":
        return build_binary_tree(next_pow2(n))
    return build_root_heavy_tree(n, h)


def random_permutations(rng, n):
    """One uniform permutation per row of `rng` (argsort of uniforms)."""
    return np.argsort(rng.uniform(n), axis=1, kind="stable")


def _streams(seed, samples, rng):
    if rng is not None:
        return rng
    if samples is None:
        raise ValueError("give either rng or samples")
    return RandomSource(seed).spawn(samples)


def sample_any_order(target, tree_kind="binary", rho=None, seed=0, samples=None,
                     rng=None, trace=False, audit=False, budget=10**6, chunk=CHUNK):
    """Exact samples from `target` by recursive speculation.

    Parameters
    ----------
    target : DiscreteTarget
    tree_kind : "binary" or "root-heavy:h", or a prebuilt FallbackTree
    rho : float, optional
        Batch growth; defaults to one over the height of the speculating
        subtrees.
    seed, samples : int
        Build `samples` per-sample streams from `seed` (ignored if `rng`).
    rng : RandomSource, optional
        One row per sample.

    Returns
    -------
    SampleResult
        ``x`` has shape (M, n) in original coordinate order; ``info`` holds
        the engine (bookkeeping counters, optional trace) and flags.
    """
    streams = _streams(seed, samples, rng)
    n = target.n
    tree = tree_kind if hasattr(tree_kind, "root") else make_tree(n, tree_kind)
    if tree.N < n:
        raise ValueError("tree smaller than the number of coordinates")
    config = RsConfig(rho if rho is not None else tree.default_rho(), budget)
    scheme = CoordinateScheme(target)
    eng = RecursiveSampler(tree, scheme, config, trace=trace, audit=audit)
    M = len(streams)
    x = np.empty((M, n), dtype=np.int64)
    rounds = np.empty(M, dtype=np.int64)
    queries = np.empty(M, dtype=np.int64)
    for start in range(0, M, chunk):
        sl = np.arange(start, min(M, start + chunk))
        sub = streams.take(sl)
        sigma = random_permutations(sub.child(0), n)
        state = CoordState(np.full((sl.size, n), -1, dtype=np.int64), sigma)
        block, r, q = eng.run(state, sub.child(1), sample_ids=sl)
        out = np.empty((sl.size, n), dtype=np.int64)
        np.put_along_axis(out, sigma, block[:, :n], axis=1)
        x[sl], rounds[sl], queries[sl] = out, r, q
    info = {"engine": eng, "tree": tree, "rho": config.rho,
            "approximate": isinstance(target, NoisyDiscreteOracle)}
    return SampleResult(x, rounds, queries, info)


def sequential_baseline(target, seed=0, samples=None, rng=None):
    """Autoregressive sampling in the fixed order ``0..n-1``: n rounds."""
    streams = _streams(seed, samples, rng)
    n, M = target.n, len(streams)
    u = streams.uniform(n)
    assign = np.full((M, n), -1, dtype=np.int64)
    for j in range(n):
        p = target.marginals(assign, np.full((M, 1), j))[:, 0]
        assign[:, j] = draw_categorical(p, u[:, j])
    cost = np.full(M, n, dtype=np.int64)
    return SampleResult(assign, cost, cost.copy(),
                        {"approximate": isinstance(target, NoisyDiscreteOracle)})


def level_tv_sums(target, tree=None, perms=None, rng=None):
    """Expected per-level sum of ``d_TV(mu_S, nu_S)`` over speculating nodes.

    The expectation is over the prefix drawn from the target and over the
    coordinate order: all ``n!`` orders when `perms` is None, otherwise
    `perms` orders drawn with the numpy Generator `rng`.

    Returns an array with one entry per tree level.
    """
    n, q = target.n, target.q
    tree = tree if tree is not None else make_tree(n)
    P = target.exact_joint().reshape((q,) * n)
    if perms is None:
        orders = list(itertools.permutations(range(n)))
    else:
        orders = [tuple(rng.permutation(n)) for _ in range(perms)]
    levels = np.zeros(tree.height + 1)
    nodes = []

    def walk(node, d):
        if node.speculate and not node.is_leaf:
            nodes.append((node, d))
        for c in node.children:
            walk(c, d + 1)

    walk(tree.root, 0)
    for order in orders:
        Ps = np.transpose(P, order)
        for node, d in nodes:
            lo, hi = node.lo, min(node.hi, n)
            r = hi - lo
            if r <= 1:
                continue
            Q = Ps.sum(axis=tuple(range(hi, n))).reshape(q**lo, q**r)
            w = Q.sum(axis=1)
            live = w > 0
            cond = Q[live] / w[live, None]
            cube = cond.reshape((-1,) + (q,) * r)
            nu = np.ones_like(cube)
            for a in range(r):
                marg = cube.sum(axis=tuple(b + 1 for b in range(r) if b != a))
                shape = [cube.shape[0]] + [1] * r
                shape[a + 1] = q
                nu = nu * marg.reshape(shape)
            dtv = 0.5 * np.abs(cube - nu).reshape(cube.shape[0], -1).sum(axis=1)
            levels[d] += float(w[live] @ dtv) / len(orders)
    return levels


def potential_bound(n, q):
    return math.sqrt(n * math.log(q))


def block_tv(target, S, prefix_coords=(), prefix_vals=()):
    """``d_TV`` between the block law of `S` and its product of marginals."""
    n = target.n
    assign = np.full((1, n), -1, dtype=np.int64)
    if len(prefix_coords):
        assign[0, list(prefix_coords)] = list(prefix_vals)
    sigma = np.array([list(prefix_coords) + list(S)
                      + [i for i in range(n) if i not in set(S) | set(prefix_coords)]])
    scheme = CoordinateScheme(target)
    lo = len(prefix_coords)
    mu, nu = scheme.block_laws(CoordState(assign, sigma), lo, lo + len(S))
    return tv_distance(mu[0], nu[0])
