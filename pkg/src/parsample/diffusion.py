"""Parallel simulation of discretised stochastic localization.

The process ``dX_t = f(t, X_t) dt + dB_t`` started at 0, with ``f`` the
Gaussian denoiser, satisfies ``X_t / t -> X ~ mu``.  Its Euler-Maruyama
discretisation is a chain of Gaussian increments whose mean depends on
the running sum, which makes it a target for recursive speculation: a
block of steps is proposed with the drift frozen at the block start, and
the exact Gaussian density ratio corrects it.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _gaussjit as gk
from .coordinate import SampleResult
from .engine import (
    BookkeepingError,
    BudgetExceeded,
    RecursiveSampler,
    RsConfig,
    build_staged_tree,
)
from .gaussian import NoisyGaussianOracle
from .streams import RandomSource

EULER_CHUNK = 64


@dataclass
class Schedule:
    R: float
    delta: float
    eps_tv: float
    n: int
    L: int
    N: int
    endpoints: np.ndarray  # (L + 1,) stage boundaries
    times: np.ndarray  # (N L + 1,) step grid

    @property
    def steps(self):
        return self.N * self.L

    @property
    def dt(self):
        return np.diff(self.times)


def build_schedule(R, delta, eps_tv, n):
    """Stage boundaries doubling from ``1/R`` up to ``1/delta``, N steps each.

    ``L = ceil(log2(R/delta)) + 1`` stages with boundaries ``0``,
    ``2^(i-1) / R`` for ``1 <= i <= L-1`` and ``1/delta``.  Every stage is cut
    into ``N = 2^ceil(log2 max(R^2/delta, R^4/delta^2, n/eps^2))`` equal steps.
    """
    for name, v in (("R", R), ("delta", delta), ("eps_tv", eps_tv)):
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be finite and positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    L = max(1, math.ceil(math.log2(R / delta)) + 1)
    big = max(R**2 / delta, R**4 / delta**2, n / eps_tv**2)
    N = 1 << max(0, math.ceil(math.log2(big)))
    ends = [0.0] + [2.0 ** (i - 1) / R for i in range(1, L)] + [1.0 / delta]
    ends = np.array(ends)
    grid = [np.linspace(ends[i], ends[i + 1], N + 1)[:-1] for i in range(L)]
    times = np.concatenate(grid + [ends[-1:]])
    return Schedule(float(R), float(delta), float(eps_tv), int(n), L, N, ends, times)


def check_score_noise(eps_score, schedule):
    """Reject score errors above ``min(delta eps_tv^2, delta n / N)``."""
    s = schedule
    limit = min(s.delta * s.eps_tv**2, s.delta * s.n / s.N)
    if eps_score**2 > limit:
        raise ValueError(
            f"eps_score^2 = {eps_score**2:.3g} exceeds the admissible {limit:.3g}")


@dataclass
class DiffusionState:
    U: np.ndarray  # (B, n) sum of the increments so far


def kernel_params(target):
    """(atoms, log weights, squared norms, score noise) for the kernels."""
    eps = 0.0
    if isinstance(target, NoisyGaussianOracle):
        target, eps = target.inner, target.eps_score
    return target.atoms, target._logw, target._sq, float(eps)


class GaussianScheme:
    """Frozen-drift speculation over Euler-Maruyama increments."""

    def __init__(self, target, schedule):
        self.target, self.schedule = target, schedule
        self.times = schedule.times
        self.dts = schedule.dt
        self.params = kernel_params(target)

    def size(self, lo, hi):
        return hi - lo

    def take(self, state, idx):
        return DiffusionState(state.U[idx])

    def concat(self, states):
        return DiffusionState(np.concatenate([s.U for s in states]))

    def extend(self, state, lo, hi, block):
        return DiffusionState(gk.extend_rows(state.U, block))

    def speculate(self, state, lo, hi, rng):
        g = rng.normal(hi - lo, state.U.shape[1])
        return gk.speculate_rows(lo, state.U, g, self.times, self.dts, *self.params)

    def drifts(self, state, lo, hi, block):
        """Denoiser at every step start along the block, shape (B, m, n)."""
        B, m, n = block.shape
        before = state.U[:, None, :] + np.cumsum(block, axis=1) - block
        t = np.broadcast_to(self.times[lo:hi], (B, m)).reshape(-1)
        return gk.drift_rows(np.ascontiguousarray(t), before.reshape(B * m, n),
                             *self.params).reshape(B, m, n)

    def log_ratio(self, state, lo, hi, block):
        return gk.log_ratio_rows(lo, state.U, block, self.times, self.dts, *self.params)


def _flatten(tree):
    nodes = list(tree.nodes())
    index = {id(nd): i for i, nd in enumerate(nodes)}
    lo = np.array([nd.lo for nd in nodes], dtype=np.int64)
    hi = np.array([nd.hi for nd in nodes], dtype=np.int64)
    spec = np.array([nd.speculate for nd in nodes], dtype=np.bool_)
    nkids = np.array([len(nd.children) for nd in nodes], dtype=np.int64)
    first = np.concatenate([[0], np.cumsum(nkids)[:-1]]).astype(np.int64)
    kids = np.array([index[id(c)] for nd in nodes for c in nd.children], dtype=np.int64)
    return index[id(tree.root)], lo, hi, spec, first, nkids, kids


class CompiledRun:
    """Bookkeeping counters of a compiled run (same names as the engine's)."""

    def __init__(self, stats):
        self.visits, self.fallback_visits = int(stats[0]), int(stats[1])
        self.violations, self.max_calls = int(stats[2]), int(stats[3])
        self.records = []


def _compiled(target, schedule, tree, config, streams):
    stats = np.zeros(5, dtype=np.int64)
    sums, rounds, queries = gk.run_rows(
        streams.keys, target.n, *_flatten(tree), schedule.times, schedule.dt,
        *kernel_params(target), float(config.rho), int(config.max_fallback_budget), stats)
    if stats[4] == gk.ERR_BUDGET:
        raise BudgetExceeded(f"a node exceeded {config.max_fallback_budget} fallback calls")
    if stats[4] == gk.ERR_BOOKKEEPING:
        raise BookkeepingError("a visit issued more than (1+rho)*i* fallback calls")
    return sums, rounds, queries, CompiledRun(stats)


def _streams(seed, samples, rng):
    if rng is not None:
        return rng
    if samples is None:
        raise ValueError("give either rng or samples")
    return RandomSource(seed).spawn(samples)


def _check_noise(target, schedule):
    if isinstance(target, NoisyGaussianOracle):
        check_score_noise(target.eps_score, schedule)
        return True
    return False


def sample_diffusion(target, schedule, rho=None, tree=None, seed=0, samples=None,
                     rng=None, trace=False, budget=10**6, chunk=2000, compiled=None):
    """Samples of ``delta * (sum of increments)`` by recursive speculation.

    The output has the same law as :func:`euler_baseline` on the same
    schedule.  The default tree has a non-speculating root over the
    ``L`` stages, each a full binary tree over its ``N`` steps.

    `compiled` selects the per-row compiled engine (default: whenever no
    trace is requested).  Both engines give the same samples and costs.
    """
    approx = _check_noise(target, schedule)
    streams = _streams(seed, samples, rng)
    tree = tree if tree is not None else build_staged_tree(schedule.L, schedule.N)
    if tree.N != schedule.steps:
        raise ValueError("tree size does not match the number of steps")
    config = RsConfig(rho if rho is not None else tree.default_rho(), budget)
    if compiled is None:
        compiled = not trace
    if compiled:
        if trace:
            raise ValueError("the compiled engine does not record traces")
        sums, rounds, queries, eng = _compiled(target, schedule, tree, config, streams)
        return SampleResult(sums / schedule.times[-1], rounds, queries,
                            {"engine": eng, "tree": tree, "rho": config.rho,
                             "approximate": approx})
    eng = RecursiveSampler(tree, GaussianScheme(target, schedule), config, trace=trace)
    M, n = len(streams), target.n
    x = np.empty((M, n))
    rounds = np.empty(M, dtype=np.int64)
    queries = np.empty(M, dtype=np.int64)
    for start in range(0, M, chunk):
        sl = np.arange(start, min(M, start + chunk))
        state = DiffusionState(np.zeros((sl.size, n)))
        block, r, q = eng.run(state, streams.take(sl), sample_ids=sl)
        x[sl] = gk.extend_rows(np.zeros((sl.size, n)), block) / schedule.times[-1]
        rounds[sl], queries[sl] = r, q
    return SampleResult(x, rounds, queries,
                        {"engine": eng, "tree": tree, "rho": config.rho, "approximate": approx})


def euler_baseline(target, schedule, seed=0, samples=None, rng=None):
    """Euler-Maruyama over the whole grid: one round per step."""
    approx = _check_noise(target, schedule)
    streams = _streams(seed, samples, rng)
    M, n = len(streams), target.n
    U = np.zeros((M, n))
    dts, times = schedule.dt, schedule.times
    total = schedule.steps
    for start in range(0, total, EULER_CHUNK):
        stop = min(total, start + EULER_CHUNK)
        g = streams.normal(stop - start, n)
        for k in range(start, stop):
            U = U + dts[k] * target.denoise(times[k], U) + math.sqrt(dts[k]) * g[:, k - start]
    cost = np.full(M, total, dtype=np.int64)
    return SampleResult(U / times[-1], cost, cost.copy(), {"approximate": approx})


def ito_identity_check(target, t0, t1, paths=10**5, dt_fine=1e-3, seed=0):
    """Monte-Carlo check of ``E|f(t1) - f(t0)|^2 = E tr Sigma_t0 - E tr Sigma_t1``.

    Paths of the localization SDE are simulated by fine Euler steps from 0,
    so the result carries a small discretisation bias.

    Returns
    -------
    (lhs, rhs, rel_err)
    """
    if not 0 <= t0 < t1:
        raise ValueError("need 0 <= t0 < t1")
    rng = RandomSource(seed).spawn(paths)
    n = target.n
    X = np.zeros((paths, n))

    def advance(X, t, until):
        if until <= t:
            return X
        steps = math.ceil((until - t) / dt_fine - 1e-9)
        h = (until - t) / steps
        for start in range(0, steps, EULER_CHUNK):
            g = rng.normal(min(EULER_CHUNK, steps - start), n)
            for j in range(g.shape[1]):
                X = X + h * target.denoise(t + (start + j) * h, X) + math.sqrt(h) * g[:, j]
        return X

    X = advance(X, 0.0, t0)
    f0, s0 = target.denoise(t0, X), target.cov_trace(t0, X)
    X = advance(X, t0, t1)
    f1, s1 = target.denoise(t1, X), target.cov_trace(t1, X)
    lhs = float(((f1 - f0) ** 2).sum(axis=1).mean())
    rhs = float(s0.mean() - s1.mean())
    rel = 0.0 if max(abs(lhs), abs(rhs)) < 1e-15 else abs(lhs - rhs) / abs(rhs)
    return lhs, rhs, rel
