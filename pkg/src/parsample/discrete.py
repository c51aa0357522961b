"""Coordinate-denoiser oracles for distributions on ``[q]^n``.

A coordinate denoiser answers conditional-marginal queries: given a pinned
set ``S`` with values ``x_S`` and a free index ``i``, it returns the law of
``X_i`` given ``X_S = x_S`` as a length-``q`` probability vector.

Backends work on batches.  A batch of pinnings is an integer array
``assign`` of shape ``(B, n)`` holding the pinned value of each coordinate
or ``-1`` when the coordinate is free.
"""

import json
import math

import numpy as np

MAX_JOINT = 2**24
_TINY = 1e-300


class UnrealizableError(ValueError):
    """A conditional was requested on a zero-probability pinning."""


def draw_categorical(probs, u):
    """Inverse-CDF draw from the last axis of `probs` using uniforms `u`.

    Only symbols with positive probability can be returned, even when the
    cumulative sum falls short of one by rounding.
    """
    cdf = np.cumsum(probs, axis=-1)
    target = u * cdf[..., -1]
    return np.sum(cdf <= target[..., None], axis=-1)


class DiscreteTarget:
    """Base class for coordinate-denoiser backends.

    Subclasses implement ``_marginals`` (NaN rows for unrealizable
    pinnings) and may override ``_sequential`` with something faster than
    the generic pin-one-at-a-time loop.
    """

    n = 0
    q = 0

    # -- batched interface -------------------------------------------------
    def marginals(self, assign, coords):
        """Conditionals ``P(X_c | pinned)`` for each column of `coords`.

        Parameters
        ----------
        assign : int array, shape (B, n)
        coords : int array, shape (B, m)
            Free coordinates to query, per row.

        Returns
        -------
        float array, shape (B, m, q)
        """
        assign = np.asarray(assign)
        coords = np.asarray(coords, dtype=np.intp)
        rows = np.arange(assign.shape[0])[:, None]
        if coords.size and np.any(assign[rows, coords] >= 0):
            raise ValueError("queried coordinate is already pinned")
        out = self._marginals(assign, coords)
        if np.isnan(out).any():
            raise UnrealizableError("conditioning on a zero-probability event")
        return out

    def sequential_marginals(self, assign, coords, values):
        """Chain-rule conditionals along a block.

        Entry ``[b, j]`` is the law of ``X_{coords[b, j]}`` given the pinning
        ``assign[b]`` extended by ``coords[b, r] = values[b, r]`` for all
        ``r < j``.  Rows whose extended pinning has probability zero are NaN;
        callers detect the first zero numerator before reaching them.
        """
        return self._sequential(np.asarray(assign), np.asarray(coords, dtype=np.intp),
                                np.asarray(values))

    def _sequential(self, assign, coords, values):
        a = assign.copy()
        rows = np.arange(a.shape[0])
        out = np.empty(coords.shape + (self.q,))
        for j in range(coords.shape[1]):
            out[:, j] = self._marginals(a, coords[:, j:j + 1])[:, 0]
            a[rows, coords[:, j]] = values[:, j]
        return out

    def _marginals(self, assign, coords):
        raise NotImplementedError

    # -- scalar interface --------------------------------------------------
    def _pinning(self, S, x_S):
        assign = np.full((1, self.n), -1, dtype=np.int64)
        S = list(S)
        if S:
            assign[0, S] = list(x_S)
        return assign

    def conditional_marginal(self, S, x_S, i):
        """Law of ``X_i`` given ``X_S = x_S`` (0-based indices)."""
        if i in set(S):
            raise ValueError(f"index {i} is in the conditioning set")
        return self.marginals(self._pinning(S, x_S), np.array([[i]]))[0, 0]

    def sample_conditional(self, S, x_S, i, rng):
        """One draw of ``X_i`` given ``X_S = x_S`` from a 1-row `rng`."""
        p = self.conditional_marginal(S, x_S, i)
        return int(draw_categorical(p, rng.uniform()[0]))

    def exact_joint(self):
        """Full joint law as a flat array over ``[q]^n`` in C order."""
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


def _guard_joint(n, q):
    if q**n > MAX_JOINT:
        raise ValueError(f"joint of size {q}^{n} exceeds the 2^24 guard")


def _normalise_rows(w):
    z = w.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = w / z
    out[np.broadcast_to(z < _TINY, out.shape)] = np.nan
    return out


class ExplicitTable(DiscreteTarget):
    """Ground-truth backend holding the full joint table.

    Conditionals are computed once per distinct pinning and cached; small
    key spaces use a dense cache indexed by a base-``(q+1)`` pinning code.
    """

    def __init__(self, probs, n, q):
        probs = np.asarray(probs, dtype=np.float64).reshape(-1)
        if n * math.log2(q) > 24:
            raise ValueError("table too large: n*log2(q) must be <= 24")
        if probs.shape[0] != q**n:
            raise ValueError(f"expected {q**n} probabilities, got {probs.shape[0]}")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be nonnegative and sum to 1")
        self.n, self.q = int(n), int(q)
        self.probs = probs
        self._cube = probs.reshape((q,) * n)
        self._pow = (q + 1) ** np.arange(n, dtype=np.int64)
        nkeys = (q + 1) ** n
        if nkeys * n * q <= 2**23:
            self._dense = np.empty((nkeys, n, q))
            self._known = np.zeros(nkeys, dtype=bool)
        else:
            self._dense = None
            self._cache = {}

    def _decode(self, key):
        digits = (key // self._pow) % (self.q + 1)
        return digits.astype(np.int64) - 1

    def _solve(self, assign_row):
        idx = tuple(slice(None) if v < 0 else int(v) for v in assign_row)
        sub = self._cube[idx]
        z = sub.sum()
        out = np.zeros((self.n, self.q))
        if z < _TINY:
            out[:] = np.nan
            return out
        free = [i for i, v in enumerate(assign_row) if v < 0]
        for ax, i in enumerate(free):
            others = tuple(a for a in range(len(free)) if a != ax)
            out[i] = sub.sum(axis=others) / z
        for i, v in enumerate(assign_row):
            if v >= 0:
                out[i, v] = 1.0
        return out

    def _fill(self, flat):
        missing = np.unique(flat[~self._known[flat]])
        for k in missing:
            self._dense[k] = self._solve(self._decode(k))
        self._known[missing] = True

    def _conditional_rows(self, keys, coords):
        # keys: (B, m) pinning codes; coords: (B, m)
        flat = keys.reshape(-1)
        col = coords.reshape(-1)
        if self._dense is not None:
            self._fill(flat)
            return self._dense[flat, col].reshape(coords.shape + (self.q,))
        uniq, inv = np.unique(flat, return_inverse=True)
        tables = []
        for k in uniq.tolist():
            if k not in self._cache:
                self._cache[k] = self._solve(self._decode(np.int64(k)))
            tables.append(self._cache[k])
        return np.stack(tables)[inv.reshape(-1), col].reshape(coords.shape + (self.q,))

    def _marginals(self, assign, coords):
        keys = (assign.astype(np.int64) + 1) @ self._pow
        keys = np.broadcast_to(keys[:, None], coords.shape)
        return self._conditional_rows(np.ascontiguousarray(keys), coords)

    def _sequential(self, assign, coords, values):
        base = (assign.astype(np.int64) + 1) @ self._pow
        inc = (values.astype(np.int64) + 1) * self._pow[coords]
        keys = base[:, None] + np.cumsum(inc, axis=1) - inc
        return self._conditional_rows(keys, coords)

    def exact_joint(self):
        return self.probs.copy()

    def to_dict(self):
        return {"type": "table", "n": self.n, "q": self.q, "probs": self.probs.tolist()}


def _prev_smaller(t):
    """For each column k, the largest k' < k with ``t[k'] < t[k]`` (or -1).

    Row-wise binary lifting over a sparse table of window minima.
    """
    B, m = t.shape
    if m == 0:
        return np.empty_like(t)
    levels = [t]
    span = 1
    while 2 * span <= m:
        prev = levels[-1]
        nxt = prev.copy()
        nxt[:, : m - span] = np.minimum(prev[:, : m - span], prev[:, span:])
        levels.append(nxt)
        span *= 2
    cur = np.broadcast_to(np.arange(m), (B, m)).copy()
    rows = np.arange(B)[:, None]
    for s in range(len(levels) - 1, -1, -1):
        step = 1 << s
        start = cur - step
        ok = start >= 0
        window_min = levels[s][rows, np.where(ok, start, 0)]
        jump = ok & (window_min > t)
        cur = np.where(jump, start, cur)
    return cur - 1


class MarkovChainTarget(DiscreteTarget):
    """Homogeneous Markov chain ``X_1 -> X_2 -> ... -> X_n``.

    Given a pinned set, ``X_i`` depends only on the nearest pinned neighbour
    on each side, so each conditional is a product of two rows of matrix
    powers of the transition matrix.
    """

    def __init__(self, init, trans, n):
        init = np.asarray(init, dtype=np.float64)
        trans = np.asarray(trans, dtype=np.float64)
        q = init.shape[0]
        if trans.shape != (q, q):
            raise ValueError("trans must be q x q")
        if np.any(init < 0) or np.any(trans < 0):
            raise ValueError("negative probabilities")
        if abs(init.sum() - 1) > 1e-12 or np.any(np.abs(trans.sum(axis=1) - 1) > 1e-12):
            raise ValueError("init and rows of trans must sum to 1")
        self.n, self.q = int(n), q
        self.init, self.trans = init, trans
        pw = np.empty((self.n + 1, q, q))
        pw[0] = np.eye(q)
        for k in range(1, self.n + 1):
            pw[k] = pw[k - 1] @ trans
        self._pw = pw
        self._marg = init @ pw[: self.n]  # (n, q): law of X_p

    @classmethod
    def sticky(cls, n, q=2, p_stay=0.99):
        """Uniform start; stay with probability `p_stay`, else jump uniformly."""
        trans = np.full((q, q), (1 - p_stay) / (q - 1))
        np.fill_diagonal(trans, p_stay)
        return cls(np.full(q, 1.0 / q), trans, n)

    def _combine(self, pos, left, lval, right, rval):
        # pos, left, right: (B, m); left=-1 / right=n mean "no neighbour"
        has_l = left >= 0
        has_r = right < self.n
        gap_l = np.where(has_l, pos - left, 0)
        gap_r = np.where(has_r, right - pos, 0)
        fwd = np.where(
            has_l[..., None],
            self._pw[gap_l, np.where(has_l, lval, 0)],
            self._marg[pos],
        )
        bwd = np.where(
            has_r[..., None],
            self._pw[gap_r, :, np.where(has_r, rval, 0)],
            1.0,
        )
        return _normalise_rows(fwd * bwd)

    def _neighbours(self, assign):
        n = self.n
        pinned = assign >= 0
        ar = np.arange(n)
        left = np.maximum.accumulate(np.where(pinned, ar, -1), axis=1)
        right = np.minimum.accumulate(np.where(pinned, ar, n)[:, ::-1], axis=1)[:, ::-1]
        return left, right

    def _marginals(self, assign, coords):
        left, right = self._neighbours(assign)
        rows = np.arange(assign.shape[0])[:, None]
        lft = left[rows, coords]
        rgt = right[rows, coords]
        lval = assign[rows, np.maximum(lft, 0)]
        rval = assign[rows, np.minimum(rgt, self.n - 1)]
        return self._combine(coords, lft, lval, rgt, rval)

    def _sequential(self, assign, coords, values):
        B, m = coords.shape
        rows = np.arange(B)[:, None]
        left, right = self._neighbours(assign)
        pl = left[rows, coords]
        pr = right[rows, coords]
        # nearest earlier-inserted block element on each side, by position
        order = np.argsort(coords, axis=1, kind="stable")
        spos = np.take_along_axis(coords, order, axis=1)
        prev = _prev_smaller(order)
        nxt = m - 1 - _prev_smaller(order[:, ::-1])[:, ::-1]
        nxt = np.where(nxt >= m, -1, nxt)
        bl = np.full((B, m), -1)
        br = np.full((B, m), self.n)
        blv = np.zeros((B, m), dtype=np.int64)
        brv = np.zeros((B, m), dtype=np.int64)
        sval = np.take_along_axis(values, order, axis=1)
        has = prev >= 0
        np.put_along_axis(bl, order, np.where(has, spos[rows, np.maximum(prev, 0)], -1), axis=1)
        np.put_along_axis(blv, order, np.where(has, sval[rows, np.maximum(prev, 0)], 0), axis=1)
        has = nxt >= 0
        np.put_along_axis(br, order, np.where(has, spos[rows, np.maximum(nxt, 0)], self.n), axis=1)
        np.put_along_axis(brv, order, np.where(has, sval[rows, np.maximum(nxt, 0)], 0), axis=1)
        use_bl = bl > pl
        lft = np.where(use_bl, bl, pl)
        lval = np.where(use_bl, blv, assign[rows, np.maximum(pl, 0)])
        use_br = br < pr
        rgt = np.where(use_br, br, pr)
        rval = np.where(use_br, brv, assign[rows, np.minimum(pr, self.n - 1)])
        return self._combine(coords, lft, lval, rgt, rval)

    def exact_joint(self):
        _guard_joint(self.n, self.q)
        joint = self.init.copy()
        for _ in range(self.n - 1):
            joint = (joint[..., None] * self.trans[(None,) * (joint.ndim - 1)]).reshape(
                joint.shape[:-1] + (self.q, self.q))
        return joint.reshape(-1)

    def to_dict(self):
        return {"type": "markov", "n": self.n, "q": self.q,
                "init": self.init.tolist(), "trans": self.trans.tolist()}


class AllEqualMixture(DiscreteTarget):
    """``(1 - lam) * Uniform([q]^n) + lam * Uniform(all-equal strings)``."""

    def __init__(self, lam, n, q):
        if not 0.0 <= lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        self.lam, self.n, self.q = float(lam), int(n), int(q)

    def _marginals(self, assign, coords):
        q, lam = self.q, self.lam
        pinned = assign >= 0
        k = pinned.sum(axis=1)
        hi = np.where(pinned, assign, -1).max(axis=1)
        lo = np.where(pinned, assign, q).min(axis=1)
        agree = (k == 0) | (hi == lo)
        # P(pinned) and P(pinned, X_i = x) up to the common factor q^-k
        spread = (1 - lam) * float(q) ** -k
        base = spread / q
        same = lam / q
        z = np.where(k == 0, 1.0, spread + np.where(agree, same, 0.0))
        w = np.broadcast_to(base[:, None, None], coords.shape + (q,)).copy()
        c = np.where(k > 0, hi, -1)
        x = np.arange(q)
        hit = agree[:, None, None] & ((k == 0)[:, None, None] | (x == c[:, None, None]))
        extra = np.where(k == 0, lam / q, same)
        w = w + np.where(hit, extra[:, None, None], 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = w / z[:, None, None]
        out[np.broadcast_to((z < _TINY)[:, None, None], out.shape)] = np.nan
        return out

    def exact_joint(self):
        _guard_joint(self.n, self.q)
        p = np.full(self.q**self.n, (1 - self.lam) / self.q**self.n)
        step = sum(self.q**j for j in range(self.n))
        p[np.arange(self.q) * step] += self.lam / self.q
        return p

    def to_dict(self):
        return {"type": "allequal", "n": self.n, "q": self.q, "lambda": self.lam}


class NoisyDiscreteOracle(DiscreteTarget):
    """Deterministically perturbed oracle.

    Every returned conditional is mixed with the uniform law at weight
    `eps_tv`, which moves it by at most `eps_tv` in total variation.
    """

    def __init__(self, inner, eps_tv):
        if not 0.0 <= eps_tv <= 1.0:
            raise ValueError("eps_tv must lie in [0, 1]")
        self.inner, self.eps_tv = inner, float(eps_tv)
        self.n, self.q = inner.n, inner.q

    def _perturb(self, p):
        if self.eps_tv == 0.0:
            return p
        return (1.0 - self.eps_tv) * p + self.eps_tv / self.q

    def _marginals(self, assign, coords):
        return self._perturb(self.inner._marginals(assign, coords))

    def _sequential(self, assign, coords, values):
        return self._perturb(self.inner._sequential(assign, coords, values))

    def exact_joint(self):
        return self.inner.exact_joint()

    def to_dict(self):
        d = self.inner.to_dict()
        d["noise_tv"] = self.eps_tv
        return d


def target_from_dict(spec):
    """Build a target from its JSON description."""
    kind = spec.get("type")
    n, q = int(spec["n"]), int(spec["q"])
    if kind == "table":
        target = ExplicitTable(spec["probs"], n, q)
    elif kind == "markov":
        target = MarkovChainTarget(spec["init"], spec["trans"], n)
        if target.q != q:
            raise ValueError("q does not match init length")
    elif kind == "allequal":
        target = AllEqualMixture(spec["lambda"], n, q)
    else:
        raise ValueError(f"unknown target type {kind!r}")
    if spec.get("noise_tv"):
        target = NoisyDiscreteOracle(target, float(spec["noise_tv"]))
    return target


def load_target(path):
    with open(path) as fh:
        return target_from_dict(json.load(fh))


def random_table(n, q, alpha, rng):
    """Joint drawn from a symmetric Dirichlet(`alpha`) over ``q^n`` cells.

    `rng` is a :class:`numpy.random.Generator`.
    """
    p = rng.dirichlet(np.full(q**n, alpha))
    p = p / p.sum()
    return ExplicitTable(p, n, q)
