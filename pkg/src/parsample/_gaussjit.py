"""Compiled kernels for the Gaussian scheme.

The batched scheme and the per-row compiled engine call the same row
kernels, so both produce the same floating-point values for the same
streams.  Stream arithmetic mirrors :mod:`parsample.streams` exactly.
"""

import math

import numpy as np
from numba import njit

from ._normal import ndtri_scalar as _ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SALT = np.uint64(0xD1B54A32D192ED03)
_ONE = np.uint64(1)
_TWO53 = 2.0**-53
LOG_CLAMP = 745.0

ERR_BUDGET = 1
ERR_BOOKKEEPING = 2


@njit(cache=True)
def _mix(x):
    z = x ^ (x >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _child(key, label):
    return _mix(_mix(key ^ _SALT) + _GOLDEN * (np.uint64(label) + _ONE))


@njit(cache=True)
def _uniform(key, ctr):
    b = _mix(key + _GOLDEN * (np.uint64(ctr) + _ONE))
    return (float(b >> np.uint64(11)) + 0.5) * _TWO53


@njit(cache=True)
def _bits_of(x):
    return np.array([x]).view(np.uint64)[0]


@njit(cache=True)
def drift_row(t, y, atoms, logw, sq, eps, out):
    """Denoiser at one point, plus `eps` times a hashed unit direction."""
    k, n = atoms.shape
    z = np.empty(k)
    zmax = -np.inf
    for a in range(k):
        dot = 0.0
        for j in range(n):
            dot += y[j] * atoms[a, j]
        z[a] = logw[a] + dot - 0.5 * t * sq[a]
        if z[a] > zmax:
            zmax = z[a]
    tot = 0.0
    for a in range(k):
        z[a] = math.exp(z[a] - zmax)
        tot += z[a]
    for j in range(n):
        s = 0.0
        for a in range(k):
            s += z[a] * atoms[a, j]
        out[j] = s / tot
    if eps > 0.0:
        key = _mix(_bits_of(t))
        for j in range(n):
            key = _mix(key ^ _bits_of(y[j]))
        g = np.empty(n)
        norm = 0.0
        for j in range(n):
            g[j] = _ndtri(_uniform(key, j))
            norm += g[j] * g[j]
        norm = math.sqrt(norm)
        for j in range(n):
            out[j] += eps * g[j] / norm


@njit(cache=True)
def speculate_row(lo, U, g, times, dts, atoms, logw, sq, eps, out):
    """Increments with the drift frozen at the block start; `g` is (m, n)."""
    m, n = out.shape
    v = np.empty(n)
    drift_row(times[lo], U, atoms, logw, sq, eps, v)
    for s in range(m):
        dt = dts[lo + s]
        h = math.sqrt(dt)
        for j in range(n):
            out[s, j] = dt * v[j] + h * g[s, j]


@njit(cache=True)
def log_ratio_row(lo, U, block, times, dts, atoms, logw, sq, eps):
    m, n = block.shape
    v = np.empty(n)
    f = np.empty(n)
    pos = U.copy()
    drift_row(times[lo], U, atoms, logw, sq, eps, v)
    total = 0.0
    for s in range(m):
        dt = dts[lo + s]
        drift_row(times[lo + s], pos, atoms, logw, sq, eps, f)
        num = 0.0
        den = 0.0
        for j in range(n):
            a = block[s, j] - dt * f[j]
            b = block[s, j] - dt * v[j]
            num += a * a
            den += b * b
        total += (den - num) / (2.0 * dt)
        for j in range(n):
            pos[j] += block[s, j]
    return total


@njit(cache=True)
def extend_row(U, block, out):
    """``out = U + (sum of the block's rows, in order)``."""
    m, n = block.shape
    for j in range(n):
        s = 0.0
        for i in range(m):
            s += block[i, j]
        out[j] = U[j] + s


# -- batched entry points for the vectorised scheme --

@njit(cache=True)
def drift_rows(t, Y, atoms, logw, sq, eps):
    out = np.empty_like(Y)
    for b in range(Y.shape[0]):
        drift_row(t[b], Y[b], atoms, logw, sq, eps, out[b])
    return out


@njit(cache=True)
def speculate_rows(lo, U, g, times, dts, atoms, logw, sq, eps):
    out = np.empty_like(g)
    for b in range(U.shape[0]):
        speculate_row(lo, U[b], g[b], times, dts, atoms, logw, sq, eps, out[b])
    return out


@njit(cache=True)
def log_ratio_rows(lo, U, block, times, dts, atoms, logw, sq, eps):
    out = np.empty(U.shape[0])
    for b in range(U.shape[0]):
        out[b] = log_ratio_row(lo, U[b], block[b], times, dts, atoms, logw, sq, eps)
    return out


@njit(cache=True)
def extend_rows(U, block):
    out = np.empty_like(U)
    for b in range(U.shape[0]):
        extend_row(U[b], block[b], out[b])
    return out


# -- per-row recursive engine --

@njit(cache=True)
def _bounds(rho, r):
    return math.ceil((1.0 + rho) ** r), math.ceil((1.0 + rho) ** (r + 1)) - 1


@njit(cache=True)
def _accept(lr):
    lr = min(max(lr, -LOG_CLAMP), LOG_CLAMP)
    return math.exp(min(lr, 0.0))


@njit(cache=True)
def _bias(lr):
    lr = min(max(lr, -LOG_CLAMP), LOG_CLAMP)
    return -math.expm1(-lr) if lr > 0 else 0.0


# recursive functions cannot be loaded back from numba's cache
@njit
def _visit(node, U, key, out, as_fallback, lo_, hi_, spec_, first_, nkids_, kids_,
           times, dts, atoms, logw, sq, eps, rho, budget, stats):
    """RS visit (or one fallback call when `as_fallback`) at `node`.

    Writes the block into `out` and returns ``(rounds, queries)``.
    ``stats`` = [visits, fallback visits, violations, max calls, error].
    """
    lo = lo_[node]
    m, n = out.shape
    if as_fallback or not spec_[node]:
        pos = U.copy()
        rounds = 0
        queries = 0
        for j in range(nkids_[node]):
            ch = kids_[first_[node] + j]
            a, b = lo_[ch] - lo, hi_[ch] - lo
            sub = out[a:b]
            r, q = _visit(ch, pos, _child(key, j), sub, False, lo_, hi_, spec_, first_,
                          nkids_, kids_, times, dts, atoms, logw, sq, eps, rho, budget, stats)
            if stats[4]:
                return 0, 0
            extend_row(pos, sub, pos)
            rounds += r
            queries += q
        return rounds, queries

    stats[0] += 1
    k0 = _child(key, 0)
    g = np.empty((m, n))
    for s in range(m):
        for j in range(n):
            g[s, j] = _ndtri(_uniform(k0, s * n + j))
    speculate_row(lo, U, g, times, dts, atoms, logw, sq, eps, out)
    if nkids_[node] == 0 or m <= 1:
        return 1, m
    lr = log_ratio_row(lo, U, out, times, dts, atoms, logw, sq, eps)
    if _uniform(_child(key, 1), 0) < _accept(lr):
        return 2, 2 * m

    stats[1] += 1
    rounds = 2
    queries = 2 * m
    tmp = np.empty((m, n))
    found = False
    istar = 0
    ncalls = 0
    r = 0
    while not found:
        a, b = _bounds(rho, r)
        r += 1
        if b < a:
            continue
        if b > budget:
            stats[4] = ERR_BUDGET
            return 0, 0
        br = 0
        bq = 0
        for i in range(a, b + 1):
            fr, fq = _visit(node, U, _child(key, 2 * i), tmp, True, lo_, hi_, spec_, first_,
                            nkids_, kids_, times, dts, atoms, logw, sq, eps, rho, budget, stats)
            if stats[4]:
                return 0, 0
            lr = log_ratio_row(lo, U, tmp, times, dts, atoms, logw, sq, eps)
            if not found and _uniform(_child(key, 2 * i + 1), 0) < _bias(lr):
                found = True
                istar = i
                out[:, :] = tmp
            br = max(br, fr + 1)
            bq += fq + m
        rounds += br
        queries += bq
        ncalls = b
    if ncalls > (1.0 + rho) * istar + 1e-9:
        stats[2] += 1
        stats[4] = ERR_BOOKKEEPING
    stats[3] = max(stats[3], ncalls)
    return rounds, queries


@njit
def run_rows(keys, n, root, lo_, hi_, spec_, first_, nkids_, kids_,
             times, dts, atoms, logw, sq, eps, rho, budget, stats):
    """Sample every row; returns (sums of increments, rounds, queries)."""
    M = keys.shape[0]
    total = hi_[root] - lo_[root]
    buf = np.empty((total, n))
    zero = np.zeros(n)
    sums = np.empty((M, n))
    rounds = np.empty(M, dtype=np.int64)
    queries = np.empty(M, dtype=np.int64)
    for b in range(M):
        r, q = _visit(root, zero, keys[b], buf, False, lo_, hi_, spec_, first_, nkids_,
                      kids_, times, dts, atoms, logw, sq, eps, rho, budget, stats)
        if stats[4]:
            return sums, rounds, queries
        extend_row(zero, buf, sums[b])
        rounds[b] = r
        queries[b] = q
    return sums, rounds, queries
