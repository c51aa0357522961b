"""Pass/fail statistics: exact-law comparisons, goodness of fit, moments
and scaling regressions."""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as st

from .engine import acceptance_audit

__all__ = [
    "ScalingRecord",
    "Verdict",
    "acceptance_audit",
    "chi_square_gof",
    "empirical_tv",
    "encode_rows",
    "ks_two_sample",
    "loglog_slope",
    "moment_check",
]

LEVEL = 1e-3


@dataclass
class ScalingRecord:
    n: int
    trial: int
    rounds: int
    queries: int
    seed: int
    family: str = ""

    def __post_init__(self):
        if self.rounds < 1 or self.queries < self.n:
            raise ValueError("a complete sample has rounds >= 1 and queries >= n")


@dataclass
class Verdict:
    check: str
    statistic: float
    threshold: float
    passed: bool
    detail: dict = None

    def to_dict(self):
        d = {"check": self.check, "statistic": self.statistic,
             "threshold": self.threshold, "pass": bool(self.passed)}
        if self.detail:
            d["detail"] = self.detail
        return d

    def to_json(self):
        return json.dumps(_plain(self.to_dict()), indent=2, sort_keys=True)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def encode_rows(x, q):
    """Flat C-order index of each row of an (M, n) array over ``[q]^n``."""
    x = np.asarray(x, dtype=np.int64)
    return np.ravel_multi_index(tuple(x.T), (q,) * x.shape[1])


def _counts(samples, k):
    samples = np.asarray(samples, dtype=np.int64).reshape(-1)
    if samples.size == 0:
        raise ValueError("no samples")
    if samples.min() < 0 or samples.max() >= k:
        raise ValueError("sample outside the domain of the exact law")
    return np.bincount(samples, minlength=k)


def empirical_tv(samples, exact):
    """``0.5 * sum |freq - exact|`` for integer-coded samples."""
    exact = np.asarray(exact, dtype=np.float64)
    c = _counts(samples, exact.size)
    return 0.5 * float(np.abs(c / c.sum() - exact).sum())


def chi_square_gof(samples, exact):
    """Pearson chi-square p-value; cells with expected count < 5 are pooled.

    Cells are pooled in increasing order of expected count until the pool
    reaches 5 or only one other cell is left.  An impossible cell that is observed gives p = 0.
    """
    exact = np.asarray(exact, dtype=np.float64)
    c = _counts(samples, exact.size)
    M = c.sum()
    if np.any(c[exact <= 0] > 0):
        return 0.0
    live = exact > 0
    e, o = exact[live] * M, c[live]
    order = np.argsort(e, kind="stable")
    e, o = e[order], o[order]
    small = np.cumsum(e) < 5
    # pool the smallest cells (one more cell if the pool is still short),
    # always leaving at least one other cell
    k = min(int(small.sum()) + 1, e.size - 1) if small.any() else 0
    if k > 1:
        e = np.concatenate([[e[:k].sum()], e[k:]])
        o = np.concatenate([[o[:k].sum()], o[k:]])
    if e.size < 2:
        raise ValueError("chi-square needs at least two cells after pooling")
    return float(st.chisquare(o, e).pvalue)


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov (statistic, p-value)."""
    res = st.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return float(res.statistic), float(res.pvalue)


def loglog_slope(ns, values):
    """Least-squares slope of ``log(mean value)`` against ``log n``.

    `values` holds one number per entry of `ns` (repeated n are averaged).

    Returns
    -------
    (slope, stderr)
    """
    ns = np.asarray(ns, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    grid = np.unique(ns)
    if grid.size < 3:
        raise ValueError("need at least three distinct n")
    means = np.array([values[ns == g].mean() for g in grid])
    if np.any(means <= 0):
        raise ValueError("means must be positive")
    fit = st.linregress(np.log(grid), np.log(means))
    return float(fit.slope), float(fit.stderr)


def moment_check(x, mean, trace, rel=0.10, sigmas=4.0):
    """Mean within `sigmas` standard errors per coordinate; trace within `rel`.

    Returns (mean_ok, trace_ok, max |z| of the mean, relative trace error).
    """
    x = np.asarray(x, dtype=np.float64)
    M = x.shape[0]
    se = x.std(axis=0, ddof=1) / math.sqrt(M)
    z = np.abs(x.mean(axis=0) - np.asarray(mean)) / np.where(se > 0, se, np.inf)
    tr = float(np.trace(np.atleast_2d(np.cov(x, rowvar=False))))
    err = abs(tr - trace) / trace
    return bool(z.max() <= sigmas), bool(err <= rel), float(z.max()), float(err)
