"""Recursive speculative rejection sampling over a fallback tree.

A fallback tree partitions positions ``0..N-1`` into nested contiguous
intervals.  At each node a speculation scheme proposes the whole block
from a cheap law ``nu`` and reports ``log dmu/dnu``.  A rejected proposal
is replaced by the first accepted output of repeated fallback calls, each
of which samples the block exactly by recursing into the children.
Fallback calls are issued in geometrically growing parallel batches.

The engine is batched: every array carries a leading axis of independent
samples, each with its own random stream.  Randomness is addressed by
labels (speculation, coin, fallback call ``i``, child ``j``), so a sample's
output and cost do not depend on which other samples share its batch.

Scheme protocol
---------------
``size(lo, hi)``
    Number of oracle coordinates in the node; 0 means the block is fixed
    and free.
``speculate(state, lo, hi, rng) -> block``
``log_ratio(state, lo, hi, block) -> (B,) array`` of ``log dmu/dnu``.
``extend(state, lo, hi, block) -> state``, ``take(state, idx) -> state`` and
``concat(states) -> state``.
``exact_dtv(state, lo, hi)`` (optional) for acceptance audits.
"""

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .discrete import draw_categorical
from .ledger import check_counters
from .streams import RandomSource

LOG_CLAMP = 745.0


class BudgetExceeded(RuntimeError):
    """A node visit issued more fallback calls than the safety budget."""


class BookkeepingError(AssertionError):
    """A node visit issued more than ``(1 + rho) * i*`` fallback calls."""


# -- trees -------------------------------------------------------------------

class Node:
    __slots__ = ("lo", "hi", "children", "speculate")

    def __init__(self, lo, hi, children=(), speculate=True):
        self.lo, self.hi = int(lo), int(hi)
        self.children = list(children)
        self.speculate = speculate

    @property
    def size(self):
        return self.hi - self.lo

    @property
    def is_leaf(self):
        return not self.children

    def __repr__(self):
        return f"Node([{self.lo},{self.hi}), {len(self.children)} children)"


class FallbackTree:
    """Recursion skeleton over positions ``0..N-1``."""

    def __init__(self, root):
        self.root = root
        self.N = root.hi - root.lo
        self.validate()

    def nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self):
        return [nd for nd in self.nodes() if nd.is_leaf]

    def depth_of_leaves(self):
        out = []

        def walk(node, d):
            if node.is_leaf:
                out.append(d)
            for c in node.children:
                walk(c, d + 1)

        walk(self.root, 0)
        return out

    @property
    def height(self):
        return max(self.depth_of_leaves())

    @property
    def max_branching(self):
        return max(len(nd.children) for nd in self.nodes())

    @property
    def speculate_root(self):
        return self.root.speculate

    def validate(self):
        for nd in self.nodes():
            if nd.size < 1:
                raise ValueError(f"empty node {nd}")
            if nd.is_leaf:
                if nd.size != 1:
                    raise ValueError(f"leaf {nd} is not a singleton")
                continue
            edge = nd.lo
            for c in nd.children:
                if c.lo != edge:
                    raise ValueError(f"children of {nd} are not contiguous")
                edge = c.hi
            if edge != nd.hi:
                raise ValueError(f"children of {nd} do not cover it")
        if len(set(self.depth_of_leaves())) != 1:
            raise ValueError("leaves are not at equal depth")

    def default_rho(self):
        """``1 / h`` for the height ``h`` of the subtrees RS runs on."""
        h = self.height - (0 if self.root.speculate else 1)
        return 1.0 if h <= 1 else 1.0 / h


def _kary(lo, hi, k):
    if hi - lo == 1:
        return Node(lo, hi)
    step = (hi - lo) // k
    if step < 1 or step * k != hi - lo:
        raise ValueError(f"cannot split [{lo},{hi}) into {k} equal parts")
    return Node(lo, hi, [_kary(lo + j * step, lo + (j + 1) * step, k) for j in range(k)])


def build_kary_tree(N, k):
    """Full `k`-ary tree over ``N = k^h`` positions."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return FallbackTree(_kary(0, N, k))


def build_binary_tree(N):
    if N < 1 or N & (N - 1):
        raise ValueError(f"N={N} is not a power of two")
    return build_kary_tree(N, 2)


def next_pow2(n):
    return 1 << max(0, math.ceil(math.log2(n))) if n > 1 else 1


def root_heavy_size(n, h):
    """Padded size ``D^(2h)`` and branching ``D`` for a root-heavy tree."""
    if n == 1:
        return 1, 1
    D = math.ceil(n ** (1.0 / (2 * h)) - 1e-9)
    while D ** (2 * h) < n:
        D += 1
    return D ** (2 * h), D


def build_root_heavy_tree(n, h):
    """Root with ``sqrt(n')`` children, each a ``D``-ary tree of height `h`.

    ``n' = D^(2h) >= n`` is the padded size.  The root itself does not
    speculate; its children are sampled one after another.
    """
    if n < 1 or h < 1:
        raise ValueError("need n >= 1 and h >= 1")
    if n == 1:
        return FallbackTree(Node(0, 1))
    if h ** (2 * h) > n:
        raise ValueError(f"h^(2h) = {h ** (2 * h)} exceeds n = {n}")
    total, D = root_heavy_size(n, h)
    width = D**h
    kids = [_kary(j * width, (j + 1) * width, D) for j in range(total // width)]
    return FallbackTree(Node(0, total, kids, speculate=False))


def build_staged_tree(L, N):
    """Non-speculating root over `L` consecutive binary trees of `N` steps."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if N < 1 or N & (N - 1):
        raise ValueError(f"N={N} is not a power of two")
    kids = [_kary(i * N, (i + 1) * N, 2) for i in range(L)]
    if L == 1:
        return FallbackTree(kids[0])
    return FallbackTree(Node(0, L * N, kids, speculate=False))


# -- batching ----------------------------------------------------------------

def batch_bounds(rho, r):
    """Inclusive call-index range of parallel batch `r` (may be empty)."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    lo = math.ceil((1 + rho) ** r)
    hi = math.ceil((1 + rho) ** (r + 1)) - 1
    return lo, hi


@dataclass
class RsConfig:
    rho: float = 1.0
    max_fallback_budget: int = 10**6

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.max_fallback_budget < 1:
            raise ValueError("budget must be >= 1")


def accept_prob(log_ratio):
    """``min(1, exp(l))`` with ``l`` clamped to +-745."""
    return np.exp(np.minimum(np.clip(log_ratio, -LOG_CLAMP, LOG_CLAMP), 0.0))


def fallback_bias(log_ratio):
    """``max(0, 1 - exp(-l))``: chance a fallback draw is kept."""
    lr = np.clip(log_ratio, -LOG_CLAMP, LOG_CLAMP)
    return np.where(lr > 0, -np.expm1(-np.maximum(lr, 0.0)), 0.0)


# -- standalone speculative rejection sampling ------------------------------

def srs(mu_sampler, nu_sampler, log_ratio, rng, budget=10**6):
    """Speculative rejection sampling for a batch of independent streams.

    Parameters
    ----------
    mu_sampler, nu_sampler : callable(RandomSource) -> (B, ...) array
    log_ratio : callable(x) -> (B,) array of ``log dmu/dnu(x)``
    rng : RandomSource with B rows

    Returns
    -------
    samples, first_accepted (bool), fallback_draws (int), fallback_heads (int)
        ``fallback_heads`` is 1 for rows resolved by a fallback draw.
    """
    x = np.asarray(nu_sampler(rng.child(0)))
    accepted = rng.child(1).uniform() < accept_prob(log_ratio(x))
    out = x.copy()
    draws = np.zeros(len(rng), dtype=np.int64)
    pending = np.flatnonzero(~accepted)
    i = 0
    while pending.size:
        i += 1
        if i > budget:
            raise BudgetExceeded(f"srs exceeded {budget} fallback draws")
        sub = rng.take(pending)
        y = np.asarray(mu_sampler(sub.child(2 * i)))
        heads = sub.child(2 * i + 1).uniform() < fallback_bias(log_ratio(y))
        draws[pending] += 1
        out[pending[heads]] = y[heads]
        pending = pending[~heads]
    return out, accepted, draws, (~accepted).astype(np.int64)


def finite_pair(mu, nu):
    """Samplers and log ratio for two laws on ``{0..k-1}``, for :func:`srs`."""
    mu, nu = np.asarray(mu, dtype=np.float64), np.asarray(nu, dtype=np.float64)

    with np.errstate(divide="ignore"):
        lmu, lnu = np.log(mu), np.log(nu)

    def mu_sampler(rng):
        return draw_categorical(mu, rng.uniform())

    def nu_sampler(rng):
        return draw_categorical(nu, rng.uniform())

    def log_ratio(x):
        return lmu[x] - lnu[x]

    return mu_sampler, nu_sampler, log_ratio


# -- recursive sampler -------------------------------------------------------

class _Request:
    __slots__ = ("node", "state", "rng", "tags")

    def __init__(self, node, state, rng, tags):
        self.node, self.state, self.rng, self.tags = node, state, rng, tags


def _concat_streams(parts):
    counters = {p.counter for p in parts}
    if len(counters) != 1:
        raise ValueError("cannot merge streams at different draw counters")
    out = RandomSource(keys=np.concatenate([p.keys for p in parts]))
    out.counter = counters.pop()
    return out


class RecursiveSampler:
    """Batched recursive speculative rejection sampling.

    Node visits are generators that yield a request whenever they need a
    child node sampled.  A scheduler merges all pending requests for the
    same node, whatever visit issued them, and serves them with one
    vectorised visit.  Because every draw is addressed by its labels, the
    merging changes only speed, never samples or costs.

    Parameters
    ----------
    tree : FallbackTree
    scheme : speculation scheme (see module docstring)
    config : RsConfig
    trace : bool
        Keep one record per node visit (for re-walks and audits).
    audit : bool
        With `trace`, also record the exact ``d_TV(mu_S, nu_S)`` of each
        visit when the scheme can compute it.
    lookahead : float
        Growth factor of the number of fallback calls evaluated per host
        step (1 evaluates exactly one ledger batch per step).  Affects
        speed only.

    Attributes
    ----------
    visits, fallback_visits, violations, max_calls : int
        Bookkeeping counters accumulated over all runs.
    records : list of dict
    """

    def __init__(self, tree, scheme, config=None, trace=False, audit=False, lookahead=2.0):
        self.tree, self.scheme = tree, scheme
        self.lookahead = lookahead
        self.config = config if config is not None else RsConfig(tree.default_rho())
        self.trace, self.audit = trace, audit and trace
        self.records = []
        self.visits = self.fallback_visits = self.violations = self.max_calls = 0

    def run(self, state, rng, sample_ids=None):
        """Sample the root block for every row of `state`.

        Returns ``(block, rounds, queries)`` with per-row int64 counters.
        """
        tags = None
        if self.trace:
            ids = np.arange(len(rng)) if sample_ids is None else np.asarray(sample_ids)
            tags = [(int(s), "") for s in ids]
        return self._drive(self._rs(self.tree.root, state, rng, tags))

    # -- scheduler --
    def _drive(self, root):
        final = {}
        parents = {}
        waiting = {}
        heap = []
        order = itertools.count()

        def step(task, value):
            stack = [(task, value)]
            while stack:
                t, v = stack.pop()
                try:
                    req = t.send(v)
                except StopIteration as stop:
                    res = stop.value
                    for parent, lo, hi in parents.pop(t, ()):
                        if parent is None:
                            final["out"] = res
                        else:
                            stack.append((parent, tuple(a[lo:hi] for a in res)))
                    continue
                key = id(req.node)
                if key not in waiting:
                    waiting[key] = []
                    heapq.heappush(heap, (req.node.lo, -req.node.size, next(order), key))
                waiting[key].append((t, req))

        parents[root] = [(None, 0, None)]
        step(root, None)
        while heap:
            _, _, _, key = heapq.heappop(heap)
            group = waiting.pop(key)
            node = group[0][1].node
            reqs = [rq for _, rq in group]
            if len(reqs) == 1:
                state, rng, tags = reqs[0].state, reqs[0].rng, reqs[0].tags
            else:
                state = self.scheme.concat([rq.state for rq in reqs])
                rng = _concat_streams([rq.rng for rq in reqs])
                tags = None if reqs[0].tags is None else [t for rq in reqs for t in rq.tags]
            task = self._rs(node, state, rng, tags)
            links, edge = [], 0
            for parent, rq in group:
                links.append((parent, edge, edge + len(rq.rng)))
                edge += len(rq.rng)
            parents[task] = links
            step(task, None)
        return final["out"]

    # -- visits (generators) --
    def _record(self, tags, **cols):
        for b, (sample, path) in enumerate(tags):
            rec = {"sample": sample, "path": path}
            for key, val in cols.items():
                rec[key] = val[b] if isinstance(val, np.ndarray) else val
                if isinstance(rec[key], np.generic):
                    rec[key] = rec[key].item()
            self.records.append(rec)

    def _fallback(self, node, state, rng, tags):
        blocks = []
        B = len(rng)
        rounds = np.zeros(B, dtype=np.int64)
        queries = np.zeros(B, dtype=np.int64)
        for j, child in enumerate(node.children):
            ctags = None if tags is None else [(s, f"{p}/{j}") for s, p in tags]
            blk, r, q = yield _Request(child, state, rng.child(j), ctags)
            state = self.scheme.extend(state, child.lo, child.hi, blk)
            blocks.append(blk)
            rounds += r
            queries += q
        check_counters(rounds, queries)
        return np.concatenate(blocks, axis=1), rounds, queries

    def _rs(self, node, state, rng, tags):
        sch = self.scheme
        B = len(rng)
        c = sch.size(node.lo, node.hi)
        unit = 1 if c > 0 else 0
        if not node.speculate:
            ftags = None if tags is None else [(s, p + ".0") for s, p in tags]
            blk, rounds, queries = yield from self._fallback(node, state, rng, ftags)
            if tags is not None:
                self._record(tags, kind="fallback", lo=node.lo, hi=node.hi,
                             nchildren=len(node.children), rounds=rounds, queries=queries)
            return blk, rounds, queries

        self.visits += B
        spec = sch.speculate(state, node.lo, node.hi, rng.child(0))
        if node.is_leaf or c <= 1:
            rounds = np.full(B, unit, dtype=np.int64)
            queries = np.full(B, c, dtype=np.int64)
            if tags is not None:
                self._record(tags, kind="rs", lo=node.lo, hi=node.hi, size=c, exact=True,
                             accepted_first=True, calls=0, heads=0, batches=[],
                             accepted_at=0, local_rounds=unit, local_queries=c,
                             nchildren=len(node.children), rounds=rounds, queries=queries,
                             dtv=0.0)
            return spec, rounds, queries

        lr = sch.log_ratio(state, node.lo, node.hi, spec)
        accept = rng.child(1).uniform() < accept_prob(lr)
        rounds = np.full(B, 2 * unit, dtype=np.int64)
        queries = np.full(B, 2 * c, dtype=np.int64)
        out = spec
        rej = np.flatnonzero(~accept)
        calls = np.zeros(B, dtype=np.int64)
        heads = np.zeros(B, dtype=np.int64)
        istar = np.zeros(B, dtype=np.int64)
        batches = [[] for _ in range(B)] if tags is not None else None
        if rej.size:
            self.fallback_visits += rej.size
            out = spec.copy()
            sub_state = sch.take(state, rej)
            sub_tags = None if tags is None else [tags[b] for b in rej]
            blk, r, q, ncalls, nheads, first, bl = yield from self._resolve(
                node, sub_state, rng.take(rej), sub_tags, c)
            out[rej] = blk
            rounds[rej] += r
            queries[rej] += q
            calls[rej], heads[rej], istar[rej] = ncalls, nheads, first
            if batches is not None:
                for k, b in enumerate(rej):
                    batches[b] = bl[k]
        check_counters(rounds, queries)
        if tags is not None:
            dtv = np.full(B, np.nan)
            if self.audit and hasattr(sch, "exact_dtv"):
                dtv = sch.exact_dtv(state, node.lo, node.hi)
            for b in range(B):
                self._record([tags[b]], kind="rs", lo=node.lo, hi=node.hi, size=c,
                             exact=False, accepted_first=bool(accept[b]),
                             calls=int(calls[b]), heads=int(heads[b]), batches=batches[b],
                             accepted_at=int(istar[b]), local_rounds=2 * unit,
                             local_queries=2 * c, unit_rounds=unit, unit_queries=c,
                             nchildren=len(node.children), rounds=int(rounds[b]),
                             queries=int(queries[b]),
                             dtv=None if np.isnan(dtv[b]) else float(dtv[b]))
        return out, rounds, queries

    def _host_spans(self, r, issued):
        """Ledger batches evaluated in one host step, starting at batch `r`.

        Host steps at least double the number of evaluated calls, so deep
        recursions need few Python-level passes.  Calls past the first head
        are evaluated and then discarded; they never enter the output or
        the ledger, which are the same as with one batch per step.
        """
        goal = max(int(issued * self.lookahead), issued + 1)
        spans = []
        while True:
            a, b = batch_bounds(self.config.rho, r)
            r += 1
            if b >= a:
                if b > self.config.max_fallback_budget:
                    break
                spans.append((a, b))
                if b >= goal:
                    break
        return spans, r

    def _resolve(self, node, state, rng, tags, c):
        """Run batches of fallback calls until each row sees a head."""
        sch, rho = self.scheme, self.config.rho
        B = len(rng)
        unit = 1 if c > 0 else 0
        out = None
        rounds = np.zeros(B, dtype=np.int64)
        queries = np.zeros(B, dtype=np.int64)
        ncalls = np.zeros(B, dtype=np.int64)
        nheads = np.zeros(B, dtype=np.int64)
        first = np.zeros(B, dtype=np.int64)
        bl = [[] for _ in range(B)] if tags is not None else None
        pending = np.arange(B)
        r = issued = 0
        while pending.size:
            spans, r = self._host_spans(r, issued)
            if not spans:
                raise BudgetExceeded(
                    f"node [{node.lo},{node.hi}) exceeded "
                    f"{self.config.max_fallback_budget} fallback calls")
            a0, b1 = spans[0][0], spans[-1][1]
            issued = b1
            P, W = pending.size, b1 - a0 + 1
            rows = np.repeat(pending, W)
            idx = np.tile(np.arange(a0, b1 + 1, dtype=np.int64), P)
            prng = rng.take(rows)
            ftags = None
            if tags is not None:
                ftags = [(tags[rw][0], f"{tags[rw][1]}.{i}") for rw, i in zip(rows, idx)]
            st = sch.take(state, rows)
            y, fr, fq = yield from self._fallback(node, st, prng.child(2 * idx), ftags)
            lr = sch.log_ratio(st, node.lo, node.hi, y)
            hit = (prng.child(2 * idx + 1).uniform() < fallback_bias(lr)).reshape(P, W)
            starts = np.array([a - a0 for a, _ in spans])
            ends = np.array([b for _, b in spans])
            br = np.maximum.reduceat((fr + unit).reshape(P, W), starts, axis=1)
            bq = np.add.reduceat((fq + c).reshape(P, W), starts, axis=1)
            done = hit.any(axis=1)
            pick = hit.argmax(axis=1)
            last = np.where(done, np.searchsorted(starts, pick, side="right") - 1, len(spans) - 1)
            charged = np.arange(len(spans))[None, :] <= last[:, None]
            rounds[pending] += (br * charged).sum(axis=1)
            queries[pending] += (bq * charged).sum(axis=1)
            ncalls[pending] = ends[last]
            seen = np.arange(W)[None, :] <= (ends[last] - a0)[:, None]
            nheads[pending] += (hit & seen).sum(axis=1)
            if out is None:
                out = np.empty((B,) + y.shape[1:], dtype=y.dtype)
            yv = y.reshape((P, W) + y.shape[1:])
            rows_done = pending[done]
            out[rows_done] = yv[done, pick[done]]
            first[rows_done] = a0 + pick[done]
            if bl is not None:
                for k, row in enumerate(pending):
                    bl[row].extend([list(sp) for sp in spans[: last[k] + 1]])
            pending = pending[~done]
        bad = ncalls > (1 + rho) * first + 1e-9
        self.violations += int(bad.sum())
        self.max_calls = max(self.max_calls, int(ncalls.max()))
        if bad.any():
            raise BookkeepingError(
                f"{int(bad.sum())} visits issued more than (1+rho)*i* fallback calls")
        check_counters(rounds, queries)
        return out, rounds, queries, ncalls, nheads, first, bl


def rs(tree, node, prefix, scheme, config, rng):
    """One RS visit at `node` for a batch of prefixes (no tracing)."""
    eng = RecursiveSampler(tree, scheme, config)
    return eng._drive(eng._rs(node, prefix, rng, None))


def fallback(tree, node, prefix, scheme, config, rng):
    """Sample `node`'s block child by child (no tracing)."""
    eng = RecursiveSampler(tree, scheme, config)
    return eng._drive(eng._fallback(node, prefix, rng, None))


# -- trace utilities -----------------------------------------------------------

def rewalk_ledger(records):
    """Recompute per-sample (rounds, queries) from visit records alone.

    Uses only each visit's local charges, its batch list and the records of
    its fallback calls' children; the recorded totals are not consulted.
    """
    by_key = {(r["sample"], r["path"]): r for r in records}

    def fb_cost(sample, fpath, nchildren):
        tr = tq = 0
        for j in range(nchildren):
            r, q = rs_cost(sample, f"{fpath}/{j}")
            tr += r
            tq += q
        return tr, tq

    def rs_cost(sample, path):
        rec = by_key[(sample, path)]
        if rec["kind"] == "fallback":
            return fb_cost(sample, path + ".0", rec["nchildren"])
        tr, tq = rec["local_rounds"], rec["local_queries"]
        for a, b in rec["batches"]:
            br, bq = 0, 0
            for i in range(a, b + 1):
                r, q = fb_cost(sample, f"{path}.{i}", rec["nchildren"])
                br = max(br, r + rec["unit_rounds"])
                bq += q + rec["unit_queries"]
            tr += br
            tq += bq
        return tr, tq

    samples = sorted({r["sample"] for r in records if r["path"] == ""})
    return {s: rs_cost(s, "") for s in samples}


def acceptance_audit(records, bonferroni=True, level=1e-3):
    """Compare observed acceptance with the exact ``1 - d_TV`` per node interval.

    Visits are grouped by node interval.  For each group the number of
    first-draw accepts is compared to the sum of the visits' exact
    ``1 - d_TV``; fallback heads are compared to ``d_TV`` times the number
    of issued calls.  Visits without an exact ``d_TV`` are skipped.

    Returns a list of dicts with observed/predicted rates and z-scores, and
    a flag saying whether every |z| is under the (Bonferroni-corrected)
    two-sided normal threshold.
    """
    from scipy.stats import norm

    groups = {}
    skipped = 0
    for r in records:
        if r["kind"] != "rs" or r["exact"]:
            continue
        if r.get("dtv") is None:
            skipped += 1
            continue
        groups.setdefault((r["lo"], r["hi"]), []).append(r)
    rows = []
    for (lo, hi), recs in sorted(groups.items()):
        d = np.array([r["dtv"] for r in recs])
        acc = np.array([r["accepted_first"] for r in recs], dtype=float)
        p = 1.0 - d
        var = (p * (1 - p)).sum()
        z1 = (acc.sum() - p.sum()) / math.sqrt(var) if var > 0 else (
            0.0 if abs(acc.sum() - p.sum()) < 1e-9 else math.inf)
        calls = np.array([r["calls"] for r in recs], dtype=float)
        heads = np.array([r["heads"] for r in recs], dtype=float)
        exp_h = (d * calls).sum()
        var_h = (d * (1 - d) * calls).sum()
        z2 = (heads.sum() - exp_h) / math.sqrt(var_h) if var_h > 0 else (
            0.0 if abs(heads.sum() - exp_h) < 1e-9 else math.inf)
        rows.append({
            "lo": lo, "hi": hi, "visits": len(recs),
            "observed_accept_rate": float(acc.mean()),
            "exact_one_minus_dtv": float(p.mean()),
            "z_first": float(z1),
            "observed_fallback_rate": float(heads.sum() / calls.sum()) if calls.sum() else None,
            "exact_fallback_rate": float(exp_h / calls.sum()) if calls.sum() else None,
            "z_fallback": float(z2),
        })
    tests = 2 * len(rows) if bonferroni else 1
    thresh = float(norm.isf(level / (2 * max(tests, 1))))
    ok = all(abs(r["z_first"]) <= thresh and abs(r["z_fallback"]) <= thresh for r in rows)
    return {"nodes": rows, "threshold": thresh, "pass": ok, "skipped": skipped}
