"""Simulated parallel cost model: rounds and queries.

Sequential composition adds both counters.  Parallel composition takes the
slowest branch's rounds and the total of all queries.
"""

from dataclasses import dataclass

import numpy as np

KINDS = ("speculate", "ratio", "fallback_ratio")

# 64-bit counters; anything above this is treated as a runaway run.
_LIMIT = 2**62


class RunawayError(OverflowError):
    """A cost counter left the 64-bit range."""


@dataclass(frozen=True)
class CostLedger:
    rounds: int = 0
    queries: int = 0

    def __post_init__(self):
        if self.rounds < 0 or self.queries < 0:
            raise ValueError(f"negative cost {self}")
        if self.rounds > _LIMIT or self.queries > _LIMIT:
            raise RunawayError(f"cost counters overflowed: {self}")


ZERO = CostLedger(0, 0)


def seq_compose(a, b):
    """Cost of running `a` then `b`."""
    return CostLedger(a.rounds + b.rounds, a.queries + b.queries)


def par_compose(ledgers):
    """Cost of running all `ledgers` in one parallel batch."""
    ledgers = list(ledgers)
    if not ledgers:
        raise ValueError("par_compose needs at least one ledger")
    return CostLedger(max(c.rounds for c in ledgers), sum(c.queries for c in ledgers))


def charge_local(node_size, kind):
    """Cost of one local oracle group at a node with `node_size` coordinates.

    Every group (speculative draw, density ratio, fallback ratio) is one
    round of `node_size` parallel queries.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown charge kind {kind!r}")
    if node_size < 1:
        raise ValueError("node_size must be >= 1")
    return CostLedger(1, int(node_size))


def check_counters(*arrays):
    """Raise `RunawayError` if any batched counter array is out of range."""
    for a in arrays:
        if a.size and (a.max() > _LIMIT or a.min() < 0):
            raise RunawayError("cost counters overflowed")


def par_reduce(rounds, queries, axis=-1):
    """Batched `par_compose` along `axis` of per-branch counter arrays."""
    return np.max(rounds, axis=axis), np.sum(queries, axis=axis)
