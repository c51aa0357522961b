"""CSV text for samples, scaling sweeps and pinning margins.

Floats are written with 17 significant digits so they round-trip.
"""

import csv
import io

import numpy as np


def fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (np.integer, np.bool_)):
        return str(v.item())
    return str(v)


def to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def discrete_csv(result):
    """Columns sample_id, x (digits joined), rounds, queries."""
    rows = (
        (i, "".join(map(str, x)) if result.x.max(initial=0) < 10 else " ".join(map(str, x)),
         r, q)
        for i, (x, r, q) in enumerate(zip(result.x, result.rounds, result.queries)))
    return to_csv(["sample_id", "x", "rounds", "queries"], rows)


def gaussian_csv(result):
    n = result.x.shape[1]
    header = ["sample_id"] + [f"x{j}" for j in range(n)] + ["rounds", "queries"]
    rows = ([i, *x, r, q]
            for i, (x, r, q) in enumerate(zip(result.x, result.rounds, result.queries)))
    return to_csv(header, rows)


def scaling_csv(records):
    rows = sorted((r.n, r.trial, r.rounds, r.queries, r.seed) for r in records)
    return to_csv(["n", "trial", "rounds", "queries", "seed"], rows)


def pinning_csv(rows):
    return to_csv(["instance", "m", "q", "k", "alpha", "lhs", "rhs", "margin", "holds"], rows)


def write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)
