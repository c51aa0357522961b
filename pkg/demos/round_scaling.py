"""How rounds grow with n on a sticky Markov chain.

A small version of the scaling sweep; the CLI command

    parsample scaling --family markov:p_stay=0.99 --n 64..4096:x2 --trials 50 --seed 7

writes the full grid as CSV.

    python demos/round_scaling.py
"""

import numpy as np

from parsample.stats import loglog_slope
from parsample.suites import MARKOV, scaling_records

ns = [64, 128, 256, 512, 1024]
recs = scaling_records(MARKOV, ns, trials=20, seed=3)
for n in ns:
    r = np.array([x.rounds for x in recs if x.n == n])
    q = np.array([x.queries for x in recs if x.n == n])
    print(f"n={n:5d}  mean rounds {r.mean():7.1f}  rounds/n {r.mean() / n:.3f}"
          f"  queries/(n log2 n) {q.mean() / (n * np.log2(n)):.2f}")
slope, se = loglog_slope([x.n for x in recs], [x.rounds for x in recs])
print(f"log-log slope of mean rounds: {slope:.3f} +- {se:.3f} (autoregressive: 1)")
