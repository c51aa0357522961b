"""Entropy potentials behind the round bounds.

Evaluates the pinning inequality and the potential bounds on random and
extreme joints, and the per-level speculation error of the coordinate
sampler against sqrt(n log q).

    python demos/information_bounds.py
"""

import math

import numpy as np

from parsample.coordinate import level_tv_sums, potential_bound
from parsample.discrete import AllEqualMixture, random_table
from parsample.infotheory import (
    dirichlet_alpha,
    fully_correlated,
    pinning_lemma_check,
    potential_phi,
    random_joint,
    total_correlation,
)

gen = np.random.default_rng(0)

margins = []
for i in range(300):
    j = random_joint(4, 2, dirichlet_alpha(i), gen)
    lhs, rhs, ok = pinning_lemma_check(j, 2)
    margins.append(rhs - lhs)
print(f"pinning, 300 random joints on 4 bits: min margin {min(margins):.3g}")
lhs, rhs, _ = pinning_lemma_check(fully_correlated(4), 2)
print(f"pinning, four equal fair bits: lhs {lhs:.6f} rhs {rhs:.6f} (2 log 2 = {2 * math.log(2):.6f})")

j = random_joint(5, 3, 0.3, gen)
print(f"random 5-variable joint: total correlation {total_correlation(j):.4f}"
      f" <= phi {potential_phi(j, range(5)):.4f} <= n log q {5 * math.log(3):.4f}")

for name, t in (("random table", random_table(5, 2, 0.2, gen)),
                ("all-equal strings", AllEqualMixture(1.0, 5, 2))):
    levels = level_tv_sums(t)
    print(f"{name:18s} per-level TV sums {np.round(levels, 3)}  sqrt(n log q) = {potential_bound(5, 2):.3f}")
