"""Parallel simulation of a discretised localization diffusion.

The sampler proposes whole blocks of Euler-Maruyama increments with the
drift frozen at the block start and corrects them exactly.  Its output has
the law of the step-by-step Euler-Maruyama chain, in far fewer rounds when
the drift barely moves.

    python demos/diffusion_sampling.py
"""

import numpy as np

from parsample.diffusion import build_schedule, euler_baseline, sample_diffusion
from parsample.gaussian import AtomSet
from parsample.stats import ks_two_sample

target = AtomSet([[-1.0], [1.0]])
sch = build_schedule(target.R, 0.125, 1.0, target.n)
print(f"schedule: L={sch.L} stages of N={sch.N} steps, T={sch.times[-1]:g}")

M = 5000
par = sample_diffusion(target, sch, seed=0, samples=M)
seq = euler_baseline(target, sch, seed=1, samples=M)
print("KS p-value, parallel vs Euler-Maruyama:", round(ks_two_sample(par.x[:, 0], seq.x[:, 0])[1], 4))
print(f"mean rounds: parallel {par.rounds.mean():.1f}, median {np.median(par.rounds):.0f};"
      f" sequential {sch.steps}")

# Histogram of the outputs: two bumps of variance delta around the atoms.
hist, edges = np.histogram(par.x[:, 0], bins=16, range=(-2, 2))
for h, e in zip(hist, edges):
    print(f"{e:+.2f} {'#' * (60 * h // hist.max())}")

# A single atom has a constant drift, so the root of every stage accepts.
one = sample_diffusion(AtomSet([[0.3]]), sch, seed=2, samples=1000)
print("single atom rounds:", set(one.rounds.tolist()), "=", 2 * sch.L)
