"""Named acceptance checks, shared by ``parsample verify`` and the tests.

Every check takes a seed and a `scale` (fraction of the full sample
sizes, for quick smoke runs) and returns a :class:`~parsample.stats.Verdict`.
Engine bookkeeping counters from every check are pooled in `TALLY`.
"""

import math
from functools import partial

import numpy as np

from .coordinate import sample_any_order, sequential_baseline
from .csvio import discrete_csv, gaussian_csv, pinning_csv, scaling_csv
from .diffusion import build_schedule, euler_baseline, ito_identity_check, sample_diffusion
from .discrete import AllEqualMixture, MarkovChainTarget, random_table
from .engine import finite_pair, srs
from .gaussian import AtomSet
from .infotheory import (
    dirichlet_alpha,
    fully_correlated,
    pinning_lemma_check,
    potential_phi,
    random_joint,
    total_correlation,
    tv_distance,
)
from .stats import (
    LEVEL,
    ScalingRecord,
    Verdict,
    chi_square_gof,
    empirical_tv,
    encode_rows,
    ks_two_sample,
    loglog_slope,
    moment_check,
)
from .streams import RandomSource

TALLY = {"visits": 0, "violations": 0, "max_calls": 0}


def _count(result):
    eng = result.info.get("engine")
    if eng is not None:
        TALLY["visits"] += eng.visits
        TALLY["violations"] += eng.violations
        TALLY["max_calls"] = max(TALLY["max_calls"], eng.max_calls)
    return result


def _n(full, scale, least=1):
    return max(least, int(round(full * scale)))


# -- targets and families --------------------------------------------------

def two_atoms():
    return AtomSet([[-1.0], [1.0]])


def three_atoms():
    ang = 2 * np.pi * np.arange(3) / 3
    return AtomSet(np.stack([np.cos(ang), np.sin(ang)], axis=1))


def parse_family(spec):
    """``markov:p_stay=0.99[,q=2]`` or ``allequal:lambda=0.5[,q=2]``."""
    name, _, args = spec.partition(":")
    kw = {}
    for part in filter(None, args.split(",")):
        key, _, val = part.partition("=")
        kw[key.strip()] = float(val)
    q = int(kw.pop("q", 2))
    if name == "markov":
        p = kw.pop("p_stay", 0.99)
        make = partial(MarkovChainTarget.sticky, q=q, p_stay=p)
    elif name == "allequal":
        lam = kw.pop("lambda", 0.5)
        make = partial(AllEqualMixture, lam, q=q)
    else:
        raise ValueError(f"unknown family {name!r}")
    if kw:
        raise ValueError(f"unknown family parameters {sorted(kw)}")
    return make


def parse_grid(spec):
    """``a..b:xk`` (geometric, ratio k), ``a..b`` (step 1) or ``a,b,c``."""
    if ".." not in spec:
        return [int(v) for v in spec.split(",")]
    rng, _, step = spec.partition(":")
    a, b = (int(v) for v in rng.split(".."))
    if a < 1 or b < a:
        raise ValueError(f"bad grid {spec!r}")
    if not step:
        return list(range(a, b + 1))
    if not step.startswith("x") or int(step[1:]) < 2:
        raise ValueError(f"bad grid step {step!r}")
    k, out, v = int(step[1:]), [], a
    while v <= b:
        out.append(v)
        v *= k
    return out


def scaling_records(family, ns, trials, seed, method="rs", tree="binary", rho=None):
    """One record per (n, trial); trial t of size n uses stream (n, t) of `seed`."""
    make = parse_family(family) if isinstance(family, str) else family
    out = []
    for n in ns:
        target = make(n)
        rng = RandomSource(seed).child(n).spawn(trials)
        if method == "rs":
            res = _count(sample_any_order(target, tree, rho=rho, rng=rng))
        elif method == "baseline":
            res = sequential_baseline(target, rng=rng)
        else:
            raise ValueError(f"unknown method {method!r}")
        out += [ScalingRecord(n, t, int(res.rounds[t]), int(res.queries[t]), seed,
                              family if isinstance(family, str) else "")
                for t in range(trials)]
    return out


def pinning_rows(instances, m, q, seed, k=2, method="partitions"):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(instances):
        alpha = dirichlet_alpha(i)
        j = random_joint(m, q, alpha, rng)
        lhs, rhs, ok = pinning_lemma_check(j, k, method)
        rows.append((i, m, q, k, alpha, lhs, rhs, rhs - lhs, int(ok)))
    return rows


# -- checks ------------------------------------------------------------------

def exactness_discrete(seed=0, scale=1.0):
    """RS and the sequential baseline against the exact law of random tables."""
    gen = np.random.default_rng(seed)
    M = _n(300000, scale, 1000)
    worst_tv, worst_p, rows = 0.0, 1.0, []
    for t in range(20):
        target = random_table(6, 3, 1.0, gen)
        exact = target.exact_joint()
        rng = RandomSource(seed).child(t)
        for name, res in (
                ("rs", _count(sample_any_order(target, rng=rng.child(0).spawn(M)))),
                ("baseline", sequential_baseline(target, rng=rng.child(1).spawn(M)))):
            codes = encode_rows(res.x, 3)
            tv, p = empirical_tv(codes, exact), chi_square_gof(codes, exact)
            rows.append({"table": t, "sampler": name, "tv": tv, "p": p})
            worst_tv, worst_p = max(worst_tv, tv), min(worst_p, p)
    ok = worst_tv <= 0.035 and worst_p >= LEVEL
    return Verdict("exactness-discrete", worst_tv, 0.035, ok,
                   {"min_p": worst_p, "p_threshold": LEVEL, "samples": M, "runs": rows})


def srs_acceptance(seed=0, scale=1.0):
    """First-draw and fallback acceptance rates against ``1 - d_TV`` and ``d_TV``."""
    gen = np.random.default_rng(seed)
    runs = _n(10000, scale, 200)
    worst, rows = 0.0, []
    for t in range(10):
        k = int(gen.integers(2, 17))
        mu, nu = gen.dirichlet(np.ones(k)), gen.dirichlet(np.ones(k))
        d = tv_distance(mu, nu)
        out, acc, draws, heads = srs(*finite_pair(mu, nu), RandomSource(seed).child(t).spawn(runs))
        z1 = (acc.sum() - runs * (1 - d)) / math.sqrt(runs * d * (1 - d))
        nd = draws.sum()
        z2 = (heads.sum() - nd * d) / math.sqrt(nd * d * (1 - d)) if nd else 0.0
        rows.append({"pair": t, "k": k, "dtv": d, "first_rate": float(acc.mean()),
                     "fallback_rate": float(heads.sum() / nd) if nd else None,
                     "z_first": float(z1), "z_fallback": float(z2)})
        worst = max(worst, abs(z1), abs(z2))
    return Verdict("srs-acceptance", worst, 4.0, worst <= 4.0, {"runs": runs, "pairs": rows})


MARKOV = "markov:p_stay=0.99"


def query_bound(seed=0, scale=1.0, records=None):
    """Mean queries / (n log2 n) at the largest n against the smallest n."""
    trials = _n(50, scale, 5)
    recs = records or scaling_records(MARKOV, [64, 4096], trials, seed)
    by_n = {}
    for r in recs:
        by_n.setdefault(r.n, []).append(r.queries)
    lo, hi = min(by_n), max(by_n)
    norm = {n: float(np.mean(v)) / (n * math.log2(n)) for n, v in by_n.items()}
    ratio = norm[hi] / norm[lo]
    return Verdict("query-bound", ratio, 1.5, ratio <= 1.5,
                   {"trials": trials, "normalised": {str(n): v for n, v in norm.items()}})


def round_scaling(seed=0, scale=1.0):
    """Log-log slope of mean rounds for RS and for the sequential baseline."""
    trials = _n(50, scale, 5)
    ns = parse_grid("64..4096:x2")
    recs = scaling_records(MARKOV, ns, trials, seed)
    base = scaling_records(MARKOV, ns, trials, seed, method="baseline")
    s, se = loglog_slope([r.n for r in recs], [r.rounds for r in recs])
    bs, bse = loglog_slope([r.n for r in base], [r.rounds for r in base])
    ok = s <= 0.75 and se <= 0.05 and abs(bs - 1.0) <= 0.02
    means = {str(n): float(np.mean([r.rounds for r in recs if r.n == n])) for n in ns}
    return Verdict("round-scaling", s, 0.75, ok,
                   {"stderr": se, "stderr_threshold": 0.05, "baseline_slope": bs,
                    "baseline_stderr": bse, "trials": trials, "mean_rounds": means,
                    "query_bound": query_bound(records=recs).to_dict()})


def pinning(seed=0, scale=1.0):
    """Pinning inequality on random joints, and equality when fully correlated."""
    count = _n(1000, scale, 10)
    small = _n(200, scale, 5)
    worst = math.inf
    parts = []
    for q in (2, 3):
        rows = pinning_rows(count, 4, q, seed + q)
        parts.append({"m": 4, "q": q, "k": 2, "instances": count,
                      "min_margin": min(r[7] for r in rows)})
        worst = min(worst, parts[-1]["min_margin"])
    for k in (2, 3):
        rows = pinning_rows(small, 6, 2, seed + 10 + k, k=k)
        parts.append({"m": 6, "q": 2, "k": k, "instances": small,
                      "min_margin": min(r[7] for r in rows)})
        worst = min(worst, parts[-1]["min_margin"])
    lhs, rhs, _ = pinning_lemma_check(fully_correlated(4, 2), 2)
    gap = abs(lhs - rhs)
    ok = worst >= -1e-9 and gap <= 1e-9
    return Verdict("pinning", worst, -1e-9, ok,
                   {"groups": parts, "equality_gap": gap, "equality_lhs": lhs,
                    "equality_rhs": rhs})


def potential_bound(seed=0, scale=1.0):
    """Total correlation <= phi <= n log q on random joints."""
    gen = np.random.default_rng(seed)
    count = _n(1000, scale, 10)
    worst_c, worst_phi = math.inf, math.inf
    for i in range(count):
        m, q = int(gen.integers(2, 6)), int(gen.integers(2, 4))
        j = random_joint(m, q, dirichlet_alpha(i), gen)
        phi = potential_phi(j, range(m))
        worst_c = min(worst_c, phi - total_correlation(j))
        worst_phi = min(worst_phi, m * math.log(q) - phi)
    ok = worst_c >= -1e-9 and worst_phi >= -1e-9
    return Verdict("potential-bound", min(worst_c, worst_phi), -1e-9, ok,
                   {"instances": count, "min_phi_minus_tc": worst_c,
                    "min_nlogq_minus_phi": worst_phi})


EXACT_DELTA = 0.125


def gaussian_exact(seed=0, scale=1.0, rho=None):
    """Two-sample KS against Euler-Maruyama, and rounds at N = 64."""
    M = _n(50000, scale, 500)
    rows, worst_p, worst_ratio = [], 1.0, 0.0
    for name, target in (("two-atom-1d", two_atoms()), ("three-atom-2d", three_atoms())):
        sch = build_schedule(target.R, EXACT_DELTA, 1.0, target.n)
        rng = RandomSource(seed).child(target.n)
        res = _count(sample_diffusion(target, sch, rho=rho, rng=rng.child(0).spawn(M)))
        base = euler_baseline(target, sch, rng=rng.child(1).spawn(M))
        ps = [ks_two_sample(res.x[:, j], base.x[:, j])[1] for j in range(target.n)]
        ratio = float(res.rounds.mean()) / sch.steps
        rows.append({"target": name, "N": sch.N, "L": sch.L, "rho": res.info["rho"],
                     "ks_p": ps, "rounds_over_NL": ratio,
                     "median_rounds_over_NL": float(np.median(res.rounds)) / sch.steps})
        worst_p, worst_ratio = min(worst_p, min(ps)), max(worst_ratio, ratio)
    ok = worst_p >= LEVEL and worst_ratio <= 0.25
    return Verdict("gaussian-exact", worst_ratio, 0.25, ok,
                   {"min_ks_p": worst_p, "p_threshold": LEVEL, "samples": M, "targets": rows})


def gaussian_accuracy(seed=0, scale=1.0):
    """Output moments against those of ``mu * N(0, delta I)``."""
    M = _n(5000, scale, 500)
    delta, eps = 0.05, 0.1
    rows, ok = [], True
    for name, target in (("two-atom-1d", two_atoms()), ("three-atom-2d", three_atoms())):
        sch = build_schedule(target.R, delta, eps, target.n)
        res = _count(sample_diffusion(target, sch, rng=RandomSource(seed).child(target.n).spawn(M)))
        trace = target.cov_trace_prior() + target.n * delta
        mean_ok, tr_ok, z, err = moment_check(res.x, target.mean, trace)
        rows.append({"target": name, "N": sch.N, "L": sch.L, "mean_z": z,
                     "trace_rel_err": err, "trace_expected": trace})
        ok = ok and mean_ok and tr_ok
    worst = max(r["trace_rel_err"] for r in rows)
    return Verdict("gaussian-accuracy", worst, 0.10, ok,
                   {"samples": M, "mean_z_threshold": 4.0, "targets": rows})


def ito_identity(seed=0, scale=1.0):
    paths = _n(100000, scale, 2000)
    lhs, rhs, rel = ito_identity_check(two_atoms(), 0.5, 2.0, paths=paths, dt_fine=1e-3, seed=seed)
    return Verdict("ito-identity", rel, 0.05, rel <= 0.05,
                   {"lhs": lhs, "rhs": rhs, "paths": paths})


def bookkeeping(seed=0, scale=1.0):
    """Batch sizes against ``(1 + rho) i*`` over varied targets and rho."""
    start = dict(TALLY)
    M = _n(2000, scale, 100)
    gen = np.random.default_rng(seed)
    rng = RandomSource(seed)
    for i, rho in enumerate((0.1, 0.5, 1.0, 2.0)):
        _count(sample_any_order(random_table(5, 3, 0.3, gen), rho=rho,
                                rng=rng.child(i).spawn(M)))
        _count(sample_any_order(MarkovChainTarget.sticky(256), rho=rho,
                                rng=rng.child(10 + i).spawn(M // 10)))
        _count(sample_any_order(AllEqualMixture(0.5, 16, 2), "root-heavy:2", rho=rho,
                                rng=rng.child(20 + i).spawn(M)))
        sch = build_schedule(1.0, EXACT_DELTA, 1.0, 1)
        _count(sample_diffusion(two_atoms(), sch, rho=rho, rng=rng.child(30 + i).spawn(M)))
    visits = TALLY["visits"] - start["visits"]
    bad = TALLY["violations"] - start["violations"]
    return Verdict("bookkeeping", bad, 0, bad == 0 and visits > 0,
                   {"visits": visits, "max_calls": TALLY["max_calls"],
                    "all_suites": dict(TALLY)})


def csv_outputs(seed=0, scale=1.0):
    """CSV text of every output-producing command at a small size."""
    M = _n(200, scale, 20)
    table = random_table(5, 3, 1.0, np.random.default_rng(seed))
    sch = build_schedule(1.0, EXACT_DELTA, 1.0, 1)
    out = {
        "sample-discrete": discrete_csv(sample_any_order(table, seed=seed, samples=M)),
        "baseline-discrete": discrete_csv(sequential_baseline(table, seed=seed, samples=M)),
        "sample-gaussian": gaussian_csv(sample_diffusion(three_atoms(),
                                                         build_schedule(1.0, EXACT_DELTA, 1.0, 2),
                                                         seed=seed, samples=M)),
        "baseline-gaussian": gaussian_csv(euler_baseline(two_atoms(), sch, seed=seed, samples=M)),
        "scaling": scaling_csv(scaling_records(MARKOV, [64, 128, 256], 5, seed)),
        "pinning-check": pinning_csv(pinning_rows(20, 4, 2, seed)),
    }
    return out


def determinism(seed=0, scale=1.0):
    """Two runs of every CSV-producing command give identical bytes."""
    a, b = csv_outputs(seed, scale), csv_outputs(seed, scale)
    differ = sorted(k for k in a if a[k].encode() != b[k].encode())
    return Verdict("determinism", len(differ), 0, not differ,
                   {"outputs": sorted(a), "differ": differ})


CHECKS = {
    "exactness-discrete": exactness_discrete,
    "srs-acceptance": srs_acceptance,
    "query-bound": query_bound,
    "round-scaling": round_scaling,
    "pinning": pinning,
    "potential-bound": potential_bound,
    "gaussian-exact": gaussian_exact,
    "gaussian-accuracy": gaussian_accuracy,
    "ito-identity": ito_identity,
    "bookkeeping": bookkeeping,
    "determinism": determinism,
}
