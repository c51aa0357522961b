"""One check per acceptance criterion, each at its stated tolerance.

Every test appends a PASS/FAIL line to `LINES`; the lines are printed at
the end of the pytest session (see conftest.py) or by running this file
directly.
"""

import sys

import pytest

from parsample import suites

SEED = 0
LINES = []


def _fmt(v):
    return f"{v:.4g}" if isinstance(v, float) else str(v)


def record(number, verdict, extra=""):
    word = "PASS" if verdict.passed else "FAIL"
    line = (f"criterion {number:2d} {verdict.check:20s} {word}  "
            f"statistic={_fmt(float(verdict.statistic))} threshold={_fmt(float(verdict.threshold))}")
    if extra:
        line += "  " + extra
    LINES.append(line)
    return verdict


@pytest.fixture(scope="module")
def scaling():
    return suites.round_scaling(seed=SEED)


def test_c01_discrete_exactness():
    v = suites.exactness_discrete(seed=SEED)
    record(1, v, f"max TV over 40 runs; min chi2 p={v.detail['min_p']:.3g}")
    assert v.passed, v.to_json()


def test_c02_srs_acceptance():
    v = record(2, suites.srs_acceptance(seed=SEED), "max |z| over first-accept and fallback rates")
    assert v.passed, v.to_json()


def test_c03_query_bound(scaling):
    q = scaling.detail["query_bound"]
    v = suites.Verdict(q["check"], q["statistic"], q["threshold"], q["pass"], q.get("detail"))
    norm = q["detail"]["normalised"]
    record(3, v, "Q/(n log2 n): " + ", ".join(f"n={n}: {x:.3f}" for n, x in norm.items()))
    assert v.passed, v.to_json()


def test_c04_round_scaling(scaling):
    d = scaling.detail
    record(4, scaling, f"stderr={d['stderr']:.4f} baseline slope={d['baseline_slope']:.4f}"
                       f"+-{d['baseline_stderr']:.2g}")
    assert scaling.passed, scaling.to_json()


def test_c05_pinning():
    v = suites.pinning(seed=SEED)
    record(5, v, f"min margin; equality gap={v.detail['equality_gap']:.2g}")
    assert v.passed, v.to_json()


def test_c06_potential_bound():
    v = record(6, suites.potential_bound(seed=SEED), "min of phi-C and n log q-phi")
    assert v.passed, v.to_json()


def test_c07_gaussian_exact():
    v = suites.gaussian_exact(seed=SEED)
    parts = [f"{t['target']}: KS p={min(t['ks_p']):.3g} rounds/NL={t['rounds_over_NL']:.3f}"
             f" (median {t['median_rounds_over_NL']:.3f})" for t in v.detail["targets"]]
    record(7, v, "; ".join(parts))
    assert v.passed, v.to_json()


def test_c08_gaussian_accuracy():
    v = suites.gaussian_accuracy(seed=SEED)
    parts = [f"{t['target']}: mean |z|={t['mean_z']:.2f} trace err={t['trace_rel_err']:.4f}"
             for t in v.detail["targets"]]
    record(8, v, "; ".join(parts))
    assert v.passed, v.to_json()


def test_c09_ito_identity():
    v = suites.ito_identity(seed=SEED)
    record(9, v, f"lhs={v.detail['lhs']:.5f} rhs={v.detail['rhs']:.5f}")
    assert v.passed, v.to_json()


def test_c10_bookkeeping():
    # runs last: the tally also covers every suite above
    v = suites.bookkeeping(seed=SEED)
    tally = suites.TALLY
    ok = v.passed and tally["violations"] == 0
    v = suites.Verdict("bookkeeping", tally["violations"], 0, ok,
                       {"suite": v.detail, "all_suites": dict(tally)})
    record(10, v, f"visits={tally['visits']} max calls per visit={tally['max_calls']}")
    assert v.passed, v.to_json()


def test_c11_determinism():
    v = record(11, suites.determinism(seed=SEED), "outputs differing between repeated runs")
    assert v.passed, v.to_json()


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
