import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from parsample.stats import (
    ScalingRecord,
    Verdict,
    chi_square_gof,
    empirical_tv,
    encode_rows,
    ks_two_sample,
    loglog_slope,
    moment_check,
)


def draws(p, M, gen):
    return gen.choice(len(p), size=M, p=p)


def test_empirical_tv_examples(gen):
    p = gen.dirichlet(np.ones(8))
    assert empirical_tv(draws(p, 10**6, gen), p) <= 0.01
    assert empirical_tv(np.zeros(10, dtype=int), [0.5, 0.5]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        empirical_tv(np.array([], dtype=int), [0.5, 0.5])
    with pytest.raises(ValueError):
        empirical_tv(np.array([2]), [0.5, 0.5])


def test_chi_square_calibration(gen):
    p = gen.dirichlet(np.ones(20))
    ps = [chi_square_gof(draws(p, 5000, gen), p) for _ in range(200)]
    assert abs(np.mean(np.array(ps) < 0.01) - 0.01) <= 0.02


def test_chi_square_power(gen):
    p = np.full(10, 0.1)
    bad = p.copy()
    bad[:5] += 0.01
    bad[5:] -= 0.01
    assert 0.5 * np.abs(bad - p).sum() == pytest.approx(0.05)
    assert chi_square_gof(draws(bad, 10**5, gen), p) < 1e-6


def test_chi_square_pooling_and_errors(gen):
    p = np.array([0.98, 0.01, 0.005, 0.005])
    assert chi_square_gof(draws(p, 200, gen), p) > 0
    assert chi_square_gof(np.array([1]), [1.0, 0.0]) == 0.0
    with pytest.raises(ValueError):
        chi_square_gof(np.array([], dtype=int), [0.5, 0.5])
    with pytest.raises(ValueError):
        chi_square_gof(np.zeros(10, dtype=int), [1.0])


def test_encode_rows():
    assert encode_rows(np.array([[0, 0], [1, 2], [2, 2]]), 3).tolist() == [0, 5, 8]


def test_loglog_slope_examples():
    ns = np.array([64, 128, 256, 512, 1024, 2048, 4096])
    s, se = loglog_slope(ns, 3 * ns**0.5)
    assert s == pytest.approx(0.5, abs=1e-12) and se < 1e-8
    assert loglog_slope(ns, 7.0 * ns)[0] == pytest.approx(1.0, abs=1e-12)
    assert loglog_slope(np.repeat(ns, 5), np.repeat(ns, 5))[0] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        loglog_slope([1, 2, 2], [1, 2, 3])


def test_ks_two_sample(gen):
    a, b = gen.normal(size=5000), gen.normal(size=5000)
    assert ks_two_sample(a, b)[1] > 1e-3
    assert ks_two_sample(a, b + 0.2)[1] < 1e-6


def test_moment_check(gen):
    x = gen.normal(loc=[1.0, -1.0], scale=1.0, size=(20000, 2))
    ok_m, ok_t, z, err = moment_check(x, [1.0, -1.0], 2.0)
    assert ok_m and ok_t and err < 0.05
    assert not moment_check(x, [1.2, -1.0], 2.0)[0]
    assert not moment_check(x, [1.0, -1.0], 3.0)[1]


def test_scaling_record_invariants():
    ScalingRecord(4, 0, 1, 4, 0)
    with pytest.raises(ValueError):
        ScalingRecord(4, 0, 0, 4, 0)
    with pytest.raises(ValueError):
        ScalingRecord(4, 0, 2, 3, 0)


def test_verdict_json():
    v = Verdict("x", np.float64(0.5), 1.0, np.bool_(True), {"a": np.int64(3), "b": math.inf})
    d = json.loads(v.to_json())
    assert d == {"check": "x", "statistic": 0.5, "threshold": 1.0, "pass": True,
                 "detail": {"a": 3, "b": "inf"}}


@given(st.lists(st.integers(0, 4), min_size=1, max_size=200))
def test_tv_in_unit_interval(xs):
    v = empirical_tv(np.array(xs), np.full(5, 0.2))
    assert 0 <= v <= 1
