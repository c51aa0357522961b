import math

import numpy as np
import pytest

from parsample.coordinate import (
    CoordinateScheme,
    CoordState,
    block_tv,
    level_tv_sums,
    make_tree,
    parse_tree,
    potential_bound,
    random_permutations,
    sample_any_order,
    sequential_baseline,
)
from parsample.discrete import (
    AllEqualMixture,
    ExplicitTable,
    MarkovChainTarget,
    NoisyDiscreteOracle,
    random_table,
)
from parsample.stats import chi_square_gof, empirical_tv, encode_rows
from parsample.streams import RandomSource

COUPLED = ExplicitTable([0.5, 0, 0, 0.5], 2, 2)


def state(target, rows, sigma=None):
    sigma = np.tile(np.arange(target.n), (rows, 1)) if sigma is None else sigma
    return CoordState(np.full((rows, target.n), -1), sigma)


def test_speculation_law_coupled():
    sch = CoordinateScheme(COUPLED)
    blk = sch.speculate(state(COUPLED, 40000), 0, 2, RandomSource(0).spawn(40000))
    freq = np.bincount(encode_rows(blk, 2), minlength=4) / 40000
    assert np.all(np.abs(freq - 0.25) < 4 * math.sqrt(0.25 * 0.75 / 40000))
    assert block_tv(COUPLED, [0, 1]) == pytest.approx(0.5)


def test_log_ratio_examples(gen):
    sch = CoordinateScheme(COUPLED)
    st = state(COUPLED, 2)
    lr = sch.log_ratio(st, 0, 2, np.array([[0, 0], [0, 1]]))
    assert lr[0] == pytest.approx(math.log(2))
    assert lr[1] == -np.inf
    assert sch.log_ratio(st, 1, 2, np.array([[0], [1]])).tolist() == [0, 0]
    p = np.ones(())
    for _ in range(3):
        p = np.multiply.outer(p, gen.dirichlet(np.ones(3)))
    ind = CoordinateScheme(ExplicitTable(p.reshape(-1), 3, 3))
    blocks = gen.integers(0, 3, size=(50, 3))
    assert np.allclose(ind.log_ratio(state(ind.target, 50), 0, 3, blocks), 0, atol=1e-12)


def test_ratio_is_a_density(gen):
    t = random_table(4, 2, 0.5, gen)
    sch = CoordinateScheme(t)
    st = state(t, 1)
    mu, nu = sch.block_laws(st, 0, 4)
    blocks = np.array(np.unravel_index(np.arange(16), (2,) * 4)).T
    lr = sch.log_ratio(CoordState(np.full((16, 4), -1), np.tile(np.arange(4), (16, 1))), 0, 4, blocks)
    assert np.sum(nu[0] * np.exp(lr)) == pytest.approx(1, abs=1e-12)
    assert np.allclose(nu[0] * np.exp(lr), mu[0])


def test_permutations_uniform():
    perms = random_permutations(RandomSource(1).spawn(60000), 3)
    codes = perms @ np.array([9, 3, 1])
    _, counts = np.unique(codes, return_counts=True)
    assert len(counts) == 6
    assert chi_square_gof(np.unique(codes, return_inverse=True)[1], np.full(6, 1 / 6)) > 1e-3


def test_single_coordinate():
    t = ExplicitTable([0.2, 0.8], 1, 2)
    res = sample_any_order(t, seed=0, samples=20000)
    assert (res.rounds == 1).all() and (res.queries == 1).all()
    assert abs(res.x.mean() - 0.8) < 4 * math.sqrt(0.16 / 20000)


def test_baseline_rounds():
    res = sequential_baseline(MarkovChainTarget.sticky(5), seed=0, samples=10)
    assert (res.rounds == 5).all() and (res.queries == 5).all()
    assert (sequential_baseline(ExplicitTable([0.5, 0.5], 1, 2), seed=0, samples=3).rounds == 1).all()


def test_product_target_rounds_independent_of_n():
    for n in (4, 16, 64):
        target = MarkovChainTarget([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], n)
        res = sample_any_order(target, seed=0, samples=200)
        assert (res.rounds == 2).all(), n


def test_three_way_agreement(gen):
    t = random_table(4, 3, 1.0, gen)
    exact = t.exact_joint()
    M = 100000
    a = encode_rows(sample_any_order(t, seed=1, samples=M).x, 3)
    b = encode_rows(sequential_baseline(t, seed=2, samples=M).x, 3)
    for codes in (a, b):
        assert chi_square_gof(codes, exact) > 1e-3
        assert empirical_tv(codes, exact) < 0.035


def test_padding_strips_dummies(gen):
    t = random_table(5, 2, 0.5, gen)
    res = sample_any_order(t, seed=3, samples=50000)
    assert res.x.shape == (50000, 5) and res.info["tree"].N == 8
    # a root accept charges the five real coordinates twice and the dummies nothing
    assert res.queries[res.rounds == 2].tolist() == [10] * int((res.rounds == 2).sum())
    assert (res.rounds == 2).any()
    assert chi_square_gof(encode_rows(res.x, 2), t.exact_joint()) > 1e-3
    rec = sample_any_order(ExplicitTable([0.5, 0.5], 1, 2), seed=3, samples=2)
    assert rec.x.shape == (2, 1)


def test_root_heavy_exact():
    t = AllEqualMixture(0.5, 16, 2)
    res = sample_any_order(t, "root-heavy:2", seed=5, samples=30000)
    same = (res.x == res.x[:, :1]).all(axis=1)
    # P(all equal) = lam + (1 - lam) * 2 / 2^16
    p = 0.5 + 0.5 * 2 / 2**16
    assert abs(same.mean() - p) < 4 * math.sqrt(p * (1 - p) / 30000)
    assert abs(res.x.mean() - 0.5) < 4 * math.sqrt(0.25 / 30000) * 4


def test_tree_kinds():
    assert parse_tree("binary") == ("binary", None)
    assert parse_tree("root-heavy:3") == ("root-heavy", 3)
    with pytest.raises(ValueError):
        parse_tree("ternary")
    assert make_tree(16, "root-heavy:2").root.speculate is False


def test_default_rho():
    res = sample_any_order(MarkovChainTarget.sticky(64), seed=0, samples=2)
    assert res.info["rho"] == pytest.approx(1 / 6)
    res = sample_any_order(COUPLED, seed=0, samples=2)
    assert res.info["rho"] == 1.0


def test_noisy_mode_flagged():
    t = NoisyDiscreteOracle(MarkovChainTarget.sticky(8), 0.05)
    res = sample_any_order(t, seed=0, samples=20)
    assert res.info["approximate"]
    assert not sample_any_order(t.inner, seed=0, samples=2).info["approximate"]


def test_potential_bound_random_tables(gen):
    for i in range(12):
        n = int(gen.integers(2, 6))
        q = int(gen.integers(2, 4))
        t = random_table(n, q, (0.1, 1.0, 10.0)[i % 3], gen)
        levels = level_tv_sums(t)
        assert levels.sum() <= potential_bound(n, q) + 1e-9
    for _ in range(2):
        t = random_table(8, 2, 0.1, gen)
        levels = level_tv_sums(t, perms=40, rng=gen)
        assert levels.sum() <= potential_bound(8, 2) + 1e-9


def test_potential_bound_fully_correlated_per_level(gen):
    for n in (4, 8):
        levels = level_tv_sums(AllEqualMixture(1.0, n, 2), perms=10, rng=gen)
        assert np.all(levels <= potential_bound(n, 2) + 1e-9)
        assert levels[0] == pytest.approx(1 - 2.0 ** (1 - n))


def test_query_shape_small():
    norm = []
    for n in (64, 256):
        res = sample_any_order(MarkovChainTarget.sticky(n), seed=11, samples=60)
        norm.append(res.queries.mean() / (n * math.log2(n)))
    assert max(norm) < 6
