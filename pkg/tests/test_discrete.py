import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from parsample.discrete import (
    AllEqualMixture,
    ExplicitTable,
    MarkovChainTarget,
    NoisyDiscreteOracle,
    UnrealizableError,
    draw_categorical,
    load_target,
    random_table,
    target_from_dict,
)
from parsample.streams import RandomSource


def brute_conditional(joint, n, q, S, x_S, i):
    cube = joint.reshape((q,) * n)
    idx = tuple(x_S[S.index(k)] if k in S else slice(None) for k in range(n))
    sub = cube[idx]
    free = [k for k in range(n) if k not in S]
    axes = tuple(a for a, k in enumerate(free) if k != i)
    m = sub.sum(axis=axes)
    return m / m.sum()


def chain(n, stay=0.9):
    return MarkovChainTarget.sticky(n, 2, stay)


def test_coupled_bits():
    t = ExplicitTable([0.5, 0, 0, 0.5], 2, 2)
    assert np.allclose(t.conditional_marginal([0], [1], 1), [0, 1])


def test_uniform_cube():
    t = ExplicitTable(np.full(8, 1 / 8), 3, 2)
    for S, x, i in [([], [], 0), ([0], [1], 2), ([0, 2], [1, 0], 1)]:
        assert np.allclose(t.conditional_marginal(S, x, i), [0.5, 0.5])


def test_markov_bridge():
    p = chain(3).conditional_marginal([0, 2], [0, 0], 1)
    assert p[0] == pytest.approx(81 / 82, abs=1e-14)


def test_sample_deterministic_conditional():
    t = ExplicitTable([0.5, 0, 0, 0.5], 2, 2)
    rng = RandomSource(0).spawn(200)
    for b in range(20):
        assert t.sample_conditional([0], [1], 1, rng.take([b])) == 1


@pytest.mark.parametrize("target,S,x,i,p0", [
    (ExplicitTable(np.full(4, 0.25), 2, 2), [], [], 0, 0.5),
    (chain(3), [0, 2], [0, 0], 1, 81 / 82),
])
def test_sample_frequencies(target, S, x, i, p0):
    M = 100000
    p = target.conditional_marginal(S, x, i)
    draws = draw_categorical(np.broadcast_to(p, (M, 2)), RandomSource(4).spawn(M).uniform())
    freq = np.mean(draws == 0)
    assert abs(freq - p0) <= 4 * np.sqrt(p0 * (1 - p0) / M)


def test_exact_joint_examples():
    probs = np.random.default_rng(0).dirichlet(np.ones(9))
    t = ExplicitTable(probs, 2, 3)
    assert np.array_equal(t.exact_joint(), probs)
    ae = AllEqualMixture(1.0, 2, 2).exact_joint()
    assert np.allclose(ae, [0.5, 0, 0, 0.5])
    m = chain(3).exact_joint().reshape(2, 2, 2)
    P = np.array([[0.9, 0.1], [0.1, 0.9]])
    for a in range(2):
        for b in range(2):
            for c in range(2):
                assert m[a, b, c] == pytest.approx(0.5 * P[a, b] * P[b, c])


def _random_query(gen, target):
    n, q = target.n, target.q
    joint = target.exact_joint().reshape((q,) * n)
    x = np.unravel_index(gen.choice(joint.size, p=joint.reshape(-1)), joint.shape)
    k = gen.integers(0, n)
    S = sorted(gen.choice(n, size=k, replace=False).tolist())
    free = [j for j in range(n) if j not in S]
    return S, [int(x[s]) for s in S], int(gen.choice(free))


@pytest.mark.parametrize("make", [
    lambda g: random_table(4, 3, 0.5, g),
    lambda g: random_table(6, 2, 1.0, g),
    lambda g: MarkovChainTarget(g.dirichlet(np.ones(3)), g.dirichlet(np.ones(3), size=3), 7),
    lambda g: MarkovChainTarget.sticky(10, 2, 0.8),
    lambda g: AllEqualMixture(0.3, 5, 3),
    lambda g: AllEqualMixture(1.0, 4, 2),
])
def test_conditionals_match_brute_force(make, gen):
    target = make(gen)
    joint = target.exact_joint()
    for _ in range(500):
        S, x, i = _random_query(gen, target)
        got = target.conditional_marginal(S, x, i)
        ref = brute_conditional(joint, target.n, target.q, S, x, i)
        assert np.max(np.abs(got - ref)) < 1e-10
        assert got.sum() == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("make", [
    lambda g: random_table(5, 2, 0.3, g),
    lambda g: MarkovChainTarget(g.dirichlet(np.ones(3)), g.dirichlet(np.ones(3), size=3), 8),
    lambda g: AllEqualMixture(0.6, 6, 2),
])
def test_sequential_marginals_chain_rule(make, gen):
    target = make(gen)
    n, B = target.n, 200
    joint = target.exact_joint()
    assign = np.full((B, n), -1)
    coords = np.empty((B, 3), dtype=int)
    values = np.empty((B, 3), dtype=int)
    for b in range(B):
        S, x, _ = _random_query(gen, target)
        perm = gen.permutation([j for j in range(n) if j not in S])
        while len(perm) < 3:
            S, x, _ = _random_query(gen, target)
            perm = gen.permutation([j for j in range(n) if j not in S])
        assign[b, S] = x
        coords[b] = perm[:3]
        # values drawn from the true conditional so every prefix is realizable
        pins, vals = list(S), list(x)
        for r in range(3):
            p = brute_conditional(joint, n, target.q, pins, vals, int(coords[b, r]))
            values[b, r] = gen.choice(target.q, p=p)
            pins.append(int(coords[b, r]))
            vals.append(int(values[b, r]))
    got = target.sequential_marginals(assign, coords, values)
    for b in range(B):
        pins = [j for j in range(n) if assign[b, j] >= 0]
        vals = [int(assign[b, j]) for j in pins]
        for r in range(3):
            ref = brute_conditional(joint, n, target.q, pins, vals, int(coords[b, r]))
            assert np.max(np.abs(got[b, r] - ref)) < 1e-10
            pins.append(int(coords[b, r]))
            vals.append(int(values[b, r]))


def test_noise_zero_is_identity(gen):
    t = random_table(4, 2, 1.0, gen)
    noisy = NoisyDiscreteOracle(t, 0.0)
    for _ in range(50):
        S, x, i = _random_query(gen, t)
        assert np.array_equal(noisy.conditional_marginal(S, x, i), t.conditional_marginal(S, x, i))


def test_noise_moves_within_budget(gen):
    t = random_table(4, 3, 0.2, gen)
    noisy = NoisyDiscreteOracle(t, 0.05)
    for _ in range(100):
        S, x, i = _random_query(gen, t)
        a, b = noisy.conditional_marginal(S, x, i), t.conditional_marginal(S, x, i)
        assert 0.5 * np.abs(a - b).sum() <= 0.05 + 1e-15
        assert a.sum() == pytest.approx(1, abs=1e-12)


def test_unrealizable_query():
    t = ExplicitTable([0.5, 0, 0, 0.5], 2, 2)
    t3 = ExplicitTable([0.5, 0, 0, 0, 0, 0, 0, 0.5], 3, 2)
    with pytest.raises(UnrealizableError):
        t3.conditional_marginal([0, 1], [0, 1], 2)
    with pytest.raises(ValueError):
        t.conditional_marginal([0], [1], 0)


def test_table_validation():
    with pytest.raises(ValueError):
        ExplicitTable([0.5, 0.6], 1, 2)
    with pytest.raises(ValueError):
        ExplicitTable(np.ones(3) / 3, 1, 2)
    with pytest.raises(ValueError):
        ExplicitTable(np.ones(2**25) / 2**25, 25, 2)
    with pytest.raises(ValueError):
        MarkovChainTarget([0.5, 0.5], [[0.5, 0.4], [0.5, 0.5]], 3)
    with pytest.raises(ValueError):
        AllEqualMixture(1.5, 3, 2)


def test_large_markov_is_cheap():
    t = MarkovChainTarget.sticky(4096)
    assign = np.full((3, 4096), -1)
    assign[:, 0] = [0, 1, 0]
    assign[:, 4095] = [0, 0, 1]
    p = t.marginals(assign, np.array([[2048], [2048], [2048]]))
    assert np.allclose(p.sum(axis=-1), 1)
    assert p[0, 0, 0] > 0.5 and abs(p[1, 0, 0] - 0.5) < 1e-12


def test_json_round_trip(tmp_path, gen):
    for t in (random_table(3, 2, 1.0, gen), chain(5), AllEqualMixture(0.4, 4, 3),
              NoisyDiscreteOracle(chain(4), 0.1)):
        path = tmp_path / "t.json"
        path.write_text(json.dumps(t.to_dict()))
        back = load_target(path)
        assert type(back) is type(t)
        assert np.allclose(back.exact_joint(), t.exact_joint())
    with pytest.raises(ValueError):
        target_from_dict({"type": "nope", "n": 1, "q": 2})


@given(st.lists(st.floats(0, 1), min_size=2, max_size=6).filter(lambda v: sum(v) > 1e-3),
       st.floats(0, 1, exclude_max=True))
def test_draw_categorical_support(w, u):
    p = np.array(w) / sum(w)
    x = int(draw_categorical(p, np.array(u)))
    assert 0 <= x < len(p) and p[x] > 0
