import json

import numpy as np
import pytest

from parsample.gaussian import (
    AtomSet,
    NoisyGaussianOracle,
    denoiser_mean,
    load_atoms,
    noisy_denoiser_mean,
    posterior_cov_trace,
)

PM = AtomSet([[-1.0], [1.0]])


def direct_mean(atoms, w, t, y):
    logit = np.log(w) + atoms @ y - 0.5 * t * (atoms**2).sum(axis=1)
    p = np.exp(logit - logit.max())
    p /= p.sum()
    return p @ atoms


def test_single_atom():
    a = AtomSet([[0.3, -2.0]])
    for t, y in [(0.0, [0, 0]), (5.0, [10, -3]), (1e6, [1e5, 2])]:
        assert np.allclose(denoiser_mean(a, t, np.array(y, float)), [0.3, -2.0])
        assert posterior_cov_trace(a, t, np.array(y, float)) == 0


def test_two_atoms_tanh():
    ys = np.linspace(-3, 3, 13)[:, None]
    assert np.allclose(PM.denoise(1.0, ys)[:, 0], np.tanh(ys[:, 0]), atol=1e-14)
    assert PM.denoise(1.0, np.array([1.0]))[0] == pytest.approx(0.761594, abs=1e-6)
    assert PM.denoise(2.5, np.array([0.0]))[0] == 0


def test_cov_trace_examples():
    assert PM.cov_trace(0.0, np.array([0.3])) == pytest.approx(1.0)
    assert PM.cov_trace(1.0, np.array([50.0])) < 1e-40
    assert PM.cov_trace_prior() == pytest.approx(1.0)


def test_matches_direct_formula(gen):
    atoms = gen.normal(size=(5, 3))
    w = gen.dirichlet(np.ones(5))
    a = AtomSet(atoms, w)
    for _ in range(200):
        t = gen.exponential(3)
        y = gen.normal(size=3) * 3
        assert np.allclose(a.denoise(t, y), direct_mean(atoms, w, t, y), atol=1e-12)


def test_log_weights_normalised(gen):
    a = AtomSet(gen.normal(size=(4, 2)))
    lw = a.log_weights(np.full(100, 2.0), gen.normal(size=(100, 2)) * 5)
    assert np.allclose(np.logaddexp.reduce(lw, axis=1), 0, atol=1e-10)


def test_convex_hull_and_radius(gen):
    atoms = gen.normal(size=(6, 2))
    a = AtomSet(atoms)
    y = gen.normal(size=(10000, 2)) * gen.exponential(10, size=(10000, 1))
    t = gen.exponential(10, size=10000)
    f = a.denoise(t, y)
    assert np.all(np.linalg.norm(f - a.mean, axis=1) <= a.R + 1e-12)
    # weights reproduce f as a convex combination of the atoms
    w = np.exp(a.log_weights(t, y))
    assert np.allclose(w @ atoms, f)
    assert np.all(a.cov_trace(t, y) <= a.R**2 + 1e-12)


def test_extreme_inputs_finite():
    a = AtomSet([[-1.0, 0.0], [1.0, 2.0], [0.0, -1.0]])
    y = np.array([[1e6, -1e6], [-1e6, 1e6], [0, 0]])
    for t in (0.0, 1.0, 1e8):
        assert np.all(np.isfinite(a.denoise(t, y)))
        assert np.all(np.isfinite(a.cov_trace(t, y)))


def test_prior_at_time_zero():
    a = AtomSet([[0.0], [3.0]], [0.25, 0.75])
    assert a.denoise(0.0, np.array([100.0]))[0] == pytest.approx(2.25)


def test_noisy_wrapper(gen):
    a = AtomSet([[0.5, 0.5]])
    assert np.array_equal(noisy_denoiser_mean(NoisyGaussianOracle(a, 0.0), 1.0, np.ones(2)),
                          a.denoise(1.0, np.ones(2)))
    w = NoisyGaussianOracle(a, 0.1)
    y = gen.normal(size=(500, 2))
    t = gen.exponential(size=500)
    err = np.linalg.norm(w.denoise(t, y) - a.denoise(t, y), axis=1)
    assert np.allclose(err, 0.1, atol=1e-14)
    assert np.array_equal(w.denoise(t, y), w.denoise(t, y))
    assert not np.allclose(w.direction(t[:1], y[:1]), w.direction(t[1:2], y[1:2]))


def test_validation():
    with pytest.raises(ValueError):
        AtomSet([[0.0], [1.0]], [0.5, 0.6])
    with pytest.raises(ValueError):
        AtomSet([[0.0], [2.0]], R=0.5)
    with pytest.raises(ValueError):
        PM.denoise(-1.0, np.array([0.0]))
    with pytest.raises(ValueError):
        PM.denoise(1.0, np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        NoisyGaussianOracle(PM, -0.1)


def test_json_round_trip(tmp_path):
    path = tmp_path / "a.json"
    path.write_text(json.dumps(NoisyGaussianOracle(PM, 0.01).to_dict()))
    back = load_atoms(path)
    assert isinstance(back, NoisyGaussianOracle) and back.eps_score == 0.01
    assert np.array_equal(back.atoms, PM.atoms)
