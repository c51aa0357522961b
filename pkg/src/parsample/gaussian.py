"""Gaussian-denoiser oracles for finitely supported laws on R^n.

For a law with atoms ``x_i`` and weights ``w_i``, observing
``y = t X + sqrt(t) g`` tilts the weights to

    w_i(t, y)  proportional to  w_i * exp(<y, x_i> - t |x_i|^2 / 2),

and the denoiser returns the tilted mean.  Everything is batched over a
leading axis of query points.
"""

import json

import numpy as np
from scipy.special import logsumexp, softmax

from .streams import RandomSource, mix64


class AtomSet:
    """Discrete law on R^n with a closed-form Gaussian denoiser.

    Parameters
    ----------
    atoms : array (k, n)
    weights : array (k,), optional
        Defaults to uniform.
    R : float, optional
        Radius bound around the mean.  Computed when omitted; a supplied
        value must cover every atom.
    """

    def __init__(self, atoms, weights=None, R=None):
        atoms = np.asarray(atoms, dtype=np.float64)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        k = atoms.shape[0]
        if weights is None:
            weights = np.full(k, 1.0 / k)
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (k,) or np.any(weights < 0) or abs(weights.sum() - 1) > 1e-12:
            raise ValueError("weights must be a probability vector over the atoms")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        self.atoms, self.weights = atoms, weights
        self.n = atoms.shape[1]
        self.mean = weights @ atoms
        radius = float(np.sqrt(((atoms - self.mean) ** 2).sum(axis=1)).max())
        if R is None:
            R = radius
        elif R < radius - 1e-12:
            raise ValueError(f"R={R} does not cover the support (radius {radius})")
        self.R = float(R)
        self._logw = np.log(np.where(weights > 0, weights, 1.0))
        self._logw[weights == 0] = -np.inf
        self._sq = (atoms**2).sum(axis=1)

    def cov_trace_prior(self):
        return float(self.weights @ self._sq - self.mean @ self.mean)

    def _check(self, t, y):
        y = np.asarray(y, dtype=np.float64)
        single = y.ndim == 1
        y = np.atleast_2d(y)
        if y.shape[1] != self.n:
            raise ValueError(f"query dimension {y.shape[1]} != {self.n}")
        if not np.all(np.isfinite(y)):
            raise ValueError("query point must be finite")
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), y.shape[:1])
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ValueError("t must be finite and nonnegative")
        return t, y, single

    def _logits(self, t, y):
        logits = self._logw + y @ self.atoms.T - 0.5 * t[:, None] * self._sq
        return np.where(t[:, None] == 0, self._logw, logits)

    def log_weights(self, t, y):
        """Normalised log tilted weights, shape (B, k)."""
        t, y, _ = self._check(t, y)
        logits = self._logits(t, y)
        return logits - logsumexp(logits, axis=1, keepdims=True)

    def _tilted(self, t, y):
        t, y, single = self._check(t, y)
        return softmax(self._logits(t, y), axis=1), single

    def denoise(self, t, y):
        """Posterior mean ``E[X | tX + sqrt(t) g = y]``; prior mean at t = 0."""
        w, single = self._tilted(t, y)
        out = w @ self.atoms
        return out[0] if single else out

    def cov_trace(self, t, y):
        """Trace of the tilted posterior covariance."""
        w, single = self._tilted(t, y)
        m = w @ self.atoms
        out = np.maximum(w @ self._sq - (m**2).sum(axis=1), 0.0)
        return out[0] if single else out

    def to_dict(self):
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}


def _float_bits(a):
    return np.ascontiguousarray(a, dtype=np.float64).view(np.uint64)


class NoisyGaussianOracle:
    """Denoiser perturbed by exactly `eps_score` in a fixed direction per query.

    The direction is a hash of ``(t, y)``, so repeated queries agree.
    """

    def __init__(self, inner, eps_score):
        if eps_score < 0:
            raise ValueError("eps_score must be nonnegative")
        self.inner, self.eps_score = inner, float(eps_score)
        self.n, self.R, self.mean = inner.n, inner.R, inner.mean
        self.atoms, self.weights = inner.atoms, inner.weights

    def direction(self, t, y):
        t, y, single = self.inner._check(t, y)
        key = mix64(_float_bits(t))
        for j in range(self.n):
            key = mix64(key ^ _float_bits(y[:, j]))
        g = RandomSource(keys=key).normal(self.n)
        d = g / np.linalg.norm(g, axis=1, keepdims=True)
        return d[0] if single else d

    def denoise(self, t, y):
        f = self.inner.denoise(t, y)
        if self.eps_score == 0.0:
            return f
        return f + self.eps_score * self.direction(t, y)

    def cov_trace(self, t, y):
        return self.inner.cov_trace(t, y)

    def cov_trace_prior(self):
        return self.inner.cov_trace_prior()

    def to_dict(self):
        d = self.inner.to_dict()
        d["noise_score"] = self.eps_score
        return d


def denoiser_mean(target, t, y):
    return target.denoise(t, y)


def posterior_cov_trace(target, t, y):
    return target.cov_trace(t, y)


def noisy_denoiser_mean(wrapper, t, y):
    return wrapper.denoise(t, y)


def atoms_from_dict(spec):
    target = AtomSet(spec["atoms"], spec.get("weights"))
    if spec.get("noise_score"):
        target = NoisyGaussianOracle(target, float(spec["noise_score"]))
    return target


def load_atoms(path):
    with open(path) as fh:
        return atoms_from_dict(json.load(fh))
