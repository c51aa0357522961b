"""Labelled, counter-based random streams.

Every draw is a pure function of ``(stream key, draw counter)`` and every
child stream is a pure function of ``(parent key, label)``.  A batch of
streams is just an array of 64-bit keys, so a sample's randomness never
depends on which other samples share its batch or on execution order.

The mixing function is the SplitMix64 finaliser.
"""

import numpy as np

from ._normal import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_CHILD_SALT = np.uint64(0xD1B54A32D192ED03)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO53 = 2.0 ** -53


def mix64(x):
    """SplitMix64 finaliser applied elementwise to a uint64 array."""
    # array arithmetic on uint64 wraps silently, which is what we want
    return _mix(np.atleast_1d(np.asarray(x, dtype=np.uint64)))


def _mix(x):
    z = x ^ (x >> _S30)
    z = z * _M1
    z = z ^ (z >> _S27)
    z = z * _M2
    return z ^ (z >> _S31)


class RandomSource:
    """A batch of independent random streams.

    Parameters
    ----------
    seed : int, optional
        64-bit seed for a single root stream.
    keys : array of uint64, optional
        Explicit stream keys (one per row).  Mutually exclusive with `seed`.

    Notes
    -----
    Draw methods return arrays with a leading axis of length ``len(self)``;
    row ``b`` only ever depends on ``keys[b]`` and the draw counter, which
    advances identically for all rows.  A single stream is single-consumer.
    """

    def __init__(self, seed=None, keys=None):
        if keys is None:
            if seed is None:
                raise ValueError("either seed or keys is required")
            seed = int(seed)
            if not 0 <= seed < 2**64:
                raise ValueError("seed must be a 64-bit unsigned integer")
            keys = mix64(np.array([seed], dtype=np.uint64))
        elif seed is not None:
            raise ValueError("pass seed or keys, not both")
        self.keys = np.ascontiguousarray(keys, dtype=np.uint64).reshape(-1)
        self.counter = 0
        self._base = None

    @classmethod
    def _raw(cls, keys, counter=0):
        out = cls.__new__(cls)
        out.keys, out.counter, out._base = keys, counter, None
        return out

    def __len__(self):
        return self.keys.shape[0]

    def __repr__(self):
        return f"RandomSource(streams={len(self)}, counter={self.counter})"

    def child(self, label):
        """Child streams keyed by `label` (int or per-row int array)."""
        if self._base is None:
            self._base = _mix(self.keys ^ _CHILD_SALT)
        if isinstance(label, (int, np.integer)):
            off = np.uint64((0x9E3779B97F4A7C15 * (int(label) + 1)) % 2**64)
        else:
            off = _GOLDEN * (np.asarray(label, dtype=np.uint64) + np.uint64(1))
        return RandomSource._raw(_mix(self._base + off))

    def spawn(self, size):
        """Split every stream into `size` children labelled ``0..size-1``.

        The result has ``len(self) * size`` rows, row-major in (parent, label).
        """
        rows = np.repeat(np.arange(len(self)), size)
        labels = np.tile(np.arange(size, dtype=np.uint64), len(self))
        return self.take(rows).child(labels)

    def take(self, idx):
        """Select (or replicate) rows; the draw counter is preserved."""
        return RandomSource._raw(self.keys[np.asarray(idx, dtype=np.intp)], self.counter)

    def bits(self, *shape):
        """Raw uint64 draws of shape ``(len(self), *shape)``."""
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        ctr = np.arange(self.counter, self.counter + count, dtype=np.uint64)
        self.counter += count
        out = _mix(self.keys[:, None] + _GOLDEN * (ctr[None, :] + np.uint64(1)))
        return out.reshape((len(self),) + tuple(shape))

    def uniform(self, *shape):
        """Uniform draws on the open interval (0, 1)."""
        b = self.bits(*shape)
        return ((b >> _S11).astype(np.float64) + 0.5) * _TWO53

    def normal(self, *shape):
        """Standard normal draws by inverse-CDF transform of `uniform`."""
        return ndtri(self.uniform(*shape))


def root_streams(seed, size):
    """`size` per-sample streams derived from one seed (row i = label i)."""
    return RandomSource(seed).spawn(size)
