"""Numeric primitives shared by the simulator: normal CDF, seeded streams, dB helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "RandomStream",
    "normal_cdf",
    "inverse_normal_cdf",
    "sample_complex_gaussian",
    "db_to_linear",
    "linear_to_db",
    "dbm_to_watt",
]


def normal_cdf(a):
    """Standard normal CDF, ``0.5`` at the origin.

    Accepts scalars or arrays and returns the same shape.
    """
    return special.ndtr(a)


def inverse_normal_cdf(p):
    """Quantile function of the standard normal distribution.

    Parameters
    ----------
    p : float or array_like
        Probabilities, each strictly inside ``(0, 1)``.

    Raises
    ------
    ValueError
        If any probability lies outside the open unit interval.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise ValueError("inverse_normal_cdf is defined only on the open interval (0, 1)")
    # work in the lower tail, where 1 - p is exact and the CDF has full precision
    upper = arr > 0.5
    tail = np.where(upper, 1.0 - arr, arr)
    x = special.ndtri(tail)
    # one Newton step against the forward CDF
    x = x - (special.ndtr(x) - tail) * np.sqrt(2.0 * np.pi) * np.exp(0.5 * x * x)
    x = np.where(upper, -x, x)
    return x if x.ndim else float(x)


@dataclass(frozen=True)
class RandomStream:
    """Reproducible random stream addressed by ``(seed, index)``.

    Every ``(seed, index)`` pair maps to its own Philox key via
    :class:`numpy.random.SeedSequence`, so streams with different indices are
    independent and a stream can be rebuilt anywhere without replaying others.
    """

    seed: int
    index: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.index < 0:
            raise ValueError("seed and stream index must be non-negative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.index,))
        return np.random.Generator(np.random.Philox(seq))


def _as_generator(stream) -> np.random.Generator:
    if isinstance(stream, RandomStream):
        return stream.generator()
    return stream


def sample_complex_gaussian(stream, variance: float, n) -> np.ndarray:
    """Draw i.i.d. circularly symmetric complex Gaussian samples.

    ``stream`` may be a :class:`RandomStream` (a fresh generator is built, so
    the same stream always yields the same vector) or an existing
    :class:`numpy.random.Generator` whose state is advanced.
    """
    if variance < 0:
        raise ValueError("variance must be non-negative")
    rng = _as_generator(stream)
    shape = (n,) if np.isscalar(n) else tuple(n)
    z = rng.standard_normal(shape + (2,))
    return np.sqrt(variance / 2.0) * (z[..., 0] + 1j * z[..., 1])


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watt(x_dbm):
    """Convert dBm to watts (``-94 dBm`` gives about ``3.98e-13 W``)."""
    return db_to_linear(x_dbm) * 1e-3
