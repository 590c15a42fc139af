"""Angle-domain analog beamformer selection.

Beams are drawn from a quantized cosine-angle grid.  A transmit (receive)
beam is picked as the grid angle that collects the most power from the
intended link's phase-response matrix, restricted to grid angles inside the
intended AoD (AoA) support and outside the SI support.  Only angular
information enters the selection; path gains never do.

The batch helpers at the bottom evaluate the same quantities for many
trials at once from path parameters, using the closed-form ULA array
factor instead of materialising ``N x M`` channel matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .channel import UlaGeometry

__all__ = [
    "AngularSupport",
    "BeamformerPair",
    "FeasibleSetEmpty",
    "quantized_angles",
    "dictionary_tx",
    "dictionary_rx",
    "support_from_angles",
    "feasible_indices",
    "select_tx_angle",
    "select_rx_angle",
    "build_pair",
    "effective_channels",
    "array_factor",
    "array_power",
    "tx_response",
    "rx_response",
    "select_batch",
]

Fallback = Literal["error", "nearest"]


class FeasibleSetEmpty(RuntimeError):
    """No grid angle lies inside the intended support and outside the SI support."""


@dataclass(frozen=True)
class AngularSupport:
    """Closed interval ``[lo, hi]`` in cosine-angle space."""

    lo: float
    hi: float

    def __post_init__(self):
        if not -1.0 <= self.lo <= self.hi <= 1.0:
            raise ValueError(f"invalid cosine support [{self.lo}, {self.hi}]")

    def contains(self, x):
        return (x >= self.lo) & (x <= self.hi)

    def distance(self, x):
        return np.maximum(0.0, np.maximum(self.lo - x, x - self.hi))


@dataclass(frozen=True)
class BeamformerPair:
    f: np.ndarray
    w: np.ndarray
    lam: float
    gam: float


def quantized_angles(n: int) -> np.ndarray:
    """Cosine grid ``-1 + (2k - 1)/n`` for ``k = 1..n``."""
    if n < 1:
        raise ValueError("grid size must be >= 1")
    return -1.0 + (2.0 * np.arange(1, n + 1) - 1.0) / n


def _check_cosine(x):
    if np.any(np.abs(x) > 1.0):
        raise ValueError("cosine angle must lie in [-1, 1]")


def dictionary_tx(lam, M: int, d: float = 0.5) -> np.ndarray:
    """Unit-norm transmit beam steered to cosine angle ``lam``."""
    _check_cosine(lam)
    m = np.arange(M)
    return np.exp(2j * np.pi * d * np.multiply.outer(lam, m)) / math.sqrt(M)


def dictionary_rx(gam, N: int, d: float = 0.5) -> np.ndarray:
    """Unit-norm receive combiner steered to cosine angle ``gam``."""
    _check_cosine(gam)
    n = np.arange(N)
    return np.exp(-2j * np.pi * d * np.multiply.outer(gam, n)) / math.sqrt(N)


def support_from_angles(mean: float, spread: float) -> AngularSupport:
    """Cosine image of ``[mean - spread, mean + spread]`` (radians)."""
    if not 0.0 < mean < math.pi:
        raise ValueError("mean angle must lie strictly between 0 and pi")
    if not 0.0 <= spread < math.pi / 2:
        raise ValueError("spread must lie in [0, pi/2)")
    if mean - spread < 0.0 or mean + spread > math.pi:
        raise ValueError("angular range leaves [0, pi]")
    # cos is decreasing on [0, pi]
    return AngularSupport(math.cos(mean + spread), math.cos(mean - spread))


def feasible_indices(n: int, intended: AngularSupport, si: AngularSupport,
                     fallback: Fallback = "error") -> np.ndarray:
    """Grid indices eligible for selection, ascending in angle.

    A single-element array has one beam and no angular selectivity, so its
    only grid point is always returned.  With ``fallback="nearest"`` an empty
    strict set is replaced by the non-SI grid points closest to the intended
    support.
    """
    grid = quantized_angles(n)
    if n == 1:
        return np.array([0])
    outside_si = ~si.contains(grid)
    idx = np.flatnonzero(intended.contains(grid) & outside_si)
    if idx.size:
        return idx
    if fallback == "nearest" and outside_si.any():
        dist = np.where(outside_si, intended.distance(grid), np.inf)
        return np.flatnonzero(dist == dist.min())
    raise FeasibleSetEmpty(
        f"no {n}-point grid angle inside [{intended.lo:.4f}, {intended.hi:.4f}] "
        f"and outside [{si.lo:.4f}, {si.hi:.4f}]")


def select_tx_angle(phi_t: np.ndarray, intended: AngularSupport, si: AngularSupport,
                    M: int, d: float = 0.5, fallback: Fallback = "error") -> float:
    """Quantized AoD maximising ``||Phi_t e_t(lam)||^2`` over the feasible grid.

    ``phi_t`` is the ``L x M`` transmit phase-response matrix.  Ties go to
    the smaller cosine.
    """
    grid = quantized_angles(M)
    idx = feasible_indices(M, intended, si, fallback)
    power = np.sum(np.abs(phi_t @ dictionary_tx(grid[idx], M, d).T) ** 2, axis=0)
    return float(grid[idx[np.argmax(power)]])


def select_rx_angle(phi_r: np.ndarray, intended: AngularSupport, si: AngularSupport,
                    N: int, d: float = 0.5, fallback: Fallback = "error") -> float:
    """Quantized AoA maximising ``||e_r(gam)^T Phi_r||^2``; ``phi_r`` is ``N x L``."""
    grid = quantized_angles(N)
    idx = feasible_indices(N, intended, si, fallback)
    power = np.sum(np.abs(dictionary_rx(grid[idx], N, d) @ phi_r) ** 2, axis=1)
    return float(grid[idx[np.argmax(power)]])


def build_pair(lam: float, gam: float, geometry: UlaGeometry) -> BeamformerPair:
    return BeamformerPair(
        f=dictionary_tx(lam, geometry.M, geometry.d),
        w=dictionary_rx(gam, geometry.N, geometry.d),
        lam=lam,
        gam=gam,
    )


def effective_channels(pair_i: BeamformerPair, pair_j: BeamformerPair,
                       H_i: np.ndarray, H_si_j: np.ndarray) -> tuple[complex, complex]:
    """Scalar channels seen by receiver ``j``: ``(w_j^T H_i f_i, w_j^T H_SI,j f_j)``."""
    if H_i.shape != (pair_j.w.size, pair_i.f.size):
        raise ValueError(f"intended channel shape {H_i.shape} does not match the beams")
    if H_si_j.shape != (pair_j.w.size, pair_j.f.size):
        raise ValueError(f"SI channel shape {H_si_j.shape} does not match the beams")
    return complex(pair_j.w @ H_i @ pair_i.f), complex(pair_j.w @ H_si_j @ pair_j.f)


def array_factor(x, n: int, d: float = 0.5) -> np.ndarray:
    """``sum_k exp(-j 2 pi d k x)`` for ``k = 0..n-1``, in closed form."""
    u = np.pi * d * np.asarray(x, dtype=float)
    s = np.sin(u)
    small = np.abs(s) < 1e-9
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(small, n * np.cos(n * u) / np.cos(u), np.sin(n * u) / s)
    return np.exp(-1j * (n - 1) * u) * ratio


def array_power(x, n: int, d: float = 0.5) -> np.ndarray:
    """``|array_factor(x, n, d)|**2`` without the complex phase term."""
    u = np.pi * d * np.asarray(x, dtype=float)
    s = np.sin(u)
    small = np.abs(s) < 1e-9
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(small, float(n * n), (np.sin(n * u) / s) ** 2)


def tx_response(aod, lam, M: int, d: float = 0.5) -> np.ndarray:
    """``phi_t(aod) @ e_t(lam)`` broadcast over ``aod`` and ``lam``."""
    return array_factor(np.cos(aod) - lam, M, d) / math.sqrt(M)


def rx_response(aoa, gam, N: int, d: float = 0.5) -> np.ndarray:
    """``e_r(gam)^T @ phi_r(aoa)`` broadcast over ``aoa`` and ``gam``."""
    return array_factor(gam - np.cos(aoa), N, d) / math.sqrt(N)


def select_batch(angles: np.ndarray, candidates: np.ndarray, n: int, d: float = 0.5,
                 side: Literal["tx", "rx"] = "tx") -> np.ndarray:
    """Per-trial argmax over candidate cosine angles.

    ``angles`` has shape ``(K, L)`` (path AoDs for ``"tx"``, AoAs for
    ``"rx"``); ``candidates`` is ascending, so ties go to the smaller
    cosine.  Returns the position within ``candidates`` for each trial.
    """
    c = np.cos(angles)[..., None]
    x = c - candidates if side == "tx" else candidates - c
    # the 1/n beam normalisation does not change the argmax
    power = np.sum(array_power(x, n, d), axis=-2)
    return np.argmax(power, axis=-1)
