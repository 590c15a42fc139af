"""Per-coherence-block transmission for the four duplexing/detection schemes.

Every runner works on a batch of ``K`` independent trials.  Channels enter
only through the scalar effective channels after analog beamforming (see
:class:`EffectiveChannels`); bits and unit-variance noise come pre-drawn in
a :class:`BlockInputs` so one batch can be replayed at several transmit
powers.

Frame layouts per block of ``Q`` intervals:

* ``fdnc``  both users send a cube-split symbol in all ``Q`` intervals.
* ``hdnc``  one user sends a cube-split symbol; directions alternate per block.
* ``hd-coherent``  interval 0 is a unit pilot, intervals ``1..Q-1`` carry QAM;
  directions alternate per block.
* ``fd-coherent``  interval 0 carries user 1's pilot (user 2 silent),
  interval 1 user 2's pilot (user 1 silent), intervals ``2..Q-1`` carry QAM
  from both users simultaneously.

No scheme applies digital SI cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constellation import (
    CubeSplitConfig,
    bits_to_int,
    decode_greedy,
    decode_ml,
    enumerate_points,
    gray_decode,
    int_to_bits,
    modulate,
)

__all__ = [
    "SCHEMES",
    "EffectiveChannels",
    "BlockInputs",
    "BlockResult",
    "qam_constellation",
    "qam_modulate",
    "qam_demodulate",
    "mmse_estimate",
    "draw_block_inputs",
    "run_block_fdnc",
    "run_block_hdnc",
    "run_block_hd_coherent",
    "run_block_fd_coherent",
]

SCHEMES = ("fdnc", "hdnc", "hd-coherent", "fd-coherent")


@dataclass(frozen=True)
class EffectiveChannels:
    """Scalar channels after beamforming, each of shape ``(K,)``.

    ``h12`` is user 1's signal as seen by user 2's combiner and ``si2`` the
    self-interference at user 2; ``h21``/``si1`` mirror them.
    """

    h12: np.ndarray
    h21: np.ndarray
    si1: np.ndarray
    si2: np.ndarray

    @property
    def size(self) -> int:
        return self.h12.shape[0]


@dataclass(frozen=True)
class BlockInputs:
    """Pre-drawn randomness for ``K`` blocks.

    ``bits[u]`` holds user ``u``'s payload, ``noise[u]`` unit-variance
    complex noise at user ``u``'s receiver, and ``direction`` selects the
    half-duplex direction (``0``: user 1 transmits).
    """

    bits: np.ndarray
    noise: np.ndarray
    direction: np.ndarray


@dataclass
class BlockResult:
    """Per-trial bit bookkeeping, arrays of shape ``(2, K)`` indexed by sender."""

    bits: np.ndarray
    errors: np.ndarray
    feasible: bool = True

    def __post_init__(self):
        assert np.all(self.errors <= self.bits)


# -- QAM -----------------------------------------------------------------------


def _pam(field_bits: np.ndarray, width: int) -> np.ndarray:
    levels = 2**width
    # label 0 maps to the largest positive amplitude
    return (levels - 1) - 2.0 * gray_decode(bits_to_int(field_bits))


@lru_cache(maxsize=None)
def qam_constellation(order: int) -> np.ndarray:
    """Unit-energy QAM points indexed by their MSB-first bit label.

    Square orders ``4**k`` use independent Gray-coded PAM on the in-phase
    (leading half of the bits) and quadrature axes.  Order 128 is the
    12x12 cross: a 16x8 Gray rectangle whose two outer column pairs are
    folded onto the missing top and bottom rows.  Neighbours stay one bit
    apart except across the fold seam (mean 1.14 bits per neighbour pair).
    """
    k = int(round(math.log2(order))) if order > 0 else 0
    labels = int_to_bits(np.arange(order), k) if k else None
    if order >= 4 and 2**k == order and k % 2 == 0:
        half = k // 2
        pts = _pam(labels[:, :half], half) + 1j * _pam(labels[:, half:], half)
    elif order == 128:
        i = _pam(labels[:, :4], 4)
        q = _pam(labels[:, 4:], 3)
        outer = np.abs(i) > 11
        new_i = np.sign(i) * (8 - np.abs(q))
        new_q = np.sign(q) * (np.abs(i) - 4)
        pts = np.where(outer, new_i + 1j * new_q, i + 1j * q)
    else:
        raise ValueError(f"unsupported QAM order {order}")
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    pts.setflags(write=False)
    return pts


def qam_modulate(bits, order: int) -> np.ndarray:
    """Map groups of ``log2(order)`` bits (last axis) to QAM symbols."""
    bits = np.asarray(bits)
    k = int(round(math.log2(order)))
    if bits.shape[-1] != k:
        raise ValueError(f"{order}-QAM takes {k} bits per symbol, got {bits.shape[-1]}")
    return qam_constellation(order)[bits_to_int(bits)]


def qam_demodulate(y, h_hat, rho: float, order: int) -> np.ndarray:
    """Nearest-point decision on ``y / (sqrt(rho) * h_hat)``.

    Entries with ``h_hat == 0`` are erased to all-zero bits.
    """
    y = np.asarray(y, dtype=complex)
    h_hat = np.broadcast_to(np.asarray(h_hat, dtype=complex), y.shape)
    pts = qam_constellation(order)
    k = int(round(math.log2(order)))
    scale = math.sqrt(rho) * h_hat
    ok = scale != 0
    z = np.divide(y, scale, out=np.zeros_like(y), where=ok)
    idx = np.argmin(np.abs(z[..., None] - pts), axis=-1)
    bits = int_to_bits(idx, k)
    bits[~ok] = 0
    return bits


def mmse_estimate(y_pilot, rho: float, noise_var: float):
    """Linear MMSE estimate from one unit pilot, ``sqrt(rho)/(noise_var + rho) * y``."""
    if rho < 0 or noise_var < 0:
        raise ValueError("power and noise variance must be non-negative")
    return math.sqrt(rho) / (noise_var + rho) * np.asarray(y_pilot)


# -- block runners ----------------------------------------------------------------


def draw_block_inputs(rng: np.random.Generator, K: int, n_bits: int, Q: int,
                      first_trial: int = 0) -> BlockInputs:
    bits = rng.integers(0, 2, size=(2, K, n_bits), dtype=np.uint8)
    z = rng.standard_normal((2, K, Q, 2))
    noise = (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2.0)
    direction = (first_trial + np.arange(K)) % 2
    return BlockInputs(bits, noise, direction)


def _nc_decode(y, cfg: CubeSplitConfig, decoder: str):
    if decoder == "ml":
        return decode_ml(y, cfg, points=_points(cfg))
    return decode_greedy(y, cfg)


@lru_cache(maxsize=8)
def _points(cfg: CubeSplitConfig) -> np.ndarray:
    return enumerate_points(cfg)


def _count(sent, got):
    return np.count_nonzero(sent != got, axis=-1)


def run_block_fdnc(eff: EffectiveChannels, cfg: CubeSplitConfig, rho: float,
                   noise_var: float, inputs: BlockInputs, decoder: str = "greedy") -> BlockResult:
    """Both users transmit cube-split blocks at once; each decodes the other."""
    nb = cfg.bits_per_block
    b1, b2 = inputs.bits[0, :, :nb], inputs.bits[1, :, :nb]
    x1, x2 = modulate(b1, cfg), modulate(b2, cfg)
    sr, sn = math.sqrt(rho), math.sqrt(noise_var)
    y2 = sr * eff.h12[:, None] * x1 + sr * eff.si2[:, None] * x2 + sn * inputs.noise[1]
    y1 = sr * eff.h21[:, None] * x2 + sr * eff.si1[:, None] * x1 + sn * inputs.noise[0]
    K = eff.size
    errors = np.stack([_count(b1, _nc_decode(y2, cfg, decoder)),
                       _count(b2, _nc_decode(y1, cfg, decoder))])
    return BlockResult(np.full((2, K), nb), errors)


def run_block_hdnc(eff: EffectiveChannels, cfgs: tuple[CubeSplitConfig, CubeSplitConfig],
                   rho: float, noise_var: float, inputs: BlockInputs,
                   decoder: str = "greedy") -> BlockResult:
    """One-way cube-split transmission; ``cfgs[u]`` is user ``u``'s constellation."""
    K = eff.size
    sr, sn = math.sqrt(rho), math.sqrt(noise_var)
    bits = np.zeros((2, K), dtype=np.int64)
    errors = np.zeros((2, K), dtype=np.int64)
    for u, (h, rx) in enumerate(((eff.h12, 1), (eff.h21, 0))):
        sel = inputs.direction == u
        if not sel.any():
            continue
        cfg = cfgs[u]
        nb = cfg.bits_per_block
        b = inputs.bits[u, sel, :nb]
        y = sr * h[sel, None] * modulate(b, cfg) + sn * inputs.noise[rx, sel]
        bits[u, sel] = nb
        errors[u, sel] = _count(b, _nc_decode(y, cfg, decoder))
    return BlockResult(bits, errors)


def _qam_payload(bits_u: np.ndarray, n_sym: int, order: int):
    k = int(round(math.log2(order)))
    b = bits_u[:, : n_sym * k].reshape(bits_u.shape[0], n_sym, k)
    return b, qam_modulate(b, order)


def run_block_hd_coherent(eff: EffectiveChannels, Q: int, order: int, rho: float,
                          noise_var: float, inputs: BlockInputs) -> BlockResult:
    """Unit pilot in interval 0, QAM in intervals ``1..Q-1``, one direction per block."""
    if Q < 2:
        raise ValueError("half-duplex coherent transmission needs Q >= 2")
    K = eff.size
    sr, sn = math.sqrt(rho), math.sqrt(noise_var)
    bits = np.zeros((2, K), dtype=np.int64)
    errors = np.zeros((2, K), dtype=np.int64)
    for u, (h, rx) in enumerate(((eff.h12, 1), (eff.h21, 0))):
        sel = inputs.direction == u
        if not sel.any():
            continue
        z = inputs.noise[rx, sel]
        hs = h[sel]
        h_hat = mmse_estimate(sr * hs + sn * z[:, 0], rho, noise_var)
        b, s = _qam_payload(inputs.bits[u, sel], Q - 1, order)
        y = sr * hs[:, None] * s + sn * z[:, 1:]
        got = qam_demodulate(y, h_hat[:, None], rho, order)
        bits[u, sel] = b[0].size
        errors[u, sel] = _count(b.reshape(len(hs), -1), got.reshape(len(hs), -1))
    return BlockResult(bits, errors)


def run_block_fd_coherent(eff: EffectiveChannels, Q: int, order: int, rho: float,
                          noise_var: float, inputs: BlockInputs) -> BlockResult:
    """Time-orthogonal pilots in intervals 0 and 1, simultaneous QAM afterwards."""
    if Q < 3:
        raise ValueError("full-duplex coherent transmission needs Q >= 3")
    K = eff.size
    sr, sn = math.sqrt(rho), math.sqrt(noise_var)
    b1, s1 = _qam_payload(inputs.bits[0], Q - 2, order)
    b2, s2 = _qam_payload(inputs.bits[1], Q - 2, order)
    z1, z2 = inputs.noise[0], inputs.noise[1]
    # the receiving user's own transmitter is silent during the peer's pilot
    h12_hat = mmse_estimate(sr * eff.h12 + sn * z2[:, 0], rho, noise_var)
    h21_hat = mmse_estimate(sr * eff.h21 + sn * z1[:, 1], rho, noise_var)
    y2 = sr * eff.h12[:, None] * s1 + sr * eff.si2[:, None] * s2 + sn * z2[:, 2:]
    y1 = sr * eff.h21[:, None] * s2 + sr * eff.si1[:, None] * s1 + sn * z1[:, 2:]
    got1 = qam_demodulate(y2, h12_hat[:, None], rho, order)
    got2 = qam_demodulate(y1, h21_hat[:, None], rho, order)
    errors = np.stack([_count(b1.reshape(K, -1), got1.reshape(K, -1)),
                       _count(b2.reshape(K, -1), got2.reshape(K, -1))])
    return BlockResult(np.full((2, K), b1[0].size), errors)
