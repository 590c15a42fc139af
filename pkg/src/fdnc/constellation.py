"""Cube-split Grassmannian constellation.

A block of ``B = log2(Q) + sum(B_v)`` bits is carried by one unit-rank
symbol vector ``x`` of length ``Q``.  The leading ``log2(Q)`` bits pick the
cell (the index of the strictly largest entry of ``x``), and the remaining
bits pick one Gray-labelled grid point per real dimension of that cell.

All functions broadcast over leading batch axes: bits have shape
``(..., B)``, symbols ``(..., Q)``, coordinates ``(..., 2(Q-1))``.
Cells are 0-based here (cell ``0`` is the one-based ``C_1`` of the usual notation).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .mathcore import inverse_normal_cdf, normal_cdf

__all__ = [
    "CubeSplitConfig",
    "CellCoordinates",
    "ConstellationTooLarge",
    "grid",
    "encode_bits",
    "map_coordinates",
    "demap",
    "modulate",
    "enumerate_points",
    "decode_ml",
    "decode_greedy",
    "int_to_bits",
    "bits_to_int",
    "gray_decode",
    "table",
    "parse_bits",
    "format_bits",
]

DEFAULT_ENUMERATION_CAP = 2**20
# keeps |t_k| < 1 so the inverse map never takes log(inf)
_T_CLAMP = 1.0 - 1e-12


class ConstellationTooLarge(ValueError):
    """Raised when exhaustive enumeration would exceed the configured cap."""


@dataclass(frozen=True)
class CubeSplitConfig:
    """Coherence block length ``Q`` and the per-dimension bit budgets ``B_v``."""

    Q: int
    B: tuple[int, ...]

    def __post_init__(self):
        Q = self.Q
        if Q < 2 or Q & (Q - 1):
            raise ValueError(f"Q must be a power of two >= 2, got {Q}")
        object.__setattr__(self, "B", tuple(int(b) for b in self.B))
        if len(self.B) != 2 * (Q - 1):
            raise ValueError(f"need {2 * (Q - 1)} per-dimension bit counts for Q={Q}, got {len(self.B)}")
        if min(self.B) < 1:
            raise ValueError("every per-dimension bit count must be >= 1")

    @classmethod
    def uniform(cls, Q: int, bits_per_dim: int) -> "CubeSplitConfig":
        return cls(Q, (bits_per_dim,) * (2 * (Q - 1)))

    @property
    def n_dims(self) -> int:
        return 2 * (self.Q - 1)

    @property
    def cell_bits(self) -> int:
        return self.Q.bit_length() - 1

    @property
    def bits_per_block(self) -> int:
        return self.cell_bits + sum(self.B)

    @property
    def size(self) -> int:
        return self.Q * 2 ** sum(self.B)


class CellCoordinates(NamedTuple):
    cell: np.ndarray
    a: np.ndarray


def _gray(k):
    return k ^ (k >> 1)


def gray_decode(g):
    g = np.asarray(g, dtype=np.int64)
    k = g.copy()
    shift = g >> 1
    while np.any(shift):
        k ^= shift
        shift >>= 1
    return k


def grid(bits: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform grid on one cell dimension and its Gray labels.

    Returns ``(points, labels)`` with ``points[k] = (2k+1) / 2**(bits+1)``
    and ``labels[k]`` the Gray code of ``k``, so neighbouring points differ
    in exactly one bit.
    """
    if bits < 1:
        raise ValueError("a grid dimension needs at least one bit")
    k = np.arange(2**bits)
    return (2 * k + 1) / 2.0 ** (bits + 1), _gray(k)


def int_to_bits(values, width: int) -> np.ndarray:
    """MSB-first bit expansion of non-negative integers."""
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def bits_to_int(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    width = bits.shape[-1]
    return (bits << np.arange(width - 1, -1, -1)).sum(axis=-1)


def _split_bits(cfg: CubeSplitConfig, bits: np.ndarray):
    """Yield the cell field followed by one field per dimension."""
    edges = np.cumsum((cfg.cell_bits,) + cfg.B)
    return np.split(bits, edges[:-1], axis=-1)


def encode_bits(bits, cfg: CubeSplitConfig) -> CellCoordinates:
    """Map a bit block to a cell index and grid coordinates."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape[-1] != cfg.bits_per_block:
        raise ValueError(f"expected {cfg.bits_per_block} bits per block, got {bits.shape[-1]}")
    fields = _split_bits(cfg, bits)
    cell = bits_to_int(fields[0])
    a = np.empty(bits.shape[:-1] + (cfg.n_dims,))
    for v, (bv, field) in enumerate(zip(cfg.B, fields[1:])):
        a[..., v] = (2 * gray_decode(bits_to_int(field)) + 1) / 2.0 ** (bv + 1)
    return CellCoordinates(cell, a)


def map_coordinates(coords: CellCoordinates, cfg: CubeSplitConfig) -> np.ndarray:
    """Build the symbol vector of norm ``sqrt(Q)`` for cell coordinates."""
    cell = np.asarray(coords.cell)
    a = np.asarray(coords.a, dtype=float)
    q = inverse_normal_cdf(a)
    w = (q[..., 0::2] + 1j * q[..., 1::2]) / np.sqrt(2.0)
    mag = np.abs(w)
    # sqrt((1 - e^{-r^2}) / (1 + e^{-r^2})) == sqrt(tanh(r^2 / 2))
    t = np.sqrt(np.tanh(mag**2 / 2.0)) * w / mag
    Q = cfg.Q
    x = np.empty(t.shape[:-1] + (Q,), dtype=complex)
    pos = np.arange(Q)
    # entries before the cell take t_1..t_{q-1}, the cell gets 1, the rest shift by one
    src = pos - (pos > cell[..., None])
    x[...] = np.take_along_axis(t, np.clip(src, 0, Q - 2), axis=-1)
    x[pos == cell[..., None]] = 1.0
    scale = np.sqrt(Q / (1.0 + np.sum(np.abs(t) ** 2, axis=-1)))
    return scale[..., None] * x


def modulate(bits, cfg: CubeSplitConfig) -> np.ndarray:
    return map_coordinates(encode_bits(bits, cfg), cfg)


def _inverse_map(y: np.ndarray, cfg: CubeSplitConfig):
    """Cell index and the continuous coordinate estimates of ``y``."""
    Q = cfg.Q
    mags = np.abs(y)
    cell = np.argmax(mags, axis=-1)
    if np.any(np.take_along_axis(mags, cell[..., None], axis=-1) == 0):
        raise ValueError("cannot demap the zero vector")
    lead = np.take_along_axis(y, cell[..., None], axis=-1)
    pos = np.arange(Q - 1)
    others = np.take_along_axis(y, pos + (pos >= cell[..., None]), axis=-1)
    t = others / lead
    tmag = np.minimum(np.abs(t), _T_CLAMP)
    # log((1+r^2)/(1-r^2)) == 2 artanh(r^2)
    wmag = np.sqrt(2.0 * np.arctanh(tmag**2))
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(tmag > 0, wmag * t / np.abs(t), 0.0)
    a_est = np.empty(y.shape[:-1] + (cfg.n_dims,))
    a_est[..., 0::2] = normal_cdf(np.sqrt(2.0) * w.real)
    a_est[..., 1::2] = normal_cdf(np.sqrt(2.0) * w.imag)
    return cell, a_est


def _nearest_index(a_est: np.ndarray, cfg: CubeSplitConfig) -> np.ndarray:
    levels = 2 ** np.asarray(cfg.B)
    # grid points are the midpoints of equal bins, so nearest == containing bin
    return np.clip(np.floor(a_est * levels).astype(np.int64), 0, levels - 1)


def demap(x, cfg: CubeSplitConfig) -> CellCoordinates:
    """Invert :func:`map_coordinates` up to scale and global phase."""
    x = np.asarray(x, dtype=complex)
    cell, a_est = _inverse_map(x, cfg)
    k = _nearest_index(a_est, cfg)
    return CellCoordinates(cell, (2 * k + 1) / 2.0 ** (np.asarray(cfg.B) + 1))


def _coords_to_bits(cell, k, cfg: CubeSplitConfig) -> np.ndarray:
    parts = [int_to_bits(cell, cfg.cell_bits)]
    for v, bv in enumerate(cfg.B):
        parts.append(int_to_bits(_gray(k[..., v]), bv))
    return np.concatenate(parts, axis=-1)


def enumerate_points(cfg: CubeSplitConfig, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """All constellation points, row ``i`` carrying the bit pattern of ``i``."""
    if cfg.size > cap:
        raise ConstellationTooLarge(f"constellation has {cfg.size} points, cap is {cap}")
    bits = int_to_bits(np.arange(cfg.size), cfg.bits_per_block)
    return modulate(bits, cfg)


def decode_ml(y, cfg: CubeSplitConfig, cap: int = DEFAULT_ENUMERATION_CAP,
              points: np.ndarray | None = None) -> np.ndarray:
    """Exhaustive non-coherent ML decision, ``argmax_x |<y, x>|^2``.

    ``points`` may carry a precomputed :func:`enumerate_points` table.
    """
    y = np.asarray(y, dtype=complex)
    if points is None:
        points = enumerate_points(cfg, cap)
    metric = np.abs(y.conj() @ points.T) ** 2
    return int_to_bits(np.argmax(metric, axis=-1), cfg.bits_per_block)


def decode_greedy(y, cfg: CubeSplitConfig) -> np.ndarray:
    """Low-complexity decision: apply the inverse map to ``y`` directly.

    For a single received row the dominant singular direction is ``y``
    itself, so no decomposition is needed.
    """
    y = np.asarray(y, dtype=complex)
    cell, a_est = _inverse_map(y, cfg)
    return _coords_to_bits(cell, _nearest_index(a_est, cfg), cfg)


def table(cfg: CubeSplitConfig | None = None) -> list[dict]:
    """Rows of the ``Q=2, B=(1,1)`` style listing: bits, cell, a, w, t, x."""
    cfg = cfg or CubeSplitConfig.uniform(2, 1)
    rows = []
    for i in range(cfg.size):
        bits = int_to_bits(i, cfg.bits_per_block)
        cell, a = encode_bits(bits, cfg)
        q = inverse_normal_cdf(a)
        w = (q[0::2] + 1j * q[1::2]) / np.sqrt(2.0)
        t = np.sqrt(np.tanh(np.abs(w) ** 2 / 2.0)) * w / np.abs(w)
        rows.append({
            "bits": "".join(map(str, bits)),
            "cell": int(cell),
            "a": a,
            "w": w,
            "t": t,
            "x": map_coordinates(CellCoordinates(cell, a), cfg),
        })
    return rows


def parse_bits(text: str) -> np.ndarray:
    return np.array([int(c) for c in text.strip()], dtype=np.uint8)


def format_bits(bits: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in bits)
