"""Geometric mmWave channels for a two-user full-duplex link.

The intended channel is a sum of ``L`` planar-wavefront paths between two
ULAs.  The self-interference (SI) channel adds a deterministic near-field
line-of-sight part between the co-located transmit and receive arrays,
scaled to the residual power left by antenna isolation, to a far-field
multipath part drawn like the intended channel.

Angles are in radians, distances in metres, antenna spacings in wavelengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, TextIO

import numpy as np

from .mathcore import db_to_linear

__all__ = [
    "UlaGeometry",
    "LinkAngles",
    "PathParams",
    "ChannelRealization",
    "reference_path_loss_db",
    "steer_tx",
    "steer_rx",
    "draw_paths",
    "channel_matrix",
    "draw_intended",
    "near_field_distances",
    "near_field_si",
    "far_field_si",
    "assemble_si",
    "dump_matrix",
    "load_matrix",
]


def reference_path_loss_db(fc_ghz: float) -> float:
    """Reference path loss ``32.4 + 20 log10(fc)`` in dB, ``fc`` in GHz."""
    return 32.4 + 20.0 * math.log10(fc_ghz)


@dataclass(frozen=True)
class UlaGeometry:
    """Transmit/receive ULA pair of one user.

    ``D1``/``D2`` are the vertical/horizontal separations between the two
    arrays and ``Theta`` the rotation of the receive array, all normalised
    by the wavelength.
    """

    M: int
    N: int
    d: float = 0.5
    D1: float = 2.0
    D2: float = 0.0
    Theta: float = 0.0

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise ValueError("array sizes must be >= 1")
        if self.d <= 0:
            raise ValueError("antenna spacing must be positive")
        if self.D1 == 0 and self.D2 == 0:
            raise ValueError("transmit and receive arrays cannot be co-located")


@dataclass(frozen=True)
class LinkAngles:
    """Angular and distance statistics of a multipath link.

    Per-path AoDs/AoAs are uniform on ``mean +/- spread`` and path distances
    uniform on ``distance``.
    """

    aod_mean: float
    aoa_mean: float
    aod_spread: float = math.radians(5.0)
    aoa_spread: float = math.radians(5.0)
    n_paths: int = 20
    distance: tuple[float, float] = (45.0, 55.0)

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("a link needs at least one path")
        lo, hi = self.distance
        if not 0 < lo <= hi:
            raise ValueError("path distances must satisfy 0 < lo <= hi")


@dataclass(frozen=True)
class PathParams:
    """Per-path parameters; arrays share the shape ``(..., L)``."""

    gains: np.ndarray
    distances: np.ndarray
    aod: np.ndarray
    aoa: np.ndarray
    eta: float
    alpha: float

    @property
    def n_paths(self) -> int:
        return self.gains.shape[-1]

    def amplitudes(self) -> np.ndarray:
        """Complex path amplitudes ``beta / sqrt(alpha * tau**eta)``."""
        return self.gains / np.sqrt(self.alpha * self.distances**self.eta)


@dataclass(frozen=True)
class ChannelRealization:
    H: np.ndarray
    kind: Literal["intended", "si"]
    params: PathParams | None = None
    near: np.ndarray | None = field(default=None, repr=False)
    far: np.ndarray | None = field(default=None, repr=False)


def steer_tx(theta, M: int, d: float = 0.5) -> np.ndarray:
    """Transmit phase response ``exp(-j 2 pi d m cos(theta))``, ``m = 0..M-1``."""
    m = np.arange(M)
    return np.exp(-2j * np.pi * d * np.multiply.outer(np.cos(theta), m))


def steer_rx(phi, N: int, d: float = 0.5) -> np.ndarray:
    """Receive phase response ``exp(+j 2 pi d n cos(phi))``, ``n = 0..N-1``."""
    n = np.arange(N)
    return np.exp(2j * np.pi * d * np.multiply.outer(np.cos(phi), n))


def draw_paths(rng: np.random.Generator, link: LinkAngles, eta: float, alpha: float,
               size: tuple[int, ...] = ()) -> PathParams:
    """Draw path gains, distances and angles for ``size`` independent links.

    The draw order is fixed (gains, distances, AoDs, AoAs) so that callers
    sharing a generator get reproducible realizations.
    """
    shape = tuple(size) + (link.n_paths,)
    z = rng.standard_normal(shape + (2,))
    gains = np.sqrt(0.5 / link.n_paths) * (z[..., 0] + 1j * z[..., 1])
    distances = rng.uniform(*link.distance, size=shape)
    aod = link.aod_mean + link.aod_spread * rng.uniform(-1.0, 1.0, size=shape)
    aoa = link.aoa_mean + link.aoa_spread * rng.uniform(-1.0, 1.0, size=shape)
    return PathParams(gains, distances, aod, aoa, eta, alpha)


def channel_matrix(params: PathParams, M: int, N: int, d: float = 0.5) -> np.ndarray:
    """``Phi_r @ diag(g) @ Phi_t`` for every batch entry, shape ``(..., N, M)``."""
    phi_t = steer_tx(params.aod, M, d)                      # (..., L, M)
    phi_r = np.swapaxes(steer_rx(params.aoa, N, d), -1, -2)  # (..., N, L)
    return (phi_r * params.amplitudes()[..., None, :]) @ phi_t


def draw_intended(stream, geometry: UlaGeometry, link: LinkAngles, eta: float,
                  alpha: float) -> ChannelRealization:
    rng = stream.generator() if hasattr(stream, "generator") else stream
    params = draw_paths(rng, link, eta, alpha)
    H = channel_matrix(params, geometry.M, geometry.N, geometry.d)
    return ChannelRealization(H, "intended", params)


def near_field_distances(geometry: UlaGeometry) -> np.ndarray:
    """Element distances ``Delta[n, m]`` between transmit ``m`` and receive ``n``.

    The horizontal term uses ``(n + 1)`` in the 1-based index, as in the
    published model; it vanishes for the default ``Theta = 0``.
    """
    g = geometry
    m = np.arange(1, g.M + 1)[None, :]
    n = np.arange(1, g.N + 1)[:, None]
    vert = g.D1 + (m - 1) * g.d + math.cos(g.Theta) * (n - 1) * g.d
    horiz = g.D2 + math.sin(g.Theta) * (n + 1) * g.d
    return np.sqrt(vert**2 + horiz**2)


def near_field_si(geometry: UlaGeometry, isolation_db: float) -> np.ndarray:
    """Spherical-wavefront LoS SI matrix with ``||H||_F^2 = 10^(-isolation_db/10)``."""
    delta = near_field_distances(geometry)
    shape = np.exp(-2j * np.pi * delta) / delta
    kappa = math.sqrt(db_to_linear(-isolation_db) / np.sum(np.abs(shape) ** 2))
    return kappa * shape


def far_field_si(stream, geometry: UlaGeometry, link: LinkAngles, eta: float,
                 alpha: float) -> np.ndarray:
    return draw_intended(stream, geometry, link, eta, alpha).H


def assemble_si(near: np.ndarray, far: np.ndarray) -> ChannelRealization:
    near = np.asarray(near)
    far = np.asarray(far)
    if near.shape != far.shape:
        raise ValueError(f"SI parts disagree in shape: {near.shape} vs {far.shape}")
    return ChannelRealization(near + far, "si", near=near, far=far)


def dump_matrix(H: np.ndarray, fh: TextIO) -> None:
    """Write ``rows cols`` then one ``re im`` pair per entry in row-major order."""
    H = np.atleast_2d(H)
    fh.write(f"{H.shape[0]} {H.shape[1]}\n")
    for z in H.ravel():
        fh.write(f"{float(z.real)!r} {float(z.imag)!r}\n")


def load_matrix(fh: TextIO) -> np.ndarray:
    rows, cols = (int(v) for v in fh.readline().split())
    vals = np.loadtxt(fh, ndmin=2)
    if vals.shape != (rows * cols, 2):
        raise ValueError(f"expected {rows * cols} 're im' pairs, got {vals.shape[0]}")
    return (vals[:, 0] + 1j * vals[:, 1]).reshape(rows, cols)
