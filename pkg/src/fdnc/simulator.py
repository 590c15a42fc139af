"""Monte Carlo BER sweeps over transmit power, array size and antenna isolation.

Trials are processed in fixed-size batches.  Batch ``c`` draws everything
from ``RandomStream(seed, c)``: channels from the root generator and each
scheme's bits/noise from a child keyed by the scheme.  Results therefore
depend only on the seed and the trial count, never on the worker count or
execution order, and every grid point sees the same channel draws (common
random numbers), which keeps comparisons between schemes and powers paired.
"""

from __future__ import annotations

import configparser
import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import stats

from . import beamforming as bf
from .channel import LinkAngles, PathParams, UlaGeometry, draw_paths, near_field_si, reference_path_loss_db
from .constellation import CubeSplitConfig
from .mathcore import RandomStream, db_to_linear, dbm_to_watt
from .transceiver import (
    SCHEMES,
    BlockResult,
    EffectiveChannels,
    draw_block_inputs,
    run_block_fd_coherent,
    run_block_fdnc,
    run_block_hd_coherent,
    run_block_hdnc,
)

__all__ = [
    "BATCH",
    "SweepConfig",
    "RatePlan",
    "LinkSetup",
    "draw_batch_paths",
    "BerRecord",
    "load_config",
    "parse_config",
    "run_sweep",
    "emit_csv",
    "read_csv",
    "power_at_ber",
]

log = logging.getLogger(__name__)

# trials per random stream; part of the reproducibility contract, do not tune
BATCH = 1024
WORKERS_ENV = "FDNC_WORKERS"
_SCHEME_KEYS = {name: i + 1 for i, name in enumerate(SCHEMES)}


@dataclass(frozen=True)
class RatePlan:
    """Constellation choices giving each scheme ``B`` bits per user per block."""

    fdnc: CubeSplitConfig | None
    hdnc: tuple[CubeSplitConfig, CubeSplitConfig] | None
    hd_qam: int | None
    fd_qam: int | None

    @classmethod
    def matched(cls, Q: int, B: int) -> "RatePlan":
        """Rate-matched plan; entries are ``None`` where no integer choice exists.

        Half-duplex users transmit every other block, so they need twice
        the per-block payload; when that is odd the two users split it as
        ``b`` and ``b + 1`` bits per dimension.
        """
        log2q = Q.bit_length() - 1
        dims = 2 * (Q - 1)
        fdnc = hdnc = hd_qam = fd_qam = None
        if (B - log2q) % dims == 0 and B > log2q:
            fdnc = CubeSplitConfig.uniform(Q, (B - log2q) // dims)
        total = 4 * B - 2 * log2q
        if total % dims == 0 and total // dims >= 2:
            s = total // dims
            hdnc = (CubeSplitConfig.uniform(Q, s // 2), CubeSplitConfig.uniform(Q, s - s // 2))
        if (2 * B) % (Q - 1) == 0:
            hd_qam = 2 ** (2 * B // (Q - 1))
        if Q >= 3 and B % (Q - 2) == 0:
            fd_qam = 2 ** (B // (Q - 2))
        return cls(fdnc, hdnc, hd_qam, fd_qam)



@dataclass(frozen=True)
class SweepConfig:
    """All knobs of a sweep; defaults follow the published simulation setup.

    Angles are in degrees, distances in metres, powers in dBm.
    """

    schemes: tuple[str, ...] = ("fdnc", "hdnc", "hd-coherent")
    rho_dbm: tuple[float, ...] = (-10.0, 0.0, 10.0, 20.0, 30.0, 40.0)
    array_sizes: tuple[int, ...] = (64,)
    isolation_db: tuple[float, ...] = (74.0,)
    Q: int = 2
    B: int = 3
    trials: int = 100_000
    seed: int = 1
    # optional overrides of the rate-matched plan
    fdnc_bits_per_dim: int | None = None
    hdnc_bits_per_dim: tuple[int, int] | None = None
    hd_qam_order: int | None = None
    fd_qam_order: int | None = None
    decoder: str = "greedy"
    infeasible: str = "skip"
    workers: int = 1
    # channel and geometry
    fc_ghz: float = 28.0
    eta: float = 2.1
    n_paths: int = 20
    n_paths_si: int = 20
    noise_psd_dbm_hz: float = -174.0
    bandwidth_hz: float = 100e6
    d: float = 0.5
    D1: float = 2.0
    D2: float = 0.0
    theta_deg: float = 0.0
    aod_deg: float = 105.0
    aoa_deg: float = 65.0
    spread_deg: float = 5.0
    si_aod_deg: float = 20.0
    si_aoa_deg: float = 160.0
    si_spread_deg: float = 5.0
    distance_m: tuple[float, float] = (45.0, 55.0)
    si_distance_m: tuple[float, float] = (5.0, 15.0)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for name in ("schemes", "rho_dbm", "array_sizes", "isolation_db"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ValueError(f"unknown schemes {sorted(unknown)}; choose from {SCHEMES}")
        if self.decoder not in ("greedy", "ml"):
            raise ValueError("decoder must be 'greedy' or 'ml'")
        if self.infeasible not in ("skip", "nearest"):
            raise ValueError("infeasible must be 'skip' or 'nearest'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        plan = self.plan
        for s in self.schemes:
            if getattr(plan, _PLAN_FIELD[s]) is None:
                raise ValueError(f"no {s} configuration carries B={self.B} bits with Q={self.Q}")

    @cached_property
    def plan(self) -> RatePlan:
        plan = RatePlan.matched(self.Q, self.B)
        if self.fdnc_bits_per_dim is not None:
            plan = replace(plan, fdnc=CubeSplitConfig.uniform(self.Q, self.fdnc_bits_per_dim))
        if self.hdnc_bits_per_dim is not None:
            a, b = self.hdnc_bits_per_dim
            plan = replace(plan, hdnc=(CubeSplitConfig.uniform(self.Q, a), CubeSplitConfig.uniform(self.Q, b)))
        if self.hd_qam_order is not None:
            plan = replace(plan, hd_qam=self.hd_qam_order)
        if self.fd_qam_order is not None:
            plan = replace(plan, fd_qam=self.fd_qam_order)
        return plan

    def rate(self, scheme: str) -> float:
        """Average bits per user per coherence block for ``scheme``."""
        p = self.plan
        if scheme == "fdnc":
            return float(p.fdnc.bits_per_block)
        if scheme == "hdnc":
            return (p.hdnc[0].bits_per_block + p.hdnc[1].bits_per_block) / 4.0
        if scheme == "hd-coherent":
            return (self.Q - 1) * math.log2(p.hd_qam) / 2.0
        return (self.Q - 2) * math.log2(p.fd_qam)

    @property
    def alpha(self) -> float:
        return float(db_to_linear(reference_path_loss_db(self.fc_ghz)))

    @property
    def noise_var(self) -> float:
        return float(dbm_to_watt(self.noise_psd_dbm_hz + 10.0 * math.log10(self.bandwidth_hz)))

    @property
    def intended_link(self) -> LinkAngles:
        r = math.radians
        return LinkAngles(r(self.aod_deg), r(self.aoa_deg), r(self.spread_deg), r(self.spread_deg),
                          self.n_paths, tuple(self.distance_m))

    @property
    def si_link(self) -> LinkAngles:
        r = math.radians
        return LinkAngles(r(self.si_aod_deg), r(self.si_aoa_deg), r(self.si_spread_deg),
                          r(self.si_spread_deg), self.n_paths_si, tuple(self.si_distance_m))

    def geometry(self, size: int) -> UlaGeometry:
        return UlaGeometry(size, size, self.d, self.D1, self.D2, math.radians(self.theta_deg))


_PLAN_FIELD = {"fdnc": "fdnc", "hdnc": "hdnc", "hd-coherent": "hd_qam", "fd-coherent": "fd_qam"}


# -- config files ---------------------------------------------------------------


def _coerce(name: str, raw: str):
    f = _CONFIG_FIELDS[name]
    typ = str(f.type)
    items = [v.strip() for v in raw.split(",") if v.strip()]
    if "tuple" in typ:
        conv = str if "str" in typ else int if "int" in typ else float
        return tuple(conv(v) for v in items)
    if raw.strip().lower() in ("", "none"):
        return None
    if "int" in typ:
        return int(raw)
    if "float" in typ:
        return float(raw)
    return raw.strip()


_CONFIG_FIELDS = {f.name: f for f in fields(SweepConfig)}


def parse_config(text: str) -> SweepConfig:
    """Parse a flat ``key = value`` document; lists are comma separated.

    Unknown keys are rejected.  ``#`` and ``;`` start comments.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[sweep]\n" + text)
    except configparser.Error as exc:
        raise ValueError(f"malformed config: {exc}") from exc
    kwargs = {}
    for key, raw in parser["sweep"].items():
        if key not in _CONFIG_FIELDS:
            raise ValueError(f"unknown config key {key!r}")
        try:
            kwargs[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ValueError(f"bad value for {key!r}: {raw!r}") from exc
    return SweepConfig(**kwargs)


def load_config(path) -> SweepConfig:
    return parse_config(Path(path).read_text())


# -- per-trial pipeline -----------------------------------------------------------


@dataclass
class LinkSetup:
    """Everything about one array size that is fixed across trials.

    Beam candidates depend only on the angular supports, so one setup
    serves every isolation level; only the near-field SI table differs.
    """

    cfg: SweepConfig
    size: int
    tx_grid: np.ndarray = field(init=False)
    rx_grid: np.ndarray = field(init=False)
    los: dict = field(init=False)

    def __post_init__(self):
        cfg, n = self.cfg, self.size
        r = math.radians
        policy = "nearest" if cfg.infeasible == "nearest" else "error"
        aod = bf.support_from_angles(r(cfg.aod_deg), r(cfg.spread_deg))
        aoa = bf.support_from_angles(r(cfg.aoa_deg), r(cfg.spread_deg))
        si_aod = bf.support_from_angles(r(cfg.si_aod_deg), r(cfg.si_spread_deg))
        si_aoa = bf.support_from_angles(r(cfg.si_aoa_deg), r(cfg.si_spread_deg))
        grid = bf.quantized_angles(n)
        self.tx_grid = grid[bf.feasible_indices(n, aod, si_aod, policy)]
        self.rx_grid = grid[bf.feasible_indices(n, aoa, si_aoa, policy)]
        geom = cfg.geometry(n)
        e_r = bf.dictionary_rx(self.rx_grid, n, cfg.d)
        e_t = bf.dictionary_tx(self.tx_grid, n, cfg.d)
        # LoS SI for every (receive, transmit) candidate beam pair
        self.los = {iso: e_r @ near_field_si(geom, iso) @ e_t.T for iso in cfg.isolation_db}

    def _gain(self, paths: PathParams, lam, gam) -> np.ndarray:
        n, d = self.size, self.cfg.d
        t = bf.tx_response(paths.aod, lam[:, None], n, d)
        r = bf.rx_response(paths.aoa, gam[:, None], n, d)
        return np.sum(paths.amplitudes() * r * t, axis=-1)

    def beams(self, paths: list[PathParams]):
        """Selected transmit/receive candidate indices ``(tx1, rx1, tx2, rx2)``."""
        n, d = self.size, self.cfg.d
        p12, p21 = paths[0], paths[1]
        tx1 = bf.select_batch(p12.aod, self.tx_grid, n, d, "tx")
        rx2 = bf.select_batch(p12.aoa, self.rx_grid, n, d, "rx")
        tx2 = bf.select_batch(p21.aod, self.tx_grid, n, d, "tx")
        rx1 = bf.select_batch(p21.aoa, self.rx_grid, n, d, "rx")
        return tx1, rx1, tx2, rx2

    def effective(self, paths: list[PathParams]) -> dict[float, EffectiveChannels]:
        """Effective channels per isolation level; ``paths`` is ``[H12, H21, SI1, SI2]``."""
        tx1, rx1, tx2, rx2 = self.beams(paths)
        lam1, lam2 = self.tx_grid[tx1], self.tx_grid[tx2]
        gam1, gam2 = self.rx_grid[rx1], self.rx_grid[rx2]
        h12 = self._gain(paths[0], lam1, gam2)
        h21 = self._gain(paths[1], lam2, gam1)
        far1 = self._gain(paths[2], lam1, gam1)
        far2 = self._gain(paths[3], lam2, gam2)
        return {iso: EffectiveChannels(h12, h21, los[rx1, tx1] + far1, los[rx2, tx2] + far2)
                for iso, los in self.los.items()}


def draw_batch_paths(cfg: SweepConfig, rng: np.random.Generator, K: int) -> list[PathParams]:
    """Paths for ``[H12, H21, SI1, SI2]`` in this fixed order."""
    alpha = cfg.alpha
    main, si = cfg.intended_link, cfg.si_link
    return [draw_paths(rng, link, cfg.eta, alpha, size=(K,)) for link in (main, main, si, si)]


def _run_scheme(cfg: SweepConfig, scheme: str, eff: EffectiveChannels, rho: float,
                inputs) -> BlockResult:
    plan, nv = cfg.plan, cfg.noise_var
    if scheme == "fdnc":
        return run_block_fdnc(eff, plan.fdnc, rho, nv, inputs, cfg.decoder)
    if scheme == "hdnc":
        return run_block_hdnc(eff, plan.hdnc, rho, nv, inputs, cfg.decoder)
    if scheme == "hd-coherent":
        return run_block_hd_coherent(eff, cfg.Q, plan.hd_qam, rho, nv, inputs)
    return run_block_fd_coherent(eff, cfg.Q, plan.fd_qam, rho, nv, inputs)


def _payload_bits(cfg: SweepConfig, scheme: str) -> int:
    p = cfg.plan
    if scheme == "fdnc":
        return p.fdnc.bits_per_block
    if scheme == "hdnc":
        return max(c.bits_per_block for c in p.hdnc)
    if scheme == "hd-coherent":
        return (cfg.Q - 1) * int(math.log2(p.hd_qam))
    return (cfg.Q - 2) * int(math.log2(p.fd_qam))


def _setups(cfg: SweepConfig):
    """``LinkSetup`` per array size; ``None`` marks an infeasible size."""
    out = {}
    for n in cfg.array_sizes:
        try:
            out[n] = LinkSetup(cfg, n)
        except bf.FeasibleSetEmpty as exc:
            log.warning("array size %d: %s", n, exc)
            out[n] = None
    return out


def _run_batches(cfg: SweepConfig, batches: range) -> np.ndarray:
    """Summed ``(bits, errors)`` per grid point over the given batch indices.

    Result shape: ``(2, sizes, isolations, schemes, powers)``.
    """
    setups = _setups(cfg)
    rhos = [float(dbm_to_watt(p)) for p in cfg.rho_dbm]
    acc = np.zeros((2, len(cfg.array_sizes), len(cfg.isolation_db), len(cfg.schemes), len(rhos)),
                   dtype=np.int64)
    for c in batches:
        K = min(BATCH, cfg.trials - c * BATCH)
        stream = RandomStream(cfg.seed, c)
        rng = stream.generator()
        paths = draw_batch_paths(cfg, rng, BATCH)
        inputs = {}
        for s in cfg.schemes:
            child = np.random.Generator(np.random.Philox(
                np.random.SeedSequence(cfg.seed, spawn_key=(c, _SCHEME_KEYS[s]))))
            inputs[s] = draw_block_inputs(child, BATCH, _payload_bits(cfg, s), cfg.Q, c * BATCH)
        if K < BATCH:
            paths = [_truncate(p, K) for p in paths]
            inputs = {s: _truncate_inputs(v, K) for s, v in inputs.items()}
        for i, n in enumerate(cfg.array_sizes):
            if setups[n] is None:
                continue
            effs = setups[n].effective(paths)
            for j, iso in enumerate(cfg.isolation_db):
                eff = effs[iso]
                for k, s in enumerate(cfg.schemes):
                    for r, rho in enumerate(rhos):
                        res = _run_scheme(cfg, s, eff, rho, inputs[s])
                        acc[0, i, j, k, r] += res.bits.sum()
                        acc[1, i, j, k, r] += res.errors.sum()
    return acc


def _truncate(p: PathParams, K: int) -> PathParams:
    return PathParams(p.gains[:K], p.distances[:K], p.aod[:K], p.aoa[:K], p.eta, p.alpha)


def _truncate_inputs(v, K: int):
    return type(v)(v.bits[:, :K], v.noise[:, :K], v.direction[:K])


@dataclass(frozen=True)
class BerRecord:
    """One grid point of a sweep.  BER statistics derive from the integer counts."""

    scheme: str
    rho_dbm: float
    M: int
    N: int
    isolation_db: float
    Q: int
    B: float
    trials: int
    bits: int
    bit_errors: int
    infeasible_trials: int = 0

    # errors below this count make the point estimate unreliable
    CENSOR_ERRORS = 10

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else math.nan

    @property
    def ci95(self) -> float:
        """Normal-approximation 95% half-width."""
        if not self.bits:
            return math.nan
        p = self.ber
        return 1.96 * math.sqrt(p * (1.0 - p) / self.bits)

    @property
    def ci_low(self) -> float:
        return max(0.0, self.ber - self.ci95)

    @property
    def ci_high(self) -> float:
        return min(1.0, self.ber + self.ci95)

    @property
    def censored(self) -> bool:
        return self.bits > 0 and self.bit_errors < self.CENSOR_ERRORS

    @property
    def ber_upper(self) -> float:
        """95% upper bound; exact Poisson bound when the point is censored."""
        if not self.bits:
            return math.nan
        if self.censored:
            return min(1.0, stats.chi2.ppf(0.95, 2 * (self.bit_errors + 1)) / (2.0 * self.bits))
        return self.ci_high


CSV_COLUMNS = ("scheme", "rho_dbm", "M", "N", "isolation_db", "Q", "B", "trials", "bits",
               "bit_errors", "ber", "ci95", "ber_upper", "censored", "infeasible_trials")


def run_sweep(cfg: SweepConfig, workers: int | None = None) -> list[BerRecord]:
    """Run every grid point of ``cfg`` and return one record per point.

    ``workers`` (or ``$FDNC_WORKERS``, or ``cfg.workers``) processes share
    the batches; the result is identical for any worker count.
    """
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, cfg.workers))
    n_batches = math.ceil(cfg.trials / BATCH)
    if workers <= 1 or n_batches == 1:
        acc = _run_batches(cfg, range(n_batches))
    else:
        # strided split keeps every worker busy on ragged tails
        parts = [range(w, n_batches, workers) for w in range(min(workers, n_batches))]
        with ProcessPoolExecutor(max_workers=len(parts)) as pool:
            acc = sum(pool.map(_run_batches, [cfg] * len(parts), parts))
    setups = _setups(cfg)
    records = []
    for k, s in enumerate(cfg.schemes):
        for i, n in enumerate(cfg.array_sizes):
            for j, iso in enumerate(cfg.isolation_db):
                infeasible = cfg.trials if setups[n] is None else 0
                for r, rho in enumerate(cfg.rho_dbm):
                    records.append(BerRecord(
                        scheme=s, rho_dbm=float(rho), M=n, N=n, isolation_db=float(iso), Q=cfg.Q,
                        B=cfg.rate(s), trials=cfg.trials, bits=int(acc[0, i, j, k, r]),
                        bit_errors=int(acc[1, i, j, k, r]), infeasible_trials=infeasible))
    return records


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_sci(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.5e}"


def emit_csv(records: list[BerRecord], path) -> None:
    """Write records with a fixed header; BER columns use 6 significant digits."""
    if not records:
        raise ValueError("no records to write")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([r.scheme, _fmt_float(r.rho_dbm), r.M, r.N, _fmt_float(r.isolation_db), r.Q,
                        f"{r.B:g}", r.trials, r.bits, r.bit_errors, _fmt_sci(r.ber), _fmt_sci(r.ci95),
                        _fmt_sci(r.ber_upper), int(r.censored), r.infeasible_trials])


def read_csv(path) -> list[BerRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [BerRecord(
            scheme=row["scheme"], rho_dbm=float(row["rho_dbm"]), M=int(row["M"]), N=int(row["N"]),
            isolation_db=float(row["isolation_db"]), Q=int(row["Q"]), B=float(row["B"]),
            trials=int(row["trials"]), bits=int(row["bits"]), bit_errors=int(row["bit_errors"]),
            infeasible_trials=int(row["infeasible_trials"])) for row in reader]


def power_at_ber(rho_dbm, ber, target: float) -> float:
    """Transmit power where a BER curve first drops to ``target``.

    Interpolates linearly in ``log10(BER)`` between the two grid points that
    bracket the first downward crossing.  Returns ``nan`` if the curve never
    reaches ``target`` and raises if it starts below it.
    """
    rho = np.asarray(rho_dbm, dtype=float)
    ber = np.asarray(ber, dtype=float)
    if rho.shape != ber.shape or rho.size < 2 or np.any(np.diff(rho) <= 0):
        raise ValueError("need matching, strictly increasing power and BER arrays")
    if not 0 < target < 1:
        raise ValueError("target BER must lie in (0, 1)")
    if ber[0] <= target:
        raise ValueError(f"curve starts at BER {ber[0]:.3g}, already below {target:g}")
    below = np.flatnonzero(ber <= target)
    if not below.size:
        return math.nan
    k = below[0]
    y0, y1 = math.log10(ber[k - 1]), math.log10(max(ber[k], 1e-300))
    frac = (y0 - math.log10(target)) / (y0 - y1)
    return float(rho[k - 1] + frac * (rho[k] - rho[k - 1]))
