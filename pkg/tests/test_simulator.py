"""Tests for sweep configuration, the Monte Carlo harness and CSV output."""

import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fdnc.channel import PathParams
from fdnc.mathcore import RandomStream
from fdnc.simulator import (
    BATCH,
    CSV_COLUMNS,
    BerRecord,
    LinkSetup,
    SweepConfig,
    draw_batch_paths,
    emit_csv,
    load_config,
    parse_config,
    power_at_ber,
    read_csv,
    run_sweep,
)

ROOT = Path(__file__).resolve().parents[1]
GOLDEN_HEADER = ("scheme,rho_dbm,M,N,isolation_db,Q,B,trials,bits,bit_errors,ber,ci95,"
                 "ber_upper,censored,infeasible_trials")

# effectively noise-free and SI-free
QUIET = dict(noise_psd_dbm_hz=-400.0, isolation_db=(400.0,), si_distance_m=(1e12, 1e12))


def _small(**kw) -> SweepConfig:
    base = dict(schemes=("fdnc", "hdnc"), rho_dbm=(0.0, 20.0), array_sizes=(16,), trials=1500, seed=3)
    base.update(kw)
    return SweepConfig(**base)


class TestConfig:
    def test_defaults_follow_published_setup(self):
        c = SweepConfig()
        assert 10 * math.log10(c.alpha) == pytest.approx(61.34, abs=0.01)
        assert c.noise_var == pytest.approx(3.981e-13, rel=1e-3)
        assert (c.eta, c.n_paths, c.n_paths_si, c.D1, c.D2, c.theta_deg) == (2.1, 20, 20, 2.0, 0.0, 0.0)
        assert (c.aod_deg, c.aoa_deg, c.spread_deg) == (105.0, 65.0, 5.0)
        assert (c.si_aod_deg, c.si_aoa_deg, c.si_spread_deg) == (20.0, 160.0, 5.0)
        assert c.si_distance_m == (5.0, 15.0)
        assert c.trials == 100_000

    @pytest.mark.parametrize("kw", [
        dict(trials=0), dict(schemes=()), dict(rho_dbm=()), dict(array_sizes=()),
        dict(isolation_db=()), dict(schemes=("fdnc", "magic")), dict(decoder="sphere"),
        dict(infeasible="ignore"), dict(workers=0), dict(B=4),
        dict(schemes=("fd-coherent",)),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SweepConfig(**kw)

    def test_rates(self):
        c = SweepConfig(schemes=("fdnc", "hdnc", "hd-coherent"))
        assert [c.rate(s) for s in c.schemes] == [3.0, 3.0, 3.0]
        c = SweepConfig(schemes=("fdnc", "fd-coherent"), Q=4, B=14)
        assert [c.rate(s) for s in c.schemes] == [14.0, 14.0]

    def test_plan_overrides(self):
        c = SweepConfig(schemes=("hdnc",), hdnc_bits_per_dim=(1, 1), B=3)
        assert [cfg.B for cfg in c.plan.hdnc] == [(1, 1), (1, 1)]

    def test_parse(self):
        c = parse_config("""
            # comment line
            schemes = fdnc, hd-coherent
            rho_dbm = -5, 2.5   ; trailing comment
            array_sizes = 16,64
            trials = 2048
            distance_m = 10, 20
            hd_qam_order = none
        """.replace("\n            ", "\n"))
        assert c.schemes == ("fdnc", "hd-coherent")
        assert c.rho_dbm == (-5.0, 2.5)
        assert c.array_sizes == (16, 64)
        assert c.trials == 2048
        assert c.distance_m == (10.0, 20.0)
        assert c.hd_qam_order is None

    @pytest.mark.parametrize("text", ["bogus = 1", "trials = many", "trials 5", "Q = 2\nQ = 4"])
    def test_parse_errors(self, text):
        with pytest.raises(ValueError):
            parse_config(text)

    def test_example_config_loads(self):
        c = load_config(ROOT / "configs" / "example.cfg")
        assert c == SweepConfig(schemes=("fdnc", "hdnc", "hd-coherent"),
                                rho_dbm=(-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0),
                                array_sizes=(16, 64))


class TestHarness:
    def test_noise_free_gives_zero_errors(self):
        cfg = _small(schemes=("fdnc", "hdnc", "hd-coherent"), trials=3000, **QUIET)
        for r in run_sweep(cfg):
            assert r.bit_errors == 0 and r.bits > 0 and r.ber == 0.0

    def test_bit_conservation(self):
        cfg = _small(trials=BATCH + 77)
        recs = {(r.scheme, r.rho_dbm): r for r in run_sweep(cfg)}
        # two users, three bits each, every trial
        assert recs["fdnc", 0.0].bits == cfg.trials * 2 * 3
        # half-duplex blocks alternate between 5- and 7-bit users
        n0 = (cfg.trials + 1) // 2
        assert recs["hdnc", 0.0].bits == n0 * 5 + (cfg.trials - n0) * 7

    def test_records_cover_grid(self):
        cfg = _small(array_sizes=(16, 32), isolation_db=(50.0, 74.0))
        recs = run_sweep(cfg)
        assert len(recs) == 2 * 2 * 2 * 2
        assert {(r.M, r.N) for r in recs} == {(16, 16), (32, 32)}

    def test_same_seed_identical(self, tmp_path):
        cfg = _small()
        emit_csv(run_sweep(cfg), tmp_path / "a.csv")
        emit_csv(run_sweep(cfg), tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_worker_count_irrelevant(self):
        cfg = _small(trials=3 * BATCH + 5)
        assert run_sweep(cfg, workers=1) == run_sweep(cfg, workers=3)

    def test_worker_env_override(self, monkeypatch):
        cfg = _small(trials=2 * BATCH)
        monkeypatch.setenv("FDNC_WORKERS", "2")
        assert run_sweep(cfg) == run_sweep(cfg, workers=1)

    def test_seed_changes_results(self):
        a = run_sweep(_small(rho_dbm=(0.0,)))
        b = run_sweep(_small(rho_dbm=(0.0,), seed=4))
        assert [r.bit_errors for r in a] != [r.bit_errors for r in b]

    def test_half_duplex_independent_of_isolation(self):
        cfg = _small(schemes=("hdnc", "hd-coherent"), isolation_db=(40.0, 74.0))
        recs = run_sweep(cfg)
        by = {(r.scheme, r.rho_dbm, r.isolation_db): r.bit_errors for r in recs}
        for s in cfg.schemes:
            for rho in cfg.rho_dbm:
                assert by[s, rho, 40.0] == by[s, rho, 74.0]

    def test_infeasible_sizes_skipped(self):
        recs = run_sweep(_small(array_sizes=(4,), trials=100))
        assert all(r.bits == 0 and r.infeasible_trials == 100 and math.isnan(r.ber) for r in recs)

    def test_infeasible_sizes_nearest(self):
        recs = run_sweep(_small(array_sizes=(4,), trials=100, infeasible="nearest"))
        assert all(r.bits > 0 and r.infeasible_trials == 0 for r in recs)

    def test_ber_falls_with_power(self):
        cfg = _small(schemes=("hdnc",), rho_dbm=(-10.0, 0.0, 10.0), trials=4 * BATCH)
        recs = run_sweep(cfg)
        for lo, hi in zip(recs[:-1], recs[1:]):
            assert hi.ber_upper < lo.ci_low


class TestBeams:
    def test_selection_ignores_gains_and_distances(self):
        cfg = SweepConfig()
        setup = LinkSetup(cfg, 64)
        paths = draw_batch_paths(cfg, RandomStream(1).generator(), 256)
        other = draw_batch_paths(cfg, RandomStream(2).generator(), 256)
        mixed = [PathParams(o.gains, o.distances, p.aod, p.aoa, p.eta, p.alpha) for p, o in zip(paths, other)]
        for a, b in zip(setup.beams(paths), setup.beams(mixed)):
            np.testing.assert_array_equal(a, b)

    def test_effective_per_isolation(self):
        cfg = SweepConfig(isolation_db=(50.0, 70.0))
        setup = LinkSetup(cfg, 16)
        effs = setup.effective(draw_batch_paths(cfg, RandomStream(1).generator(), 64))
        assert set(effs) == {50.0, 70.0}
        np.testing.assert_array_equal(effs[50.0].h12, effs[70.0].h12)
        assert not np.allclose(effs[50.0].si1, effs[70.0].si1)


class TestRecord:
    def _rec(self, bits, errors):
        return BerRecord("fdnc", 0.0, 64, 64, 74.0, 2, 3.0, 10, bits, errors)

    def test_statistics(self):
        r = self._rec(10_000, 100)
        assert r.ber == 0.01
        assert r.ci95 == pytest.approx(1.96 * math.sqrt(0.01 * 0.99 / 10_000))
        assert not r.censored and r.ber_upper == pytest.approx(r.ci_high)

    def test_censored_bound(self):
        r = self._rec(10_000, 0)
        assert r.censored
        # zero observed errors: the one-sided 95% Poisson bound is -ln(0.05)/n
        assert r.ber_upper == pytest.approx(-math.log(0.05) / 10_000, rel=1e-9)

    def test_clipped_interval(self):
        r = self._rec(4, 4)
        assert r.ci_high == 1.0 and r.ci_low <= 1.0
        r = self._rec(4, 0)
        assert r.ci_low == 0.0

    def test_ci_coverage(self):
        # Bernoulli(0.01) errors, 200 repetitions of 20 000 bits
        rng = np.random.default_rng(12)
        p, n = 0.01, 20_000
        hits = 0
        for _ in range(200):
            r = self._rec(n, int(rng.binomial(n, p)))
            hits += r.ci_low <= p <= r.ci_high
        assert 0.90 <= hits / 200 <= 0.99


class TestCsv:
    def _records(self):
        return [BerRecord("fdnc", -2.5, 16, 16, 74.0, 2, 3.0, 1000, 6000, 17),
                BerRecord("hd-coherent", 10.0, 64, 64, 50.0, 2, 3.0, 1000, 6000, 0, 3)]

    def test_golden_header(self, tmp_path):
        emit_csv(self._records()[:1], tmp_path / "x.csv")
        lines = (tmp_path / "x.csv").read_text().splitlines()
        assert lines[0] == GOLDEN_HEADER == ",".join(CSV_COLUMNS)
        assert len(lines) == 2

    def test_round_trip(self, tmp_path):
        recs = self._records()
        emit_csv(recs, tmp_path / "x.csv")
        assert read_csv(tmp_path / "x.csv") == recs

    def test_ber_format(self, tmp_path):
        emit_csv(self._records()[:1], tmp_path / "x.csv")
        row = (tmp_path / "x.csv").read_text().splitlines()[1].split(",")
        assert row[CSV_COLUMNS.index("ber")] == "2.83333e-03"

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_csv([], tmp_path / "x.csv")

    def test_bad_header_rejected(self, tmp_path):
        (tmp_path / "x.csv").write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_csv(tmp_path / "x.csv")

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(OSError):
            emit_csv(self._records(), tmp_path / "missing" / "x.csv")


class TestPowerAtBer:
    def test_log_interpolation(self):
        assert power_at_ber([0, 10, 20], [1e-1, 1e-2, 1e-4], 1e-3) == pytest.approx(15.0)

    def test_never_reached(self):
        assert math.isnan(power_at_ber([0, 10], [0.1, 0.05], 1e-3))

    def test_invalid(self):
        with pytest.raises(ValueError):
            power_at_ber([0, 10], [1e-4, 1e-5], 1e-3)
        with pytest.raises(ValueError):
            power_at_ber([10, 0], [0.1, 0.01], 1e-3)

    @given(st.floats(-3, -0.5), st.floats(0.1, 3.0))
    def test_exact_on_log_linear_curve(self, log_target, slope):
        rho = np.arange(0.0, 40.0, 2.0)
        ber = 10 ** (-slope * rho / 10)
        target = 10**log_target
        if ber[0] <= target or ber[-1] > target:
            return
        assert power_at_ber(rho, ber, target) == pytest.approx(-10 * log_target / slope, rel=1e-9)
