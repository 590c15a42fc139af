"""Tests for the quantized beam dictionary and angle-only beam selection."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdnc import beamforming as bf
from fdnc.channel import LinkAngles, UlaGeometry, channel_matrix, draw_paths, steer_rx, steer_tx

rad = math.radians
AOD = bf.support_from_angles(rad(105), rad(5))
AOA = bf.support_from_angles(rad(65), rad(5))
SI_AOD = bf.support_from_angles(rad(20), rad(5))
SI_AOA = bf.support_from_angles(rad(160), rad(5))


class TestGrid:
    def test_four_points(self):
        np.testing.assert_allclose(bf.quantized_angles(4), [-0.75, -0.25, 0.25, 0.75])

    @given(st.integers(1, 512))
    def test_symmetric_and_inside(self, n):
        g = bf.quantized_angles(n)
        assert np.all(np.abs(g) < 1)
        np.testing.assert_allclose(g, -g[::-1], atol=1e-15)

    def test_single_point_is_broadside(self):
        assert bf.quantized_angles(1)[0] == 0.0

    @given(st.floats(-1, 1), st.integers(1, 64))
    def test_dictionary_unit_norm(self, x, n):
        assert np.linalg.norm(bf.dictionary_tx(x, n)) == pytest.approx(1.0)
        assert np.linalg.norm(bf.dictionary_rx(x, n)) == pytest.approx(1.0)

    def test_matched_beam_collects_full_gain(self):
        theta = rad(100)
        gain = steer_tx(theta, 32) @ bf.dictionary_tx(math.cos(theta), 32)
        assert abs(gain) == pytest.approx(math.sqrt(32))
        gain = bf.dictionary_rx(math.cos(theta), 32) @ steer_rx(theta, 32)
        assert abs(gain) == pytest.approx(math.sqrt(32))

    def test_dictionary_rejects_bad_cosine(self):
        with pytest.raises(ValueError):
            bf.dictionary_tx(1.2, 4)


class TestSupports:
    def test_intended_aod(self):
        assert AOD.lo == pytest.approx(-0.3420, abs=1e-4)
        assert AOD.hi == pytest.approx(-0.1736, abs=1e-4)

    def test_si_aoa(self):
        assert SI_AOA.lo == pytest.approx(math.cos(rad(165)))
        assert SI_AOA.hi == pytest.approx(math.cos(rad(155)))

    @pytest.mark.parametrize("mean,spread", [(0.0, 0.1), (math.pi, 0.1), (0.05, 0.1), (1.0, 2.0)])
    def test_invalid(self, mean, spread):
        with pytest.raises(ValueError):
            bf.support_from_angles(mean, spread)

    def test_interval_helpers(self):
        s = bf.AngularSupport(-0.2, 0.1)
        assert s.contains(0.0) and not s.contains(0.2)
        assert s.distance(0.3) == pytest.approx(0.2)
        assert s.distance(-0.5) == pytest.approx(0.3)
        with pytest.raises(ValueError):
            bf.AngularSupport(0.5, 0.1)


class TestFeasibility:
    @pytest.mark.parametrize("n", [16, 32, 64])
    def test_feasible_sizes(self, n):
        g = bf.quantized_angles(n)
        for intended, si in ((AOD, SI_AOD), (AOA, SI_AOA)):
            idx = bf.feasible_indices(n, intended, si)
            assert idx.size > 0
            assert np.all(intended.contains(g[idx])) and not np.any(si.contains(g[idx]))

    @pytest.mark.parametrize("n,side", [(2, "tx"), (2, "rx"), (4, "rx"), (8, "tx")])
    def test_infeasible_sizes(self, n, side):
        intended, si = (AOD, SI_AOD) if side == "tx" else (AOA, SI_AOA)
        with pytest.raises(bf.FeasibleSetEmpty):
            bf.feasible_indices(n, intended, si)

    def test_single_element_has_its_only_beam(self):
        np.testing.assert_array_equal(bf.feasible_indices(1, AOD, SI_AOD), [0])

    @pytest.mark.parametrize("n", [2, 4, 8])
    def test_nearest_fallback(self, n):
        g = bf.quantized_angles(n)
        for intended, si in ((AOD, SI_AOD), (AOA, SI_AOA)):
            idx = bf.feasible_indices(n, intended, si, fallback="nearest")
            assert idx.size > 0 and not np.any(si.contains(g[idx]))
            d = intended.distance(g)
            d[si.contains(g)] = np.inf
            assert np.all(d[idx] == d.min())


class TestSelection:
    def test_single_path_picks_closest_grid_point(self):
        phi_t = steer_tx(np.array([rad(105)]), 16)
        assert bf.select_tx_angle(phi_t, AOD, SI_AOD, 16) == pytest.approx(-0.3125)

    def test_receive_single_path(self):
        phi_r = steer_rx(np.array([rad(65)]), 64).T  # N x L
        gam = bf.select_rx_angle(phi_r, AOA, SI_AOA, 64)
        g = bf.quantized_angles(64)
        cands = g[bf.feasible_indices(64, AOA, SI_AOA)]
        assert gam == cands[np.argmin(np.abs(cands - math.cos(rad(65))))]

    def test_infeasible_raises(self):
        with pytest.raises(bf.FeasibleSetEmpty):
            bf.select_tx_angle(steer_tx(np.array([rad(105)]), 8), AOD, SI_AOD, 8)

    @settings(max_examples=25)
    @given(st.integers(0, 2**31), st.sampled_from([16, 32, 64]))
    def test_batch_matches_matrix_selection(self, seed, n):
        link = LinkAngles(rad(105), rad(65))
        p = draw_paths(np.random.default_rng(seed), link, 2.1, 1.0)
        g = bf.quantized_angles(n)
        tx_c = g[bf.feasible_indices(n, AOD, SI_AOD)]
        rx_c = g[bf.feasible_indices(n, AOA, SI_AOA)]
        lam = bf.select_tx_angle(steer_tx(p.aod, n), AOD, SI_AOD, n)
        gam = bf.select_rx_angle(steer_rx(p.aoa, n).T, AOA, SI_AOA, n)
        assert tx_c[bf.select_batch(p.aod[None], tx_c, n, side="tx")[0]] == lam
        assert rx_c[bf.select_batch(p.aoa[None], rx_c, n, side="rx")[0]] == gam


class TestArrayFactor:
    @pytest.mark.parametrize("n", [1, 2, 7, 64])
    def test_matches_direct_sum(self, n):
        x = np.concatenate([np.linspace(-2, 2, 81), [0.0, 2.0, -2.0, 1e-12]])
        k = np.arange(n)
        direct = np.exp(-2j * np.pi * 0.5 * np.multiply.outer(x, k)).sum(axis=-1)
        np.testing.assert_allclose(bf.array_factor(x, n), direct, atol=1e-9 * n)
        np.testing.assert_allclose(bf.array_power(x, n), np.abs(direct) ** 2, atol=1e-8 * n * n)

    def test_responses_match_matrix_products(self):
        aod, lam = rad(103), -0.3125
        np.testing.assert_allclose(bf.tx_response(aod, lam, 16),
                                   steer_tx(aod, 16) @ bf.dictionary_tx(lam, 16), atol=1e-13)
        aoa, gam = rad(62), 0.46875
        np.testing.assert_allclose(bf.rx_response(aoa, gam, 32),
                                   bf.dictionary_rx(gam, 32) @ steer_rx(aoa, 32), atol=1e-13)


class TestEffectiveChannels:
    def test_scalar_products(self):
        geom = UlaGeometry(8, 8)
        rng = np.random.default_rng(4)
        H = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        Hsi = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        p1 = bf.build_pair(-0.25, 0.5, geom)
        p2 = bf.build_pair(-0.125, 0.375, geom)
        h, si = bf.effective_channels(p1, p2, H, Hsi)
        assert h == pytest.approx(p2.w @ H @ p1.f)
        assert si == pytest.approx(p2.w @ Hsi @ p2.f)

    def test_shape_mismatch(self):
        p = bf.build_pair(0.0, 0.0, UlaGeometry(4, 4))
        with pytest.raises(ValueError):
            bf.effective_channels(p, p, np.zeros((4, 3)), np.zeros((4, 4)))
        with pytest.raises(ValueError):
            bf.effective_channels(p, p, np.zeros((4, 4)), np.zeros((3, 4)))

    def test_path_sum_matches_matrix_product(self):
        link = LinkAngles(rad(105), rad(65))
        p = draw_paths(np.random.default_rng(9), link, 2.1, 1e6)
        n, lam, gam = 32, -0.28125, 0.40625
        H = channel_matrix(p, n, n)
        direct = bf.dictionary_rx(gam, n) @ H @ bf.dictionary_tx(lam, n)
        fast = np.sum(p.amplitudes() * bf.rx_response(p.aoa, gam, n) * bf.tx_response(p.aod, lam, n))
        assert fast == pytest.approx(direct, rel=1e-10)
