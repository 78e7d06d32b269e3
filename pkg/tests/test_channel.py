import math

import numpy as np
import pytest

from v2xsense import (BandConfig, build_connections, path_loss_sub6,
                      path_loss_thz, sub6ghz_band, thz_band)
from v2xsense.channel import (DEFAULT_THZ_ABSORPTION, connections_to_csv,
                              link_rx_power_dbm, load_band_file,
                              thz_absorption_db_per_m)
from v2xsense.mobility import VehiclePose
from v2xsense.rngutil import derived_rng

# hand-computed with 30-digit arithmetic from the stated closed forms
SUB6_SPOT_TABLE = [
    (0.1, 2e9, 115.602059991327962),
    (1.0, 1e9, 145.0),
    (1.0, 1.0, 127.0),
    (0.05, 5.9e9, 107.510804153364853),
    (0.001, 1e8, 53.0),
]


class TestSub6PathLoss:
    @pytest.mark.parametrize("d_km,f_hz,expected", SUB6_SPOT_TABLE)
    def test_spot_values(self, d_km, f_hz, expected):
        assert path_loss_sub6(d_km, f_hz) == pytest.approx(expected, abs=1e-9)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            path_loss_sub6(0.0, 1e9)
        with pytest.raises(ValueError):
            path_loss_sub6(-1.0, 1e9)
        with pytest.raises(ValueError):
            path_loss_sub6(0.1, 0.0)

    def test_clamp_below_one_meter(self):
        # sub-meter distances are clamped to the 1 m floor
        assert path_loss_sub6(1e-6, 1e9) == path_loss_sub6(0.001, 1e9)


class TestThzPathLoss:
    def test_frozen_spot_value(self):
        # 20*log10(4*pi*15*3e11/c) + 0.5*15, c = 299792458 m/s
        assert path_loss_thz(15.0, 0.3e12, 0.5) == pytest.approx(
            113.012033497390247, abs=1e-9)

    def test_spreading_absorption_decomposition(self):
        spread_only = path_loss_thz(15.0, 0.3e12, 0.0)
        assert path_loss_thz(15.0, 0.3e12, 0.5) - spread_only == pytest.approx(
            7.5, abs=1e-9)

    def test_doubling_distance_adds_6db_spreading(self):
        a = path_loss_thz(6.0, 0.2e12, 0.0)
        b = path_loss_thz(12.0, 0.2e12, 0.0)
        assert b - a == pytest.approx(20 * math.log10(2), abs=1e-9)

    def test_out_of_band_frequency_rejected(self):
        with pytest.raises(ValueError):
            path_loss_thz(5.0, 1e9, 0.5)
        with pytest.raises(ValueError):
            path_loss_thz(5.0, 0.6e12, 0.5)

    def test_absorption_table_lookup(self):
        assert thz_absorption_db_per_m(0.15e12) == 0.1
        assert thz_absorption_db_per_m(0.3e12) == 0.5
        assert thz_absorption_db_per_m(0.5e12) == 2.0
        with pytest.raises(ValueError):
            thz_absorption_db_per_m(0.9e12)

    def test_rx_power_monotone_in_distance(self):
        band = thz_band()
        powers = [link_rx_power_dbm(band, d, 0.3e12)
                  for d in np.linspace(1.0, 15.0, 40)]
        assert all(a >= b for a, b in zip(powers, powers[1:]))


def pose(vid, x, y=0.0):
    return VehiclePose(vid, x, y, 10.0, 0, +1)


class TestBuildConnections:
    def test_zero_vehicles(self):
        cs = build_connections([], (0.0, 0.0), sub6ghz_band(), derived_rng(0, 0))
        assert len(cs) == 0

    def test_v2i_probability_monte_carlo(self):
        # two vehicles 200 m apart, BS 40 m from one: only one V2I possible
        band = sub6ghz_band()
        poses = [pose("a", 0.0), pose("b", 200.0)]
        hits = 0
        n = 10_000
        for i in range(n):
            cs = build_connections(poses, (40.0, 0.0), band, derived_rng(77, i))
            kinds = [c.kind for c in cs.connections]
            assert kinds in ([], ["V2I"])
            if kinds:
                assert cs.connections[0].tx_id == "a"
                hits += 1
        assert hits / n == pytest.approx(0.9, abs=0.01)

    def test_range_boundary_inclusive(self):
        band = sub6ghz_band()
        poses = [pose("edge", 100.0)]
        seen = False
        for i in range(50):
            cs = build_connections(poses, (0.0, 0.0), band, derived_rng(3, i))
            if len(cs):
                seen = True
                assert cs.connections[0].distance_m == pytest.approx(100.0)
        assert seen  # exactly at comm_range is eligible

    def test_v2v_candidates_follow_binomial_counts(self):
        band = sub6ghz_band()
        # 5 vehicles clustered within range: C(5,2)=10 candidate pairs
        poses = [pose(f"v{i}", 10.0 * i) for i in range(5)]
        counts = []
        for i in range(2000):
            cs = build_connections(poses, (1e6, 0.0), band, derived_rng(9, i))
            counts.append(sum(1 for c in cs.connections if c.kind == "V2V"))
        mean = np.mean(counts)
        sigma = math.sqrt(10 * 0.25 / len(counts))
        assert abs(mean - 5.0) < 3 * sigma + 0.05

    def test_deterministic_given_seed(self):
        band = thz_band()
        poses = [pose(f"v{i}", 2.0 * i) for i in range(6)]
        a = build_connections(poses, (5.0, 0.0), band, derived_rng(4, 2))
        b = build_connections(poses, (5.0, 0.0), band, derived_rng(4, 2))
        assert a == b

    def test_links_respect_band_bounds(self):
        band = thz_band()
        poses = [pose(f"v{i}", 3.0 * i) for i in range(8)]
        for i in range(20):
            cs = build_connections(poses, (10.0, 0.0), band, derived_rng(6, i))
            for c in cs.connections:
                assert c.distance_m <= band.comm_range_m
                assert band.w1_hz <= c.center_freq_hz <= band.w2_hz


class TestBandConfig:
    def test_invalid_edges(self):
        with pytest.raises(ValueError):
            BandConfig(name="sub6GHz", w1_hz=2e9, w2_hz=1e9, comm_range_m=100,
                       tx_gain_dbi=0, rx_gain_dbi=0)

    def test_defaults_match_band_plan(self):
        sub6 = sub6ghz_band()
        assert (sub6.w1_hz, sub6.w2_hz) == (0.0, 2e9)
        assert sub6.comm_range_m == 100.0
        assert sub6.tx_gain_dbi == 0.0
        thz = thz_band()
        assert (thz.w1_hz, thz.w2_hz) == (0.1e12, 0.55e12)
        assert thz.comm_range_m == 15.0
        assert thz.tx_gain_dbi == 50.0

    def test_band_file_roundtrip(self, tmp_path):
        path = tmp_path / "band.cfg"
        path.write_text(
            "name = thz\n"
            "comm_range_m = 20  # stretch the radius\n"
            "tx_power_dbm = 10\n", encoding="utf-8")
        band = load_band_file(path)
        assert band.name == "THz"
        assert band.comm_range_m == 20.0
        assert band.tx_power_dbm == 10.0
        assert band.w1_hz == 0.1e12

    def test_band_file_rejects_unknown_key(self, tmp_path):
        path = tmp_path / "band.cfg"
        path.write_text("name = thz\nbogus = 1\n", encoding="utf-8")
        with pytest.raises(ValueError, match="bogus"):
            load_band_file(path)


def test_connections_csv_header():
    band = sub6ghz_band()
    poses = [pose("a", 480.0), pose("b", 520.0)]
    cs = build_connections(poses, (500.0, 0.0), band, derived_rng(1, 1))
    text = connections_to_csv([cs])
    lines = text.splitlines()
    assert lines[0] == "t,kind,tx,rx,distance_m,freq_hz,rx_power_dbm"
    assert len(lines) == 1 + len(cs)
