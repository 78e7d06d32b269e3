import math

import numpy as np
import pytest

from v2xsense import (cosine_similarity, detection_rates, energy_detect,
                      evaluate_run, mse, random_sensing_matrix, render_table,
                      ssim_1d, sub6ghz_band)
from v2xsense.channel import BS_ID, Connection, ConnectionSet
from v2xsense.cs_baseline import CsSolverConfig, omp_reconstruct
from v2xsense.errors import NormalizationError
from v2xsense.evaluation import DetectionReport
from v2xsense.rngutil import derived_rng
from v2xsense.sensing import compress
from v2xsense.specgen import SpectrumSample, make_sample


class TestEnergyDetect:
    def test_all_zero(self):
        assert np.all(energy_detect(np.zeros(16, dtype=complex)) == 0)

    def test_magnitude_point_eight_is_occupied(self):
        spec = np.zeros(8, dtype=complex)
        spec[3] = 0.8  # power 0.64 > 0.5
        bits = energy_detect(spec)
        assert bits[3] == 1 and bits.sum() == 1

    def test_power_exactly_half_is_idle(self):
        spec = np.zeros(8, dtype=complex)
        spec[2] = 0.5 + 0.5j  # power exactly 0.25 + 0.25 = 0.5: strict rule
        assert energy_detect(spec).sum() == 0


class TestDetectionRates:
    def test_perfect_estimate(self):
        mask = np.array([0, 1, 1, 0, 1], dtype=np.uint8)
        assert detection_rates(mask, mask) == (1.0, 0.0)

    def test_all_zero_estimate(self):
        truth = np.array([0, 1, 1, 0], dtype=np.uint8)
        p_d, p_f = detection_rates(np.zeros(4, dtype=np.uint8), truth)
        assert p_d == 0.0 and p_f == 0.0

    def test_absent_rates(self):
        ones = np.ones(4, dtype=np.uint8)
        zeros = np.zeros(4, dtype=np.uint8)
        assert detection_rates(ones, zeros)[0] is None  # no occupied bins
        assert detection_rates(ones, ones)[1] is None  # no idle bins

    def test_counting(self):
        truth = np.array([1, 1, 1, 1, 0, 0, 0, 0], dtype=np.uint8)
        est = np.array([1, 1, 0, 0, 1, 0, 0, 0], dtype=np.uint8)
        p_d, p_f = detection_rates(est, truth)
        assert p_d == pytest.approx(0.5)
        assert p_f == pytest.approx(0.25)


class TestMse:
    def test_identical_is_zero(self):
        x = np.arange(8, dtype=complex) + 1j
        assert mse(x, x) == 0.0

    def test_constant_offset_squares(self):
        x = np.zeros(10, dtype=complex)
        c = 0.37
        y = x + c + 1j * c  # +c in every real component
        assert mse(y, x) == pytest.approx(c * c, rel=1e-12)


class TestCosine:
    def test_identical_nonzero(self):
        x = np.array([1.0 + 1j, 2.0, 0.5j])
        assert cosine_similarity(x, x) == pytest.approx(1.0)

    def test_disjoint_support(self):
        a = np.array([1.0, 0.0, 2.0, 0.0], dtype=complex)
        b = np.array([0.0, 3.0, 0.0, 1.0], dtype=complex)
        assert cosine_similarity(a, b) == 0.0

    def test_phase_invariance(self):
        # magnitude spectra: a global phase rotation changes nothing
        rng = derived_rng(1, 60)
        x = rng.normal(size=12) + 1j * rng.normal(size=12)
        assert cosine_similarity(x * np.exp(0.7j), x) == pytest.approx(1.0)


class TestSsim:
    def test_identical_is_one(self):
        rng = derived_rng(2, 61)
        x = rng.normal(size=32) + 1j * rng.normal(size=32)
        assert ssim_1d(x, x) == pytest.approx(1.0)

    def test_constant_vs_constant_closed_form(self):
        # degenerate variance case evaluated from the closed SSIM formula:
        # mu_x=0.7, mu_y=0.5, all variances zero, C1=1e-4, C2=9e-4
        est = np.full(32, 0.7, dtype=complex)
        ref = np.full(32, 0.5, dtype=complex)
        assert ssim_1d(est, ref) == pytest.approx(0.945953249560870, abs=1e-12)

    def test_needs_window_length(self):
        with pytest.raises(ValueError):
            ssim_1d(np.ones(4, dtype=complex), np.ones(4, dtype=complex))


def synthetic_sample(seed, n_s=256, n_links=4, snr_db=math.inf):
    """Noise-free normalized sample with comparable link powers."""
    rng = derived_rng(seed, 62)
    conns = tuple(Connection("V2I", f"v{i}", BS_ID, 10.0, 1e9,
                             float(rng.uniform(-2.0, 2.0)))
                  for i in range(n_links))
    cs = ConnectionSet(time_s=0.0, band=sub6ghz_band(), connections=conns)
    sample = make_sample(cs, n_s, snr_db, rng)
    assert sample is not None
    return sample


class TestEvaluateRun:
    def test_oracle_scores_perfectly(self):
        samples = [synthetic_sample(s) for s in range(6)]
        report = evaluate_run(samples, lambda s: s.clean, method_name="oracle")
        assert report.mse == 0.0
        assert report.cosine == pytest.approx(1.0)
        assert report.ssim == pytest.approx(1.0)
        assert report.p_d == 1.0
        assert report.p_f == 0.0
        assert report.sample_count == 6

    def test_noisy_at_infinite_snr_equals_oracle(self):
        samples = [synthetic_sample(s, snr_db=math.inf) for s in range(4)]
        report = evaluate_run(samples, lambda s: s.noisy, method_name="noisy")
        assert report.mse == 0.0
        assert report.p_d == 1.0 and report.p_f == 0.0

    def test_averaging_order_two_sample_hand_computation(self):
        # per-sample metric first, then the mean across samples
        s1 = synthetic_sample(11)
        s2 = synthetic_sample(12)
        est1 = s1.clean * 0.9
        est2 = s2.clean
        lookup = {id(s1): est1, id(s2): est2}
        report = evaluate_run([s1, s2], lambda s: lookup[id(s)])
        assert report.mse == pytest.approx((mse(est1, s1.clean)
                                            + mse(est2, s2.clean)) / 2)
        assert report.cosine == pytest.approx(
            (cosine_similarity(est1, s1.clean)
             + cosine_similarity(est2, s2.clean)) / 2)

    def test_unnormalized_sample_rejected(self):
        s = synthetic_sample(13)
        bad = SpectrumSample(clean=s.clean * 3, noisy=s.noisy * 3, mask=s.mask,
                             scale=s.scale, snr_db=s.snr_db, band=s.band)
        with pytest.raises(NormalizationError):
            evaluate_run([bad], lambda x: x.clean)

    def test_omp_on_noiseless_split_at_half_rate(self):
        # Monte Carlo against the CS recovery oracle: noise-free synthetic
        # samples at compression rate 0.5 should be detected almost perfectly
        samples = [synthetic_sample(100 + s) for s in range(10)]
        phi = random_sensing_matrix(128, 256, "random_gaussian", rng=5)

        def method(sample):
            y = compress(sample.noisy, phi)
            k = int(sample.mask.sum())
            est, _ = omp_reconstruct(y, phi, CsSolverConfig(sparsity_k=k))
            return est

        report = evaluate_run(samples, method, method_name="omp",
                              compression_rate=0.5)
        assert report.p_d >= 0.9
        assert report.mse < 1e-6


class TestReportRendering:
    def report(self, **kw):
        base = dict(p_d=0.9, p_f=2.6e-4, mse=0.0026, cosine=0.9951,
                    ssim=0.8523, sample_count=100, band="sub6GHz", snr_db=30.0,
                    compression_rate=0.125, method="learned")
        base.update(kw)
        return DetectionReport(**base)

    def test_json_schema_fields(self):
        import json
        payload = json.loads(self.report().to_json())
        assert set(payload) == {"method", "band", "snr_db", "compression_rate",
                                "sample_count", "metrics"}
        assert set(payload["metrics"]) == {"mse", "cosine_similarity", "ssim",
                                           "p_d", "p_f"}

    def test_table_contains_all_metrics(self):
        table = render_table([self.report(), self.report(band="THz")])
        for label in ("MSE", "Cosine Similarity", "SSIM", "Pd", "Pf"):
            assert label in table
        assert "sub6GHz" in table and "THz" in table

    def test_absent_rates_render(self):
        table = render_table([self.report(p_d=None)])
        assert "n/a" in table
