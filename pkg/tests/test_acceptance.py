"""Acceptance gate: one test per release criterion, stated tolerances pinned.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion.
"""
import math
import time

import numpy as np
import pytest

from v2xsense import (ModelArchitecture, ModelWeights, RoadConfig,
                      VehicleParams, allocate_subcarriers, compress, dft,
                      forward, idft, max_blocks, path_loss_sub6, path_loss_thz,
                      random_sensing_matrix, run_scenario, sub6ghz_band)
from v2xsense.channel import BS_ID, Connection, ConnectionSet
from v2xsense.cs_baseline import (CsSolverConfig, fista_reconstruct,
                                  omp_reconstruct)
from v2xsense.dataset import ScenarioConfig, generate_dataset
from v2xsense.evaluation import detection_rates, energy_detect, evaluate_run
from v2xsense.rngutil import derived_rng

from test_cs_baseline import block_sparse_instance, partial_identity
from test_evaluation import synthetic_sample
from test_reconstructor import oracle_forward


def _report(name):
    print(f"[PASS] {name}")


class TestInvariantSuites:
    """Mobility, allocation, transform, and compression invariants in < 2 min."""

    def test_invariant_suites_within_runtime_budget(self):
        started = time.time()

        # mobility: gap / speed / red-light invariants, 1,000 steps x 10 seeds
        road, params = RoadConfig(), VehicleParams()
        stop = {+1: road.light_position_m,
                -1: road.length_m - road.light_position_m}
        for seed in range(10):
            traj = run_scenario(road, params, 1000.0, seed=seed)
            traj.validate(params)  # frame spacing + bumper-gap rule
            last_s = {}
            for t, poses in traj.frames:
                green = road.light_is_green(t - road.time_step_s)
                for p in poses:
                    assert 0.0 <= p.speed_mps <= params.max_speed_mps + 1e-9
                    assert 0.0 <= p.x <= road.length_m
                    s = p.x if p.direction > 0 else road.length_m - p.x
                    prev = last_s.get(p.vehicle_id)
                    if prev is not None and not green:
                        assert not (prev <= stop[p.direction] < s)
                    last_s[p.vehicle_id] = s

        # allocation: guard/width invariants over 1e5 generated masks
        rng = derived_rng(1234, 0)
        band = sub6ghz_band()
        cap = max_blocks(256)
        for _ in range(100_000):
            n_conn = int(rng.integers(0, 46))
            conns = ConnectionSet(0.0, band, tuple(
                Connection("V2I", str(i), BS_ID, 10.0, 1e9, 0.0)
                for i in range(n_conn)))
            mask = allocate_subcarriers(conns, 256, rng).mask
            padded = np.concatenate([[0], mask, [0]])
            edges = np.flatnonzero(np.diff(padded))
            starts, ends = edges[0::2], edges[1::2]
            assert np.all(ends - starts == 5)
            assert len(starts) <= cap
            if len(starts):
                assert starts[0] >= 1 and ends[-1] <= 255
                assert np.all(starts[1:] - ends[:-1] >= 1)

        # DFT unitarity and Parseval to 1e-10
        grng = derived_rng(55, 0)
        for _ in range(200):
            spec = grng.normal(size=256) + 1j * grng.normal(size=256)
            time_seq = idft(spec)
            assert np.max(np.abs(dft(time_seq) - spec)) < 1e-10
            assert abs(np.sum(np.abs(time_seq) ** 2)
                       - np.sum(np.abs(spec) ** 2)) < 1e-10 * np.sum(np.abs(spec) ** 2)

        # compression linearity to 1e-9
        for seed in range(50):
            phi = random_sensing_matrix(32, 256, "random_gaussian", rng=seed)
            x1 = grng.normal(size=256) + 1j * grng.normal(size=256)
            x2 = grng.normal(size=256) + 1j * grng.normal(size=256)
            a = complex(grng.normal(), grng.normal())
            b = complex(grng.normal(), grng.normal())
            lhs = compress(a * x1 + b * x2, phi).y
            rhs = a * compress(x1, phi).y + b * compress(x2, phi).y
            assert np.max(np.abs(lhs - rhs)) < 1e-9

        elapsed = time.time() - started
        assert elapsed < 120.0, f"invariant suites took {elapsed:.1f}s"
        _report(f"invariant suites (mobility/allocation/DFT/linearity) "
                f"in {elapsed:.1f}s < 120s")


class TestPathLossTable:
    def test_five_spot_values_to_1e9_db(self):
        table = [
            (path_loss_sub6(0.1, 2e9), 115.602059991327962),
            (path_loss_sub6(1.0, 1e9), 145.0),
            (path_loss_sub6(1.0, 1.0), 127.0),
            (path_loss_sub6(0.05, 5.9e9), 107.510804153364853),
            (path_loss_thz(15.0, 0.3e12, 0.5), 113.012033497390247),
        ]
        for got, want in table:
            assert got == pytest.approx(want, abs=1e-9)
        _report("path-loss table: 5 hand-computed spot values to 1e-9 dB")


class TestCsOracleEquivalence:
    def test_omp_one_sparse_exact_50_of_50(self):
        for seed in range(50):
            rng = derived_rng(seed, 1)
            phi = random_sensing_matrix(16, 64, "random_gaussian",
                                        rng=1000 + seed)
            x = np.zeros(64, dtype=complex)
            x[int(rng.integers(64))] = complex(rng.normal(), rng.normal())
            xh, _ = omp_reconstruct(compress(x, phi), phi,
                                    CsSolverConfig(sparsity_k=1))
            assert np.linalg.norm(xh - x) / np.linalg.norm(x) < 1e-6
        _report("OMP 1-sparse noiseless exact recovery, 50/50 seeds, rel < 1e-6")

    def test_fista_matches_identity_soft_threshold_to_1e8(self):
        rng = derived_rng(2, 0)
        m, n_s = 24, 48
        phi = partial_identity(m, n_s)
        y = rng.normal(size=m) + 1j * rng.normal(size=m)
        lam = 0.3
        x, _ = fista_reconstruct(y, phi, CsSolverConfig(lam=lam,
                                                        max_iterations=200))
        closed = y * np.maximum(0.0, 1.0 - lam / np.abs(y))
        assert np.max(np.abs(x[:m] - closed)) < 1e-8
        assert np.max(np.abs(x[m:])) == 0.0
        _report("FISTA equals closed-form soft thresholding under identity "
                "rows to 1e-8")

    def test_omp_block_sparse_45_of_50(self):
        hits = 0
        for seed in range(50):
            x, y, phi = block_sparse_instance(seed)  # m=128, n_s=256, 5 blocks
            xh, _ = omp_reconstruct(y, phi, CsSolverConfig(sparsity_k=25))
            hits += np.linalg.norm(xh - x) / np.linalg.norm(x) < 1e-4
        assert hits >= 45, f"{hits}/50"
        _report(f"OMP block-sparse m=128 n_s=256: rel < 1e-4 on {hits}/50 seeds "
                f"(needs 45)")


class TestForwardPassOracle:
    def test_tiny_instance_100_draws_to_1e6(self):
        arch = ModelArchitecture(n_s=8, m=2, residual_blocks=1)
        worst = 0.0
        for trial in range(100):
            rng = derived_rng(trial, 40)
            weights = ModelWeights.random(arch, rng)
            x = rng.normal(size=(8, 2))
            got = forward(x, weights)
            want = oracle_forward(x.tolist(), weights)
            worst = max(worst, float(np.max(np.abs(got - want))))
        assert worst < 1e-6
        _report(f"forward-pass oracle: tiny instance, 100 draws, max abs diff "
                f"{worst:.2e} < 1e-6")


class TestMetricIdentities:
    def test_oracle_scores_and_boundary(self):
        samples = [synthetic_sample(s) for s in range(5)]
        report = evaluate_run(samples, lambda s: s.clean, method_name="oracle")
        assert report.mse == 0.0
        assert report.cosine == 1.0
        assert report.ssim == 1.0
        assert report.p_d == 1.0
        assert report.p_f == 0.0

        boundary = np.zeros(16, dtype=complex)
        boundary[3] = 0.5 + 0.5j  # power exactly 0.5
        assert energy_detect(boundary).sum() == 0
        est, truth = np.ones(4, np.uint8), np.ones(4, np.uint8)
        assert detection_rates(est, truth)[0] == 1.0
        _report("metric identities exact (mse 0, cosine 1, ssim 1, p_d 1, "
                "p_f 0); 0.5-power bin stays idle")


class TestDeterminism:
    def test_dataset_bytes_stable_across_runs_and_jobs(self, tmp_path):
        counts = (100, 20, 20)
        band = sub6ghz_band()
        paths = [tmp_path / f"run{i}.v2xd" for i in range(3)]
        generate_dataset(ScenarioConfig(), band, 30.0, counts, seed=77,
                         path=paths[0], jobs=1)
        generate_dataset(ScenarioConfig(), band, 30.0, counts, seed=77,
                         path=paths[1], jobs=1)
        generate_dataset(ScenarioConfig(), band, 30.0, counts, seed=77,
                         path=paths[2], jobs=8)
        blobs = [p.read_bytes() for p in paths]
        assert blobs[0] == blobs[1], "two jobs=1 runs differ"
        assert blobs[0] == blobs[2], "jobs=8 differs from jobs=1"
        _report("dataset generation at (100, 20, 20) byte-identical across "
                "runs and across jobs 1 vs 8")
