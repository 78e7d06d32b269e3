"""Dataset container (V2XD) and the end-to-end sample generation pipeline.

File layout: the shared envelope (magic ``V2XD``, u32 version, header JSON
with band, snr_db, n_subcarriers, counts, seed) followed by fixed-size
records in train -> val -> test order. Each record is the clean spectrum as
n_s x 2 little-endian float32 (real, imag interleaved), the noisy spectrum
likewise, the occupancy mask as n_s bytes, and the normalization scale as one
float64.

Generation is deterministic: the mobility chain runs on its own derived
stream and every candidate time step gets an rng keyed by (seed, split,
step), so results do not depend on how many workers computed them.
"""
from __future__ import annotations

import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from . import mobility
from .channel import BandConfig, build_connections
from .container import ContainerError, read_envelope, read_exact, write_envelope
from .rngutil import derived_rng
from .specgen import DEFAULT_N_SUBCARRIERS, SpectrumSample, make_sample

MAGIC = b"V2XD"
VERSION = 1

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class DatasetHeader:
    band: str
    snr_db: float
    n_subcarriers: int
    counts: tuple[int, int, int]  # train, val, test
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "band": self.band,
            "snr_db": self.snr_db,
            "n_subcarriers": self.n_subcarriers,
            "counts": {"train": self.counts[0], "val": self.counts[1],
                       "test": self.counts[2]},
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "DatasetHeader":
        counts = data["counts"]
        return cls(band=data["band"], snr_db=data["snr_db"],
                   n_subcarriers=data["n_subcarriers"],
                   counts=(counts["train"], counts["val"], counts["test"]),
                   seed=data["seed"])

    @property
    def total(self) -> int:
        return sum(self.counts)

    def record_nbytes(self) -> int:
        n = self.n_subcarriers
        return n * 8 * 2 + n + 8  # two complex f32 vectors, mask bytes, f64 scale


def _pack_record(sample: SpectrumSample) -> bytes:
    clean = np.ascontiguousarray(sample.clean.astype(np.complex64))
    noisy = np.ascontiguousarray(sample.noisy.astype(np.complex64))
    mask = np.ascontiguousarray(sample.mask.astype(np.uint8))
    return (clean.view(np.float32).astype("<f4").tobytes()
            + noisy.view(np.float32).astype("<f4").tobytes()
            + mask.tobytes()
            + struct.pack("<d", sample.scale))


def _unpack_record(blob: bytes, header: DatasetHeader) -> SpectrumSample:
    n = header.n_subcarriers
    off = 0
    clean = np.frombuffer(blob, dtype="<f4", count=2 * n, offset=off)
    off += 8 * n
    noisy = np.frombuffer(blob, dtype="<f4", count=2 * n, offset=off)
    off += 8 * n
    mask = np.frombuffer(blob, dtype=np.uint8, count=n, offset=off).copy()
    off += n
    (scale,) = struct.unpack_from("<d", blob, off)
    to_complex = lambda h: (h[0::2] + 1j * h[1::2]).astype(np.complex128)
    return SpectrumSample(clean=to_complex(clean), noisy=to_complex(noisy),
                          mask=mask, scale=scale, snr_db=header.snr_db,
                          band=header.band)


def write_dataset(path, header: DatasetHeader,
                  samples: Iterable[SpectrumSample]) -> None:
    count = 0
    with open(path, "wb") as fh:
        write_envelope(fh, MAGIC, VERSION, header.to_json_dict())
        for sample in samples:
            if sample.n_subcarriers != header.n_subcarriers:
                raise ValueError("sample size disagrees with the header")
            fh.write(_pack_record(sample))
            count += 1
    if count != header.total:
        raise ValueError(f"wrote {count} records but header declares {header.total}")


class Dataset:
    """In-memory view of a dataset file with split slicing."""

    def __init__(self, header: DatasetHeader, samples: list[SpectrumSample]):
        if len(samples) != header.total:
            raise ContainerError(f"expected {header.total} records, "
                                 f"found {len(samples)}")
        self.header = header
        self.samples = samples

    def split(self, name: str) -> list[SpectrumSample]:
        if name not in SPLIT_NAMES:
            raise ValueError(f"unknown split '{name}'")
        idx = SPLIT_NAMES.index(name)
        start = sum(self.header.counts[:idx])
        return self.samples[start:start + self.header.counts[idx]]


def read_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        version, hdr_json = read_envelope(fh, MAGIC)
        if version != VERSION:
            raise ContainerError(f"unsupported dataset version {version}")
        header = DatasetHeader.from_json_dict(hdr_json)
        rec_size = header.record_nbytes()
        samples = []
        for i in range(header.total):
            blob = read_exact(fh, rec_size, f"record {i}")
            samples.append(_unpack_record(blob, header))
        trailing = fh.read(1)
        if trailing:
            raise ContainerError("trailing bytes after the last record")
    return Dataset(header, samples)


# ---------------------------------------------------------------------------
# Generation pipeline

@dataclass(frozen=True)
class ScenarioConfig:
    road: mobility.RoadConfig = field(default_factory=mobility.RoadConfig)
    vehicle: mobility.VehicleParams = field(default_factory=mobility.VehicleParams)
    bs_position: tuple[float, float] | None = None  # defaults to mid-road

    def bs_xy(self) -> tuple[float, float]:
        if self.bs_position is not None:
            return self.bs_position
        return (self.road.length_m / 2.0, 0.0)


def _step_sample(poses, step_idx: int, scenario: ScenarioConfig, band: BandConfig,
                 n_s: int, snr_db: float, seed: int,
                 split_idx: int) -> SpectrumSample | None:
    rng = derived_rng(seed, split_idx, 1, step_idx)
    conns = build_connections(list(poses), scenario.bs_xy(), band, rng)
    if not conns.connections:
        return None
    return make_sample(conns, n_s, snr_db, rng)


def _split_samples(scenario: ScenarioConfig, band: BandConfig, n_s: int,
                   snr_db: float, count: int, seed: int, split_idx: int,
                   jobs: int = 1) -> Iterator[SpectrumSample]:
    """Yield `count` samples for one split, skipping steps with nothing placed."""
    if count == 0:
        return
    road, params = scenario.road, scenario.vehicle
    mob_rng = derived_rng(seed, split_idx, 0)
    state = mobility.new_state(road, params, mob_rng)
    produced = 0
    step_idx = 0
    max_steps = 200 * count + 10_000  # guards against a scenario that never connects
    chunk = max(64, min(1024, count))
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        while produced < count:
            frames = []
            for _ in range(chunk):
                mobility.spawn_vehicles(state, mob_rng)
                mobility.step_simulation(state, road, params)
                frames.append((tuple(state.poses()), step_idx))
                step_idx += 1
            if step_idx > max_steps:
                raise RuntimeError(
                    f"no connections after {step_idx} simulated steps; "
                    "check the scenario and band ranges")
            args = [(poses, idx, scenario, band, n_s, snr_db, seed, split_idx)
                    for poses, idx in frames]
            if pool is None:
                results = (_step_sample(*a) for a in args)
            else:
                results = pool.map(_step_sample_star, args, chunksize=16)
            for sample in results:
                if sample is None:
                    continue
                yield sample
                produced += 1
                if produced == count:
                    break
    finally:
        if pool is not None:
            pool.shutdown()


def _step_sample_star(args):
    return _step_sample(*args)


def generate_dataset(scenario: ScenarioConfig, band: BandConfig, snr_db: float,
                     counts: tuple[int, int, int], seed: int, path=None,
                     n_subcarriers: int = DEFAULT_N_SUBCARRIERS,
                     jobs: int = 1) -> Dataset:
    """Run mobility -> channel -> allocation -> synthesis -> noise -> normalize.

    One sample per simulated time step (steps with no placed connection are
    skipped). Splits use independent derived streams, so any split's content
    is independent of the other splits' sizes. Writes `path` when given and
    returns the in-memory dataset either way.
    """
    header = DatasetHeader(band=band.name, snr_db=snr_db,
                           n_subcarriers=n_subcarriers,
                           counts=tuple(int(c) for c in counts), seed=int(seed))
    samples: list[SpectrumSample] = []
    for split_idx, count in enumerate(header.counts):
        samples.extend(_split_samples(scenario, band, n_subcarriers, snr_db,
                                      count, header.seed, split_idx, jobs=jobs))
    if path is not None:
        write_dataset(path, header, samples)
    return Dataset(header, samples)
