"""Spectrum sample synthesis: subcarrier allocation, block spectra, noise.

Each active connection occupies a random block of 5 contiguous subcarriers
with at least one idle guard bin between blocks and against both band edges.
Block bins carry magnitude sqrt(P_rx_linear / 5) with i.i.d. uniform phases;
circular complex Gaussian noise is added at a configurable SNR, defined
against the mean power of the occupied bins.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import ConnectionSet
from .rngutil import as_rng

BLOCK_WIDTH = 5
GUARD_BINS = 1
DEFAULT_N_SUBCARRIERS = 256


def max_blocks(n_s: int) -> int:
    """Largest number of 5-bin blocks that fit with guards between and at edges."""
    # k blocks need 5k occupied bins plus k+1 guard bins (k-1 interior + 2 edges)
    return (n_s - 1) // (BLOCK_WIDTH + GUARD_BINS)


@dataclass(frozen=True)
class OccupancyMap:
    n_subcarriers: int
    assignments: tuple[tuple[int, int, int], ...]  # (connection index, start, width)
    mask: np.ndarray  # uint8, length n_subcarriers

    def validate(self) -> None:
        mask = np.zeros(self.n_subcarriers, dtype=np.uint8)
        for _, start, width in self.assignments:
            if width != BLOCK_WIDTH:
                raise ValueError(f"block width must be {BLOCK_WIDTH}, got {width}")
            lo, hi = start - GUARD_BINS, start + width + GUARD_BINS
            if lo < 0 or hi > self.n_subcarriers:
                raise ValueError(f"block at {start} violates the edge guard")
            if mask[lo:hi].any():
                raise ValueError(f"block at {start} violates guard separation")
            mask[start:start + width] = 1
        if not np.array_equal(mask, self.mask):
            raise ValueError("mask does not match assignments")


def allocate_subcarriers(connections: ConnectionSet, n_s: int, rng) -> OccupancyMap:
    """Place each connection on a uniformly random feasible 5-bin block.

    Connections are processed in a random order; when no feasible block
    remains, the connection is dropped from the sample (counts naturally vary
    per time step, so high load degrades gracefully instead of erroring).
    """
    if n_s < BLOCK_WIDTH + 2 * GUARD_BINS:
        raise ValueError(f"n_s must be at least {BLOCK_WIDTH + 2 * GUARD_BINS}")
    rng = as_rng(rng)
    n_conn = len(connections)
    order = rng.permutation(n_conn) if n_conn else []

    # feasible[s] == block may start at s; shrinks as blocks are placed
    feasible = np.zeros(n_s, dtype=bool)
    feasible[GUARD_BINS:n_s - BLOCK_WIDTH - GUARD_BINS + 1] = True
    mask = np.zeros(n_s, dtype=np.uint8)
    assignments = []
    for idx in order:
        starts = np.flatnonzero(feasible)
        if starts.size == 0:
            continue
        start = int(starts[rng.integers(starts.size)])
        mask[start:start + BLOCK_WIDTH] = 1
        # a later block starting in [start-5, start+5] would touch or abut
        lo = max(start - BLOCK_WIDTH - GUARD_BINS + 1, 0)
        feasible[lo:start + BLOCK_WIDTH + GUARD_BINS] = False
        assignments.append((int(idx), start, BLOCK_WIDTH))
    assignments.sort()
    return OccupancyMap(n_subcarriers=n_s, assignments=tuple(assignments), mask=mask)


def synthesize_spectrum(occupancy: OccupancyMap, connections: ConnectionSet,
                        rng) -> np.ndarray:
    """Clean aggregate spectrum: every assigned block spreads its link's
    received power evenly over 5 bins with independent uniform phases."""
    rng = as_rng(rng)
    spectrum = np.zeros(occupancy.n_subcarriers, dtype=np.complex128)
    for conn_idx, start, width in occupancy.assignments:
        p_linear = 10.0 ** (connections.connections[conn_idx].rx_power_dbm / 10.0)
        magnitude = math.sqrt(p_linear / width)
        phases = rng.uniform(0.0, 2.0 * math.pi, size=width)
        spectrum[start:start + width] = magnitude * np.exp(1j * phases)
    return spectrum


def add_noise(clean: np.ndarray, snr_db: float, rng) -> np.ndarray:
    """Add circular complex Gaussian noise to every bin.

    Per-bin noise variance is (mean power over occupied bins) / 10^(snr/10);
    snr_db = +inf returns the clean spectrum unchanged.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return clean.copy()
    occupied = np.abs(clean) > 0
    if not occupied.any():
        raise ValueError("SNR is undefined for an all-zero spectrum")
    rng = as_rng(rng)
    signal_power = float(np.mean(np.abs(clean[occupied]) ** 2))
    noise_var = signal_power / 10.0 ** (snr_db / 10.0)
    sigma = math.sqrt(noise_var / 2.0)
    noise = rng.normal(0.0, sigma, size=(clean.size, 2))
    return clean + noise[:, 0] + 1j * noise[:, 1]


@dataclass(frozen=True)
class SpectrumSample:
    """One labeled snapshot: clean spectrum, noisy spectrum, occupancy mask."""

    clean: np.ndarray  # complex, length n_subcarriers
    noisy: np.ndarray
    mask: np.ndarray  # uint8
    scale: float  # cumulative normalization divisor
    snr_db: float
    band: str

    @property
    def n_subcarriers(self) -> int:
        return int(self.clean.size)

    def is_normalized(self, tol: float = 1e-5) -> bool:
        peak = float(np.max(np.abs(self.noisy))) if self.noisy.size else 0.0
        return abs(peak - 1.0) <= tol


def normalize(sample: SpectrumSample) -> SpectrumSample:
    """Scale the sample so max |noisy| = 1; records the cumulative divisor.

    Idempotent: a second call divides by exactly 1.0.
    """
    peak = float(np.max(np.abs(sample.noisy)))
    if peak == 0.0:
        raise ValueError("cannot normalize an all-zero noisy spectrum")
    return replace(sample, clean=sample.clean / peak, noisy=sample.noisy / peak,
                   scale=sample.scale * peak)


def make_sample(connections: ConnectionSet, n_s: int, snr_db: float,
                rng) -> SpectrumSample | None:
    """Allocation -> synthesis -> noise -> normalize for one connection set.

    Returns None when nothing was placed (no occupied bin, SNR undefined).
    """
    rng = as_rng(rng)
    occupancy = allocate_subcarriers(connections, n_s, rng)
    if not occupancy.mask.any():
        return None
    clean = synthesize_spectrum(occupancy, connections, rng)
    noisy = add_noise(clean, snr_db, rng)
    sample = SpectrumSample(clean=clean, noisy=noisy, mask=occupancy.mask,
                            scale=1.0, snr_db=snr_db, band=connections.band.name)
    return normalize(sample)


# ---------------------------------------------------------------------------
# Unitary transforms between the time sequence and its spectrum

def dft(time_sequence: np.ndarray) -> np.ndarray:
    """Unitary DFT: time samples -> spectrum."""
    return np.fft.fft(time_sequence, norm="ortho")


def idft(spectrum: np.ndarray) -> np.ndarray:
    """Unitary inverse DFT: spectrum -> time samples."""
    return np.fft.ifft(spectrum, norm="ortho")
