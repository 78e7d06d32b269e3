"""Sub-Nyquist compression operators.

A sensing matrix maps an n_s-bin spectrum to m < n_s measurements. Random
baselines (Bernoulli +-1/sqrt(m) or Gaussian with variance 1/m, the software
stand-in for pseudo-random mixing sequences) and learned matrices share the
same complex m x n_s representation, so classical and learned reconstruction
paths are interchangeable. The equivalent action on stacked (real, imag)
vectors is the block matrix [[Re, -Im], [Im, Re]].
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .container import ContainerError, read_envelope, read_exact, write_envelope
from .rngutil import as_rng

MAGIC = b"V2XM"
VERSION = 1

KINDS = ("random_bernoulli", "random_gaussian", "learned")


@dataclass(frozen=True)
class SensingMatrix:
    m: int
    n_s: int
    entries: np.ndarray  # complex, shape (m, n_s)
    origin: str
    seed: int | None = None

    def __post_init__(self):
        if not self.m < self.n_s:
            raise ValueError("compression requires m < n_s")
        if self.entries.shape != (self.m, self.n_s):
            raise ValueError(f"entries must be {(self.m, self.n_s)}, "
                             f"got {self.entries.shape}")
        if not np.isfinite(self.entries).all():
            raise ValueError("sensing matrix entries must be finite")
        if self.origin not in KINDS:
            raise ValueError(f"unknown origin '{self.origin}'")

    @property
    def matrix_id(self) -> str:
        digest = hashlib.sha256()
        digest.update(f"{self.m}x{self.n_s}:{self.origin}:".encode())
        digest.update(np.ascontiguousarray(self.entries).tobytes())
        return digest.hexdigest()[:16]

    @property
    def compression_rate(self) -> float:
        return self.m / self.n_s


@dataclass(frozen=True)
class Measurements:
    y: np.ndarray  # complex, length m
    matrix_id: str


def random_sensing_matrix(m: int, n_s: int, kind: str = "random_bernoulli",
                          rng=0) -> SensingMatrix:
    """Seeded random compression operator.

    Bernoulli entries are +-1/sqrt(m); Gaussian entries are N(0, 1/m). Values
    are quantized to float32 on creation so serialization round-trips
    bit-exactly.
    """
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = as_rng(rng)
    if kind == "random_bernoulli":
        entries = gen.integers(0, 2, size=(m, n_s)) * 2.0 - 1.0
        entries /= np.sqrt(m)
    elif kind == "random_gaussian":
        entries = gen.normal(0.0, 1.0 / np.sqrt(m), size=(m, n_s))
    else:
        raise ValueError(f"unknown random matrix kind '{kind}'")
    entries = entries.astype(np.float32).astype(np.float64).astype(np.complex128)
    return SensingMatrix(m=m, n_s=n_s, entries=entries, origin=kind,
                         seed=None if seed is None else int(seed))


def compress(spectrum: np.ndarray, phi: SensingMatrix) -> Measurements:
    """Exact matrix-vector product y = phi @ spectrum."""
    spectrum = np.asarray(spectrum)
    if spectrum.shape != (phi.n_s,):
        raise ValueError(f"spectrum length {spectrum.shape} does not match "
                         f"matrix n_s={phi.n_s}")
    return Measurements(y=phi.entries @ spectrum.astype(np.complex128),
                        matrix_id=phi.matrix_id)


def as_real_block(phi: SensingMatrix) -> np.ndarray:
    """The 2m x 2n_s real operator acting on stacked (Re, Im) vectors."""
    re, im = phi.entries.real, phi.entries.imag
    return np.block([[re, -im], [im, re]])


def save_matrix(path, phi: SensingMatrix) -> None:
    header = {"m": phi.m, "n_s": phi.n_s, "kind": phi.origin, "seed": phi.seed}
    with open(path, "wb") as fh:
        write_envelope(fh, MAGIC, VERSION, header)
        pairs = np.ascontiguousarray(phi.entries.astype(np.complex64))
        fh.write(pairs.view(np.float32).tobytes())


def load_matrix(path) -> SensingMatrix:
    with open(path, "rb") as fh:
        version, header = read_envelope(fh, MAGIC)
        if version != VERSION:
            raise ContainerError(f"unsupported matrix version {version}")
        m, n_s = int(header["m"]), int(header["n_s"])
        blob = read_exact(fh, m * n_s * 8, "matrix entries")
        if fh.read(1):
            raise ContainerError("trailing bytes after matrix entries")
    flat = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    entries = (flat[0::2] + 1j * flat[1::2]).reshape(m, n_s)
    return SensingMatrix(m=m, n_s=n_s, entries=entries, origin=header["kind"],
                         seed=header.get("seed"))
