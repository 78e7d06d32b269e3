"""Reconstruction scoring: ML metrics plus energy-detection rates.

Occupancy ground truth for the communication metrics comes from thresholding
the clean spectrum with the same 0.5 power rule applied to the estimate, so a
perfect reconstruction scores detection 1 / false alarm 0 by construction.
MSE is averaged over real components; cosine similarity and SSIM operate on
magnitude spectra (the only reading under which SSIM's luminance and contrast
terms are well defined).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import NormalizationError
from .specgen import SpectrumSample

POWER_THRESHOLD = 0.5
SSIM_WINDOW = 8
SSIM_C1 = (0.01 * 1.0) ** 2  # unit dynamic range
SSIM_C2 = (0.03 * 1.0) ** 2


def energy_detect(spectrum: np.ndarray, threshold: float = POWER_THRESHOLD) -> np.ndarray:
    """Occupancy bits: bin k is occupied iff |X_k|^2 strictly exceeds threshold.

    Power is re^2 + im^2 (no square root), so representable boundary cases
    like 0.5 + 0.5j compare exactly.
    """
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    power = spectrum.real ** 2 + spectrum.imag ** 2
    return (power > threshold).astype(np.uint8)


def detection_rates(estimated_mask: np.ndarray,
                    true_mask: np.ndarray) -> tuple[float | None, float | None]:
    """(detection rate, false alarm rate); None when a class has no bins."""
    est = np.asarray(estimated_mask).astype(bool)
    true = np.asarray(true_mask).astype(bool)
    if est.shape != true.shape:
        raise ValueError("mask shapes differ")
    occupied = int(true.sum())
    idle = int((~true).sum())
    p_d = float((est & true).sum() / occupied) if occupied else None
    p_f = float((est & ~true).sum() / idle) if idle else None
    return p_d, p_f


def mse(estimate: np.ndarray, reference: np.ndarray) -> float:
    """Mean squared difference over all 2*n_s real components."""
    est = np.asarray(estimate, dtype=np.complex128)
    ref = np.asarray(reference, dtype=np.complex128)
    if est.shape != ref.shape:
        raise ValueError("spectrum shapes differ")
    diff = est - ref
    return float((diff.real ** 2 + diff.imag ** 2).sum() / (2 * est.size))


def cosine_similarity(estimate: np.ndarray, reference: np.ndarray) -> float:
    """Cosine of the angle between magnitude spectra."""
    a = np.abs(np.asarray(estimate))
    b = np.abs(np.asarray(reference))
    if a.shape != b.shape:
        raise ValueError("spectrum shapes differ")
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 and nb == 0.0:
        return 1.0
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def ssim_1d(estimate: np.ndarray, reference: np.ndarray,
            window: int = SSIM_WINDOW) -> float:
    """Mean SSIM over sliding windows (stride 1) of the magnitude spectra.

    Uses the standard constants C1=(0.01 L)^2, C2=(0.03 L)^2 with unit dynamic
    range L=1 and plain (biased) window moments.
    """
    a = np.abs(np.asarray(estimate, dtype=np.complex128))
    b = np.abs(np.asarray(reference, dtype=np.complex128))
    if a.shape != b.shape:
        raise ValueError("spectrum shapes differ")
    n = a.size
    if n < window:
        raise ValueError(f"need at least {window} bins, got {n}")
    # windowed moments via cumulative sums
    def win_mean(v):
        c = np.concatenate([[0.0], np.cumsum(v)])
        return (c[window:] - c[:-window]) / window

    mu_a = win_mean(a)
    mu_b = win_mean(b)
    mu_aa = win_mean(a * a)
    mu_bb = win_mean(b * b)
    mu_ab = win_mean(a * b)
    var_a = mu_aa - mu_a ** 2
    var_b = mu_bb - mu_b ** 2
    cov = mu_ab - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class DetectionReport:
    """Table-row summary of one evaluation run."""

    p_d: float | None
    p_f: float | None
    mse: float
    cosine: float
    ssim: float
    sample_count: int
    band: str
    snr_db: float
    compression_rate: float | None = None
    method: str = ""

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "band": self.band,
            "snr_db": self.snr_db,
            "compression_rate": self.compression_rate,
            "sample_count": self.sample_count,
            "metrics": {
                "mse": self.mse,
                "cosine_similarity": self.cosine,
                "ssim": self.ssim,
                "p_d": self.p_d,
                "p_f": self.p_f,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


def evaluate_run(samples, method, *, method_name: str = "",
                 compression_rate: float | None = None,
                 threshold: float = POWER_THRESHOLD,
                 require_normalized: bool = True) -> DetectionReport:
    """Score `method` over a dataset split.

    `method` maps a SpectrumSample to a complex spectrum estimate. Metrics are
    computed per sample and averaged; detection rates with no bins in a class
    are skipped for that sample. Every sample must carry the normalization
    scale convention (max |noisy| = 1), otherwise the fixed 0.5 power
    threshold would be meaningless.
    """
    mses, cosines, ssims, pds, pfs = [], [], [], [], []
    count = 0
    band = ""
    snr_db = math.nan
    for sample in samples:
        if require_normalized and not sample.is_normalized():
            raise NormalizationError(
                "sample is not normalized; energy detection at a fixed "
                "threshold requires max |noisy| = 1")
        estimate = np.asarray(method(sample))
        reference = sample.clean
        mses.append(mse(estimate, reference))
        cosines.append(cosine_similarity(estimate, reference))
        ssims.append(ssim_1d(estimate, reference))
        p_d, p_f = detection_rates(energy_detect(estimate, threshold),
                                   energy_detect(reference, threshold))
        if p_d is not None:
            pds.append(p_d)
        if p_f is not None:
            pfs.append(p_f)
        count += 1
        band = sample.band
        snr_db = sample.snr_db
    if count == 0:
        raise ValueError("no samples to evaluate")
    return DetectionReport(
        p_d=float(np.mean(pds)) if pds else None,
        p_f=float(np.mean(pfs)) if pfs else None,
        mse=float(np.mean(mses)),
        cosine=float(np.mean(cosines)),
        ssim=float(np.mean(ssims)),
        sample_count=count,
        band=band,
        snr_db=snr_db,
        compression_rate=compression_rate,
        method=method_name,
    )


def render_table(reports: list[DetectionReport]) -> str:
    """Aligned text table with one metric per row and one column per run."""
    headers = [f"{r.method or 'run'} ({r.band})" for r in reports]
    rows = [
        ("MSE", [f"{r.mse:.4g}" for r in reports]),
        ("Cosine Similarity", [f"{r.cosine:.4f}" for r in reports]),
        ("SSIM", [f"{r.ssim:.4f}" for r in reports]),
        ("Pd", ["n/a" if r.p_d is None else f"{r.p_d:.4g}" for r in reports]),
        ("Pf", ["n/a" if r.p_f is None else f"{r.p_f:.4g}" for r in reports]),
    ]
    label_w = max(len(label) for label, _ in rows)
    col_w = [max(len(h), max(len(vals[i]) for _, vals in rows))
             for i, h in enumerate(headers)]
    lines = [" " * label_w + " | "
             + " | ".join(h.rjust(w) for h, w in zip(headers, col_w))]
    lines.append("-" * len(lines[0]))
    for label, vals in rows:
        lines.append(label.ljust(label_w) + " | "
                     + " | ".join(v.rjust(w) for v, w in zip(vals, col_w)))
    return "\n".join(lines) + "\n"
