"""Learned joint compression/reconstruction network: inference and weight I/O.

The network is three stages. A bias-free linear compression layer applies a
complex m x n_s matrix to the spectrum (so the learned operator is exactly a
sensing matrix). A coarse stage maps the m x 2 measurements back to n_s x 2
through a full linear layer with batch norm and PReLU. A fine stage of
residual blocks (three same-padded kernel-3 convolutions per block, filter
counts 64/32/2, each conv followed by batch norm and PReLU) refines the
estimate; the identity skip is added after the block's last batch norm,
before its last activation.

Arrays are (position, channel) with channels = (real, imag). Batch norm at
inference uses stored running statistics with epsilon 1e-5. Training lives in
a separate package; this module only runs and serializes models.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .container import read_envelope, read_exact, write_envelope
from .errors import ContainerError, WeightsShapeError, WeightsValueError, \
    WeightsVersionError
from .sensing import SensingMatrix

MAGIC = b"V2XW"
VERSION = 1

PAPER_BLOCKS = 6
PAPER_FILTERS = (64, 32, 2)
KERNEL_SIZE = 3
BN_EPSILON = 1e-5

LAYER_ORDER = "conv-bn-prelu"
SKIP_CONNECTION = "after-final-bn"
CHANNEL_LAYOUT = "position-real-imag"


@dataclass(frozen=True)
class ModelArchitecture:
    n_s: int
    m: int
    residual_blocks: int = PAPER_BLOCKS
    block_filters: tuple[int, ...] = PAPER_FILTERS
    kernel_size: int = KERNEL_SIZE
    bn_epsilon: float = BN_EPSILON

    def __post_init__(self):
        if not self.m < self.n_s:
            raise ValueError("architecture requires m < n_s")
        if self.residual_blocks < 1:
            raise ValueError("need at least one residual block")
        if self.block_filters[-1] != 2:
            raise ValueError("last filter count must be 2 to emit (real, imag)")

    def validate_strict(self) -> None:
        """Enforce the published architecture (used for serialized models)."""
        if self.residual_blocks != PAPER_BLOCKS:
            raise WeightsShapeError(
                f"residual_blocks must be {PAPER_BLOCKS}, got {self.residual_blocks}")
        if tuple(self.block_filters) != PAPER_FILTERS:
            raise WeightsShapeError(
                f"block_filters must be {PAPER_FILTERS}, got {self.block_filters}")
        if self.kernel_size != KERNEL_SIZE:
            raise WeightsShapeError(
                f"kernel_size must be {KERNEL_SIZE}, got {self.kernel_size}")

    def to_json_dict(self) -> dict:
        return {
            "n_s": self.n_s,
            "m": self.m,
            "residual_blocks": self.residual_blocks,
            "block_filters": list(self.block_filters),
            "kernel_size": self.kernel_size,
            "bn_epsilon": self.bn_epsilon,
            "layer_order": LAYER_ORDER,
            "skip_connection": SKIP_CONNECTION,
            "channel_layout": CHANNEL_LAYOUT,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ModelArchitecture":
        for key, expected in (("layer_order", LAYER_ORDER),
                              ("skip_connection", SKIP_CONNECTION),
                              ("channel_layout", CHANNEL_LAYOUT)):
            if data.get(key, expected) != expected:
                raise WeightsShapeError(
                    f"unsupported {key} '{data.get(key)}' (expected '{expected}')")
        return cls(n_s=int(data["n_s"]), m=int(data["m"]),
                   residual_blocks=int(data["residual_blocks"]),
                   block_filters=tuple(data["block_filters"]),
                   kernel_size=int(data["kernel_size"]),
                   bn_epsilon=float(data["bn_epsilon"]))


def expected_tensors(arch: ModelArchitecture) -> list[tuple[str, tuple[int, ...]]]:
    """Canonical tensor table: (name, shape) in serialization order."""
    table = [
        ("compression.weight", (arch.m, arch.n_s, 2)),
        ("coarse.weight", (arch.n_s, 2, arch.m, 2)),
        ("coarse.bn.gamma", (2,)),
        ("coarse.bn.beta", (2,)),
        ("coarse.bn.running_mean", (2,)),
        ("coarse.bn.running_var", (2,)),
        ("coarse.prelu.alpha", (2,)),
    ]
    for b in range(1, arch.residual_blocks + 1):
        in_c = 2
        for l, out_c in enumerate(arch.block_filters, start=1):
            table.append((f"fine.block{b}.conv{l}.weight",
                          (out_c, in_c, arch.kernel_size)))
            for stat in ("gamma", "beta", "running_mean", "running_var"):
                table.append((f"fine.block{b}.bn{l}.{stat}", (out_c,)))
            table.append((f"fine.block{b}.prelu{l}.alpha", (out_c,)))
            in_c = out_c
    return table


@dataclass(frozen=True)
class ModelWeights:
    architecture: ModelArchitecture
    tensors: dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        expected = expected_tensors(self.architecture)
        names = {name for name, _ in expected}
        for name, shape in expected:
            if name not in self.tensors:
                raise WeightsShapeError(f"missing tensor '{name}'")
            got = self.tensors[name].shape
            if tuple(got) != shape:
                raise WeightsShapeError(
                    f"tensor '{name}' has shape {tuple(got)}, expected {shape}")
            if not np.isfinite(self.tensors[name]).all():
                raise WeightsValueError(f"tensor '{name}' contains non-finite values")
        extra = set(self.tensors) - names
        if extra:
            raise WeightsShapeError(f"unexpected tensors: {sorted(extra)}")

    @classmethod
    def zeros(cls, arch: ModelArchitecture) -> "ModelWeights":
        tensors = {name: np.zeros(shape) for name, shape in expected_tensors(arch)}
        return cls(architecture=arch, tensors=tensors)

    @classmethod
    def random(cls, arch: ModelArchitecture, rng) -> "ModelWeights":
        """Random weights for tests; BN stats stay benign (mean 0, var 1)."""
        tensors = {}
        for name, shape in expected_tensors(arch):
            if name.endswith((".gamma", ".running_var")):
                tensors[name] = rng.uniform(0.5, 1.5, size=shape)
            elif name.endswith((".beta", ".running_mean")):
                tensors[name] = rng.normal(0.0, 0.1, size=shape)
            elif name.endswith(".alpha"):
                tensors[name] = rng.uniform(0.05, 0.5, size=shape)
            else:
                tensors[name] = rng.normal(0.0, 0.3, size=shape)
        return cls(architecture=arch, tensors=tensors)


# ---------------------------------------------------------------------------
# Forward pass (batched, numpy)

def _as_batch(x: np.ndarray, n_s: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.shape == (n_s, 2):
        return x[None, :, :], True
    if x.ndim == 3 and x.shape[1:] == (n_s, 2):
        return x, False
    raise ValueError(f"input must be (n_s, 2) or (batch, n_s, 2) with n_s={n_s}, "
                     f"got {x.shape}")


def _batch_norm(x: np.ndarray, w: ModelWeights, prefix: str) -> np.ndarray:
    t = w.tensors
    mean = t[f"{prefix}.running_mean"]
    var = t[f"{prefix}.running_var"]
    gamma = t[f"{prefix}.gamma"]
    beta = t[f"{prefix}.beta"]
    return (x - mean) / np.sqrt(var + w.architecture.bn_epsilon) * gamma + beta


def _prelu(x: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, alpha * x)


def _conv1d_same(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Same-padded 1-D convolution, channels last: (B, L, Cin) -> (B, L, Cout)."""
    b, length, _ = x.shape
    out_c, in_c, k = weight.shape
    pad = k // 2
    xp = np.zeros((b, length + 2 * pad, in_c), dtype=x.dtype)
    xp[:, pad:pad + length, :] = x
    out = np.zeros((b, length, out_c), dtype=x.dtype)
    for t in range(k):
        out += xp[:, t:t + length, :] @ weight[:, :, t].T
    return out


def compression_stage(x, weights: ModelWeights) -> np.ndarray:
    """Apply only the learned compression layer: (.., n_s, 2) -> (.., m, 2)."""
    arch = weights.architecture
    batch, single = _as_batch(x, arch.n_s)
    w = weights.tensors["compression.weight"]
    phi = w[:, :, 0] + 1j * w[:, :, 1]
    z = batch[:, :, 0] @ phi.T + 1j * (batch[:, :, 1] @ phi.T)
    out = np.stack([z.real, z.imag], axis=-1)
    return out[0] if single else out


def forward(x, weights: ModelWeights) -> np.ndarray:
    """Full inference: compression -> coarse -> residual refinement."""
    arch = weights.architecture
    batch, single = _as_batch(x, arch.n_s)
    t = weights.tensors

    z = compression_stage(batch, weights)

    h = np.einsum("jdic,bic->bjd", t["coarse.weight"], z, optimize=True)
    h = _batch_norm(h, weights, "coarse.bn")
    h = _prelu(h, t["coarse.prelu.alpha"])

    for b in range(1, arch.residual_blocks + 1):
        skip = h
        for l in range(1, len(arch.block_filters) + 1):
            h = _conv1d_same(h, t[f"fine.block{b}.conv{l}.weight"])
            h = _batch_norm(h, weights, f"fine.block{b}.bn{l}")
            if l < len(arch.block_filters):
                h = _prelu(h, t[f"fine.block{b}.prelu{l}.alpha"])
        h = h + skip
        h = _prelu(h, t[f"fine.block{b}.prelu{len(arch.block_filters)}.alpha"])

    return h[0] if single else h


def forward_complex(noisy: np.ndarray, weights: ModelWeights) -> np.ndarray:
    """Convenience wrapper: complex spectrum in, complex estimate out."""
    noisy = np.asarray(noisy)
    stacked = np.stack([noisy.real, noisy.imag], axis=-1)
    out = forward(stacked, weights)
    return out[..., 0] + 1j * out[..., 1]


def extract_sensing_matrix(weights: ModelWeights) -> SensingMatrix:
    """The compression layer as a complex sensing matrix (same convention as
    the classical operators, so compress() reproduces the network stage)."""
    w = weights.tensors["compression.weight"]
    entries = (w[:, :, 0] + 1j * w[:, :, 1]).astype(np.complex128)
    return SensingMatrix(m=weights.architecture.m, n_s=weights.architecture.n_s,
                         entries=entries, origin="learned")


# ---------------------------------------------------------------------------
# Weight serialization

def save_weights(path, weights: ModelWeights) -> None:
    arch = weights.architecture
    arch.validate_strict()
    table = []
    offset = 0
    blobs = []
    for name, shape in expected_tensors(arch):
        data = np.ascontiguousarray(weights.tensors[name], dtype="<f4")
        table.append({"name": name, "shape": list(shape), "dtype": "float32",
                      "offset": offset})
        blobs.append(data.tobytes())
        offset += data.nbytes
    manifest = {"architecture": arch.to_json_dict(), "tensors": table}
    with open(path, "wb") as fh:
        write_envelope(fh, MAGIC, VERSION, manifest)
        for blob in blobs:
            fh.write(blob)


def load_weights(path) -> ModelWeights:
    with open(path, "rb") as fh:
        version, manifest = read_envelope(fh, MAGIC)
        if version != VERSION:
            raise WeightsVersionError(f"unsupported weights version {version}")
        arch = ModelArchitecture.from_json_dict(manifest["architecture"])
        arch.validate_strict()
        expected = expected_tensors(arch)
        declared = {entry["name"]: entry for entry in manifest.get("tensors", [])}
        offset = 0
        tensors = {}
        total = sum(int(np.prod(shape)) * 4 for _, shape in expected)
        blob = fh.read()
    if len(blob) != total:
        raise ContainerError(f"weights blob length mismatch: expected {total} "
                             f"bytes, got {len(blob)}")
    for name, shape in expected:
        entry = declared.get(name)
        if entry is None:
            raise WeightsShapeError(f"manifest missing tensor '{name}'")
        if tuple(entry["shape"]) != shape:
            raise WeightsShapeError(
                f"tensor '{name}' declared shape {tuple(entry['shape'])}, "
                f"expected {shape}")
        if entry.get("dtype", "float32") != "float32":
            raise WeightsShapeError(f"tensor '{name}' must be float32")
        if int(entry["offset"]) != offset:
            raise ContainerError(f"tensor '{name}' offset {entry['offset']} "
                                 f"disagrees with layout offset {offset}")
        nbytes = int(np.prod(shape)) * 4
        arr = np.frombuffer(blob, dtype="<f4", count=int(np.prod(shape)),
                            offset=offset).reshape(shape).astype(np.float64)
        if not np.isfinite(arr).all():
            raise WeightsValueError(f"tensor '{name}' contains non-finite values")
        tensors[name] = arr
        offset += nbytes
    if set(declared) - {name for name, _ in expected}:
        raise WeightsShapeError(
            f"manifest declares unknown tensors: "
            f"{sorted(set(declared) - {n for n, _ in expected})}")
    return ModelWeights(architecture=arch, tensors=tensors)
