"""V2V/V2I link construction and received-power models.

Two operating bands are supported. The sub-6 GHz path loss is
``127 + 2*log10(f) + 30*log10(d)`` with f in Hz and d in km, applied exactly
as written (no silent unit conversion of f). The THz model combines
free-space spreading with a piecewise-constant molecular absorption table.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .mobility import VehiclePose
from .rngutil import as_rng

SPEED_OF_LIGHT_MPS = 299_792_458.0

# Distances below 1 m are clamped before the log terms; sub-meter link
# distances are nonphysical for 5 m vehicles.
MIN_DISTANCE_M = 1.0

V2I_PROBABILITY = 0.9
V2V_PROBABILITY = 0.5

BS_ID = "BS"  # reserved identifier for the base station

# dB/m absorption per THz sub-band: windows below 0.2 THz, moderate loss to
# 0.4 THz, strong absorption peaks above. Configurable per BandConfig.
DEFAULT_THZ_ABSORPTION = (
    (0.1e12, 0.2e12, 0.1),
    (0.2e12, 0.4e12, 0.5),
    (0.4e12, 0.55e12, 2.0),
)


@dataclass(frozen=True)
class BandConfig:
    name: str  # "sub6GHz" or "THz"
    w1_hz: float
    w2_hz: float
    comm_range_m: float
    tx_gain_dbi: float
    rx_gain_dbi: float
    tx_power_dbm: float = 23.0
    thz_absorption_db_per_m: tuple = DEFAULT_THZ_ABSORPTION

    def __post_init__(self):
        if not self.w1_hz < self.w2_hz:
            raise ValueError("band edges must satisfy w1 < w2")
        if self.comm_range_m <= 0:
            raise ValueError("comm_range_m must be positive")


def sub6ghz_band(**overrides) -> BandConfig:
    cfg = dict(name="sub6GHz", w1_hz=0.0, w2_hz=2e9, comm_range_m=100.0,
               tx_gain_dbi=0.0, rx_gain_dbi=0.0)
    cfg.update(overrides)
    return BandConfig(**cfg)


def thz_band(**overrides) -> BandConfig:
    cfg = dict(name="THz", w1_hz=0.1e12, w2_hz=0.55e12, comm_range_m=15.0,
               tx_gain_dbi=50.0, rx_gain_dbi=50.0)
    cfg.update(overrides)
    return BandConfig(**cfg)


def band_by_name(name: str) -> BandConfig:
    key = name.strip().lower()
    if key == "sub6ghz":
        return sub6ghz_band()
    if key == "thz":
        return thz_band()
    raise ValueError(f"unknown band '{name}' (expected sub6GHz or THz)")


def path_loss_sub6(distance_km: float, freq_hz: float) -> float:
    """Sub-6 GHz path loss in dB; d in km, f in Hz, exactly as specified."""
    if distance_km <= 0:
        raise ValueError(f"distance must be positive, got {distance_km} km")
    if freq_hz <= 0:
        raise ValueError(f"frequency must be positive, got {freq_hz} Hz")
    d = max(distance_km, MIN_DISTANCE_M / 1000.0)
    return 127.0 + 2.0 * math.log10(freq_hz) + 30.0 * math.log10(d)


def thz_absorption_db_per_m(freq_hz: float, table=DEFAULT_THZ_ABSORPTION) -> float:
    for lo, hi, coeff in table:
        if lo <= freq_hz <= hi:
            return coeff
    raise ValueError(f"no absorption coefficient covers {freq_hz} Hz")


def path_loss_thz(distance_m: float, freq_hz: float,
                  absorption_db_per_m: float | None = None) -> float:
    """THz path loss in dB: free-space spreading plus molecular absorption."""
    if distance_m <= 0:
        raise ValueError(f"distance must be positive, got {distance_m} m")
    if not 0.1e12 <= freq_hz <= 0.55e12:
        raise ValueError(f"frequency {freq_hz} Hz outside the 0.1-0.55 THz band")
    if absorption_db_per_m is None:
        absorption_db_per_m = thz_absorption_db_per_m(freq_hz)
    d = max(distance_m, MIN_DISTANCE_M)
    spreading = 20.0 * math.log10(4.0 * math.pi * d * freq_hz / SPEED_OF_LIGHT_MPS)
    return spreading + absorption_db_per_m * d


@dataclass(frozen=True)
class Connection:
    kind: str  # "V2I" or "V2V"
    tx_id: str
    rx_id: str
    distance_m: float
    center_freq_hz: float
    rx_power_dbm: float


@dataclass(frozen=True)
class ConnectionSet:
    time_s: float
    band: BandConfig
    connections: tuple[Connection, ...]

    def __len__(self) -> int:
        return len(self.connections)


def link_rx_power_dbm(band: BandConfig, distance_m: float, freq_hz: float) -> float:
    if band.name == "sub6GHz":
        loss = path_loss_sub6(distance_m / 1000.0, freq_hz)
    elif band.name == "THz":
        loss = path_loss_thz(distance_m, freq_hz,
                             thz_absorption_db_per_m(freq_hz,
                                                     band.thz_absorption_db_per_m))
    else:
        raise ValueError(f"unknown band '{band.name}'")
    return band.tx_power_dbm + band.tx_gain_dbi + band.rx_gain_dbi - loss


def build_connections(poses: list[VehiclePose], bs_position: tuple[float, float],
                      band: BandConfig, rng) -> ConnectionSet:
    """Draw the V2I/V2V links active at one time step.

    Vehicles within comm range of the BS connect with probability 0.9, vehicle
    pairs within range with probability 0.5; every link gets a center
    frequency uniform in [w1, w2]. Range checks are inclusive. The rng draw
    order is fixed (V2I sweep in pose order, then V2V over pairs i<j) so the
    result is deterministic for a seeded generator.
    """
    rng = as_rng(rng)
    bx, by = bs_position
    links: list[Connection] = []

    for p in poses:
        d = math.hypot(p.x - bx, p.y - by)
        if d <= band.comm_range_m and rng.random() < V2I_PROBABILITY:
            f = _draw_freq(rng, band)
            links.append(Connection("V2I", p.vehicle_id, BS_ID, d, f,
                                    link_rx_power_dbm(band, d, f)))
    for i, a in enumerate(poses):
        for b in poses[i + 1:]:
            d = math.hypot(a.x - b.x, a.y - b.y)
            if d <= band.comm_range_m and rng.random() < V2V_PROBABILITY:
                f = _draw_freq(rng, band)
                links.append(Connection("V2V", a.vehicle_id, b.vehicle_id, d, f,
                                        link_rx_power_dbm(band, d, f)))
    return ConnectionSet(time_s=0.0, band=band, connections=tuple(links))


def _draw_freq(rng: np.random.Generator, band: BandConfig) -> float:
    f = float(rng.uniform(band.w1_hz, band.w2_hz))
    # guard the log10 domain when the band edge sits at 0 Hz
    return max(f, 1.0)


def connections_to_csv(sets: list[ConnectionSet]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "kind", "tx", "rx", "distance_m", "freq_hz",
                     "rx_power_dbm"])
    for cs in sets:
        for c in cs.connections:
            writer.writerow([f"{cs.time_s:g}", c.kind, c.tx_id, c.rx_id,
                             f"{c.distance_m:.6f}", f"{c.center_freq_hz:.6f}",
                             f"{c.rx_power_dbm:.6f}"])
    return buf.getvalue()


def load_band_file(path) -> BandConfig:
    """Read a band configuration from a `key = value` text file."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key] = val
    if "name" not in values:
        raise ValueError(f"{path}: band file must set 'name'")
    base = band_by_name(values.pop("name"))
    numeric = {}
    for key, val in values.items():
        if key not in ("w1_hz", "w2_hz", "comm_range_m", "tx_gain_dbi",
                       "rx_gain_dbi", "tx_power_dbm"):
            raise ValueError(f"{path}: unknown band key '{key}'")
        numeric[key] = float(val)
    return BandConfig(**{**base.__dict__, **numeric})
