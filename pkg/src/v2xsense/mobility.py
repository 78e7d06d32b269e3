"""Microscopic traffic generation on a straight two-direction road.

Vehicles enter from both ends with exponential inter-arrival times, follow a
deterministic bounded-acceleration car-following rule, obey a mid-road traffic
light, and leave at the far end. The rule keeps the bumper gap at or above
``min_gap_m`` by construction: each vehicle caps its next-step speed with the
Krauss-style safe speed

    v_safe(D) = -b*dt + sqrt((b*dt)^2 + 2*b*D)

computed against the previous positions of its leader (and the stop line when
the light is red), which guarantees the step never overshoots the headroom D.

SUMO floating-car-data XML traces can be ingested as an alternative source of
trajectories.
"""
from __future__ import annotations

import csv
import io
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import FcdParseError, FcdSchemaError
from .rngutil import as_rng, derived_rng

LANE_WIDTH_M = 3.5

# Car-following accelerations; the paper delegates dynamics to SUMO, so any
# collision-free, light-respecting rule works downstream.
ACCEL_MPS2 = 2.6
BRAKE_MPS2 = 4.5

# Speeds below this round to zero to avoid asymptotic crawling at obstacles.
_STOP_EPS_MPS = 0.05


@dataclass(frozen=True)
class RoadConfig:
    """Straight road with one traffic light; lengths in meters, times in seconds."""

    length_m: float = 1000.0
    lanes_per_direction: int = 2
    light_position_m: float = 500.0
    light_cycle: tuple[float, float] = (30.0, 30.0)  # (green_s, red_s)
    time_step_s: float = 1.0

    def __post_init__(self):
        if self.length_m <= 0:
            raise ValueError("length_m must be positive")
        if not 0 <= self.light_position_m <= self.length_m:
            raise ValueError("light_position_m must lie on the road")
        if self.time_step_s <= 0:
            raise ValueError("time_step_s must be positive")
        if self.lanes_per_direction < 1:
            raise ValueError("need at least one lane per direction")

    def light_is_green(self, time_s: float) -> bool:
        green, red = self.light_cycle
        if green <= 0:
            return False
        if red <= 0:
            return True
        return (time_s % (green + red)) < green


@dataclass(frozen=True)
class VehicleParams:
    length_m: float = 5.0
    width_m: float = 1.8
    max_speed_mps: float = 55.56
    min_gap_m: float = 2.5
    spawn_mean_interval_s: float = 2.5

    def __post_init__(self):
        for name in ("length_m", "width_m", "max_speed_mps", "min_gap_m",
                     "spawn_mean_interval_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class VehiclePose:
    """One vehicle at one time step. x runs along the road, y across it."""

    vehicle_id: str
    x: float
    y: float
    speed_mps: float
    lane: int
    direction: int  # +1 travels toward increasing x, -1 the opposite


@dataclass
class _Vehicle:
    vehicle_id: str
    s: float  # front-bumper distance from this vehicle's own entry
    speed: float
    lane: int
    direction: int


@dataclass
class SimState:
    road: RoadConfig
    params: VehicleParams
    time_s: float = 0.0
    vehicles: list[_Vehicle] = field(default_factory=list)
    next_arrival_s: dict[int, float] = field(default_factory=dict)
    pending_spawns: dict[int, int] = field(default_factory=dict)
    spawned_total: int = 0
    exited_total: int = 0
    _id_counter: int = 0

    def __post_init__(self):
        for direction in (+1, -1):
            self.next_arrival_s.setdefault(direction, 0.0)
            self.pending_spawns.setdefault(direction, 0)

    def poses(self) -> list[VehiclePose]:
        return [self._pose(v) for v in self.vehicles]

    def _pose(self, v: _Vehicle) -> VehiclePose:
        x = v.s if v.direction > 0 else self.road.length_m - v.s
        y = v.direction * (v.lane + 0.5) * LANE_WIDTH_M
        return VehiclePose(v.vehicle_id, x, y, v.speed, v.lane, v.direction)


def new_state(road: RoadConfig, params: VehicleParams, rng) -> SimState:
    """Fresh state with the first arrival time of each direction drawn from rng."""
    state = SimState(road=road, params=params)
    rng = as_rng(rng)
    for direction in (+1, -1):
        state.next_arrival_s[direction] = _draw_interval(rng, params)
    return state


def _draw_interval(rng: np.random.Generator, params: VehicleParams) -> float:
    if math.isinf(params.spawn_mean_interval_s):
        return math.inf
    return float(rng.exponential(params.spawn_mean_interval_s))


def _safe_speed(headroom_m: float, dt: float) -> float:
    """Largest speed from which stopping at decel BRAKE_MPS2 stays within headroom."""
    if headroom_m <= 0:
        return 0.0
    bdt = BRAKE_MPS2 * dt
    return -bdt + math.sqrt(bdt * bdt + 2.0 * BRAKE_MPS2 * headroom_m)


def _leader_of(state: SimState, v: _Vehicle) -> _Vehicle | None:
    leader = None
    for other in state.vehicles:
        if other is v or other.lane != v.lane or other.direction != v.direction:
            continue
        if other.s > v.s and (leader is None or other.s < leader.s):
            leader = other
    return leader


def _entry_clear(state: SimState, lane: int, direction: int) -> bool:
    front_new = state.params.length_m  # spawn with the whole body on the road
    for other in state.vehicles:
        if other.lane != lane or other.direction != direction:
            continue
        rear = other.s - state.params.length_m
        if rear - front_new < state.params.min_gap_m:
            return False
    return True


def spawn_vehicles(state: SimState, rng) -> SimState:
    """Admit due arrivals at the road entries; blocked spawns defer, never fail."""
    rng = as_rng(rng)
    params = state.params
    for direction in (+1, -1):
        while state.next_arrival_s[direction] <= state.time_s:
            state.pending_spawns[direction] += 1
            state.next_arrival_s[direction] += _draw_interval(rng, params)
        while state.pending_spawns[direction] > 0:
            lanes = [ln for ln in range(state.road.lanes_per_direction)
                     if _entry_clear(state, ln, direction)]
            if not lanes:
                break  # deferred to the next step
            lane = int(lanes[rng.integers(len(lanes))]) if len(lanes) > 1 else lanes[0]
            vid = f"veh{state._id_counter}"
            state._id_counter += 1
            veh = _Vehicle(vid, s=params.length_m, speed=0.0, lane=lane,
                           direction=direction)
            state.vehicles.append(veh)
            veh.speed = _target_speed(state, veh, _leader_of(state, veh))
            state.pending_spawns[direction] -= 1
            state.spawned_total += 1
    return state


def _light_s(state: SimState, direction: int) -> float:
    if direction > 0:
        return state.road.light_position_m
    return state.road.length_m - state.road.light_position_m


def _target_speed(state: SimState, v: _Vehicle,
                  leader: _Vehicle | None) -> float:
    road, params = state.road, state.params
    dt = road.time_step_s
    speed = min(v.speed + ACCEL_MPS2 * dt, params.max_speed_mps)
    if leader is not None:
        gap = (leader.s - params.length_m) - v.s
        speed = min(speed, _safe_speed(gap - params.min_gap_m, dt))
    if not road.light_is_green(state.time_s):
        stop_s = _light_s(state, v.direction)
        if v.s < stop_s:
            speed = min(speed, _safe_speed(stop_s - v.s, dt))
    speed = max(speed, 0.0)
    return 0.0 if speed < _STOP_EPS_MPS else speed


def step_simulation(state: SimState, road: RoadConfig, params: VehicleParams) -> SimState:
    """Advance every vehicle one time step against the previous step's positions."""
    dt = road.time_step_s
    lanes: dict[tuple[int, int], list[_Vehicle]] = {}
    for v in state.vehicles:
        lanes.setdefault((v.lane, v.direction), []).append(v)
    targets: dict[str, float] = {}
    for group in lanes.values():
        group.sort(key=lambda v: v.s)
        for v, leader in zip(group, group[1:] + [None]):
            targets[v.vehicle_id] = _target_speed(state, v, leader)
    survivors = []
    for v in state.vehicles:
        v.speed = targets[v.vehicle_id]
        v.s += v.speed * dt
        if v.s > road.length_m:
            state.exited_total += 1
        else:
            survivors.append(v)
    state.vehicles = survivors
    state.time_s += dt
    return state


@dataclass(frozen=True)
class TrajectorySet:
    """Immutable record of (time, poses) frames at a fixed step."""

    frames: tuple[tuple[float, tuple[VehiclePose, ...]], ...]
    time_step_s: float

    def __len__(self) -> int:
        return len(self.frames)

    def validate(self, params: VehicleParams | None = None) -> None:
        """Check frame spacing and, when params are given, the bumper-gap rule."""
        prev_t = None
        for t, poses in self.frames:
            if prev_t is not None:
                if not math.isclose(t - prev_t, self.time_step_s, rel_tol=1e-9,
                                    abs_tol=1e-9):
                    raise ValueError(f"frame times not spaced by {self.time_step_s}: "
                                     f"{prev_t} -> {t}")
                if t <= prev_t:
                    raise ValueError("frame times must increase")
            prev_t = t
            if params is not None:
                _check_gaps(poses, params)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "vehicle_id", "x", "y", "speed", "lane", "direction"])
        for t, poses in self.frames:
            for p in poses:
                writer.writerow([f"{t:g}", p.vehicle_id, f"{p.x:.6f}", f"{p.y:.6f}",
                                 f"{p.speed_mps:.6f}", p.lane, p.direction])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def _check_gaps(poses, params: VehicleParams) -> None:
    by_lane: dict[tuple[int, int], list[VehiclePose]] = {}
    for p in poses:
        by_lane.setdefault((p.lane, p.direction), []).append(p)
    for group in by_lane.values():
        group.sort(key=lambda p: p.x * p.direction)
        for follower, leader in zip(group, group[1:]):
            gap = abs(leader.x - follower.x) - params.length_m
            if gap < params.min_gap_m - 1e-9:
                raise ValueError(
                    f"gap violation between {follower.vehicle_id} and "
                    f"{leader.vehicle_id}: {gap:.3f} m")


def run_scenario(road: RoadConfig, params: VehicleParams, duration_s: float,
                 seed) -> TrajectorySet:
    """Simulate for duration_s and record one frame per time step (post-step)."""
    dt = road.time_step_s
    n_steps = round(duration_s / dt)
    if not math.isclose(n_steps * dt, duration_s, rel_tol=1e-9, abs_tol=1e-9):
        raise ValueError("duration_s must be a multiple of time_step_s")
    rng = as_rng(seed) if isinstance(seed, np.random.Generator) else derived_rng(seed, 0)
    state = new_state(road, params, rng)
    frames = []
    for _ in range(n_steps):
        spawn_vehicles(state, rng)
        step_simulation(state, road, params)
        frames.append((state.time_s, tuple(state.poses())))
    return TrajectorySet(frames=tuple(frames), time_step_s=dt)


# ---------------------------------------------------------------------------
# SUMO FCD ingestion

_REQUIRED_VEHICLE_ATTRS = ("id", "x", "y", "speed", "lane")


def _lane_index(lane_attr: str) -> int:
    # SUMO lane ids look like "edgeid_0"; keep the trailing index when present.
    tail = lane_attr.rsplit("_", 1)[-1]
    try:
        return int(tail)
    except ValueError:
        return 0


def parse_fcd_trace(document: str) -> TrajectorySet:
    """Parse a SUMO fcd-export XML document into a TrajectorySet.

    Unknown attributes are ignored. Raises FcdParseError for malformed XML
    (with the offending line) and FcdSchemaError for schema violations.
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        line = exc.position[0] if exc.position else None
        raise FcdParseError(f"malformed FCD XML at line {line}: {exc}", line=line) from exc
    if root.tag != "fcd-export":
        raise FcdSchemaError(f"expected root element 'fcd-export', got '{root.tag}'")

    frames = []
    prev_time = None
    for ts in root:
        if ts.tag != "timestep":
            continue
        if "time" not in ts.attrib:
            raise FcdSchemaError("timestep element missing required attribute 'time'")
        t = float(ts.attrib["time"])
        if prev_time is not None and t <= prev_time:
            raise FcdSchemaError(
                f"timestep attribute non-monotonic: {t} after {prev_time}")
        prev_time = t
        poses = []
        for veh in ts:
            if veh.tag != "vehicle":
                continue
            for attr in _REQUIRED_VEHICLE_ATTRS:
                if attr not in veh.attrib:
                    raise FcdSchemaError(
                        f"vehicle element missing required attribute '{attr}'")
            poses.append(VehiclePose(
                vehicle_id=veh.attrib["id"],
                x=float(veh.attrib["x"]),
                y=float(veh.attrib["y"]),
                speed_mps=float(veh.attrib["speed"]),
                lane=_lane_index(veh.attrib["lane"]),
                direction=+1,
            ))
        frames.append((t, tuple(poses)))

    if len(frames) >= 2:
        step = frames[1][0] - frames[0][0]
        for (t0, _), (t1, _) in zip(frames, frames[1:]):
            if not math.isclose(t1 - t0, step, rel_tol=1e-9, abs_tol=1e-9):
                raise FcdSchemaError(
                    f"timestep spacing is not uniform: {t1 - t0} vs {step}")
    else:
        step = 1.0
    return TrajectorySet(frames=tuple(frames), time_step_s=float(step))


def parse_fcd_file(path) -> TrajectorySet:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_fcd_trace(fh.read())
