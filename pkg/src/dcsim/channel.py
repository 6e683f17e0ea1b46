"""Scenario geometry and the radio channel: LOS/NLOS pathloss, spatially
correlated log-normal shadowing and per-link SNR sampled along the UE path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .engine import RngStream
from .textconf import ConfigError, ParsedText, parse_file, parse_text

THERMAL_NOISE_DBM_HZ = -174.0


class EnbKind(str, Enum):
    LTE = "LTE"
    MMWAVE = "MMWAVE"


class Position(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Building:
    min_corner: Position
    max_corner: Position

    def __post_init__(self):
        if not (self.min_corner.x < self.max_corner.x and self.min_corner.y < self.max_corner.y):
            raise ConfigError(f"building corners must satisfy min < max componentwise: {self}")

    def contains(self, p: Position) -> bool:
        """Strict interior test."""
        return self.min_corner.x < p.x < self.max_corner.x and self.min_corner.y < p.y < self.max_corner.y


_KIND_DEFAULTS = {
    EnbKind.LTE: dict(tx_power=30.0, carrier=2.1e9, bandwidth=20e6, noise_figure=9.0, antenna_gain=0.0),
    EnbKind.MMWAVE: dict(tx_power=30.0, carrier=28e9, bandwidth=1e9, noise_figure=5.0, antenna_gain=25.0),
}


@dataclass(frozen=True)
class EnbConfig:
    id: int
    kind: EnbKind
    position: Position
    tx_power: float  # dBm
    carrier: float  # Hz
    bandwidth: float  # Hz
    noise_figure: float  # dB
    antenna_gain: float  # dB

    @classmethod
    def with_defaults(cls, id: int, kind: EnbKind | str, position: Position, **overrides) -> "EnbConfig":
        kind = EnbKind(kind)
        values = dict(_KIND_DEFAULTS[kind])
        values.update(overrides)
        return cls(id=id, kind=kind, position=Position(*position), **values)

    @property
    def is_mmwave(self) -> bool:
        return self.kind is EnbKind.MMWAVE


@dataclass(frozen=True)
class UePath:
    start: Position
    end: Position
    speed: float  # m/s

    def __post_init__(self):
        if not self.speed > 0:
            raise ConfigError(f"ue_path speed must be > 0, got {self.speed}")
        if self.start == self.end:
            raise ConfigError("ue_path start and end must differ")

    @property
    def length(self) -> float:
        return math.hypot(self.end.x - self.start.x, self.end.y - self.start.y)

    @property
    def duration_us(self) -> int:
        return int(round(self.length / self.speed * 1e6))

    def position_at(self, t_us: int) -> Position:
        """Constant-velocity motion; the UE stops at ``end``."""
        frac = min(t_us * 1e-6 * self.speed / self.length, 1.0)
        return Position(self.start.x + frac * (self.end.x - self.start.x),
                        self.start.y + frac * (self.end.y - self.start.y))

    def positions(self, times_us: np.ndarray) -> np.ndarray:
        frac = np.minimum(np.asarray(times_us, dtype=float) * 1e-6 * self.speed / self.length, 1.0)
        xs = self.start.x + frac * (self.end.x - self.start.x)
        ys = self.start.y + frac * (self.end.y - self.start.y)
        return np.column_stack([xs, ys])


@dataclass(frozen=True)
class Scenario:
    enbs: tuple[EnbConfig, ...]
    buildings: tuple[Building, ...]
    path: UePath

    def __post_init__(self):
        ids = [e.id for e in self.enbs]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate eNB ids: {ids}")
        n_lte = sum(1 for e in self.enbs if e.kind is EnbKind.LTE)
        if n_lte != 1:
            raise ConfigError(f"scenario needs exactly one LTE eNB, found {n_lte}")
        for b in self.buildings:
            for e in self.enbs:
                if b.contains(e.position):
                    raise ConfigError(f"eNB {e.id} lies inside building {b}")
            if b.contains(self.path.start) or b.contains(self.path.end) or not is_los_segment(
                    self.path.start, self.path.end, (b,)):
                raise ConfigError(f"UE path crosses building {b}")

    @property
    def lte(self) -> EnbConfig:
        return next(e for e in self.enbs if e.kind is EnbKind.LTE)

    @property
    def mmwave(self) -> tuple[EnbConfig, ...]:
        return tuple(e for e in self.enbs if e.is_mmwave)

    def enb(self, enb_id: int) -> EnbConfig:
        for e in self.enbs:
            if e.id == enb_id:
                return e
        raise KeyError(enb_id)

    def with_speed(self, speed: float) -> "Scenario":
        return Scenario(self.enbs, self.buildings, UePath(self.path.start, self.path.end, speed))


# --------------------------------------------------------------------------- geometry

def _clip_interval(ax, ay, dx, dy, b: Building) -> tuple[float, float] | None:
    """Liang-Barsky: parameter interval of segment a + t*d inside the closed rectangle."""
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, ax - b.min_corner.x), (dx, b.max_corner.x - ax),
                 (-dy, ay - b.min_corner.y), (dy, b.max_corner.y - ay)):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        r = q / p
        if p < 0.0:
            if r > t1:
                return None
            t0 = max(t0, r)
        else:
            if r < t0:
                return None
            t1 = min(t1, r)
    return t0, t1


def is_los_segment(a: Position, b: Position, buildings: Sequence[Building]) -> bool:
    """True iff segment a-b meets no building interior.

    The clipped chord of a convex rectangle contains an interior point iff its
    midpoint is interior, so grazing an edge or a corner stays LOS.
    """
    if tuple(b) < tuple(a):
        # fixed orientation keeps rounding, and so the result, symmetric
        a, b = b, a
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    for bld in buildings:
        iv = _clip_interval(ax, ay, dx, dy, bld)
        if iv is None or iv[0] >= iv[1]:
            continue
        tm = 0.5 * (iv[0] + iv[1])
        if bld.contains(Position(ax + tm * dx, ay + tm * dy)):
            return False
    return True


def is_los(scenario: Scenario, a: Position, b: Position) -> bool:
    return is_los_segment(a, b, scenario.buildings)


# --------------------------------------------------------------------------- propagation

def pathloss_db(kind: EnbKind | str, los: bool, distance: float) -> float:
    d = max(float(distance), 1.0)
    if EnbKind(kind) is EnbKind.MMWAVE:
        if los:
            return 61.4 + 20.0 * math.log10(d)
        return 72.0 + 29.2 * math.log10(d)
    return 128.1 + 37.6 * math.log10(d / 1000.0)


def pathloss_db_array(kind: EnbKind, los: np.ndarray, distance: np.ndarray) -> np.ndarray:
    d = np.maximum(np.asarray(distance, dtype=float), 1.0)
    if kind is EnbKind.MMWAVE:
        return np.where(los, 61.4 + 20.0 * np.log10(d), 72.0 + 29.2 * np.log10(d))
    return 128.1 + 37.6 * np.log10(d / 1000.0)


def noise_floor_dbm(bandwidth: float, noise_figure: float) -> float:
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bandwidth) + noise_figure


def snr_db(enb: EnbConfig, ue_position: Position, shadow: float, los: bool = True,
           pathloss: float | None = None) -> float:
    """Link SNR in dB. ``pathloss`` may be supplied to bypass the geometric model."""
    if pathloss is None:
        d = math.hypot(ue_position[0] - enb.position.x, ue_position[1] - enb.position.y)
        pathloss = pathloss_db(enb.kind, los, d)
    return enb.tx_power + enb.antenna_gain - pathloss - shadow - noise_floor_dbm(enb.bandwidth, enb.noise_figure)


@dataclass(frozen=True)
class ShadowingParams:
    sigma_los: float = 4.0
    sigma_nlos: float = 7.0
    decorrelation_m: float = 10.0


class ShadowingField:
    """Exponentially correlated Gaussian shadowing along the UE trajectory.

    Each link keeps a unit-variance AR(1) state advanced by the distance the UE
    moved since that link was last sampled, scaled by the LOS or NLOS sigma.
    Only the stream handed in is consumed (one normal per sample).
    """

    def __init__(self, params: ShadowingParams = ShadowingParams()):
        self.params = params
        self._state: dict[int, tuple[Position, float]] = {}

    def sigma(self, kind: EnbKind, los: bool) -> float:
        if kind is EnbKind.MMWAVE and not los:
            return self.params.sigma_nlos
        return self.params.sigma_los

    def sample(self, stream: RngStream, enb_id: int, ue_position: Position, sigma: float) -> float:
        z = stream.normal()
        prev = self._state.get(enb_id)
        if prev is None:
            u = z
        else:
            moved = math.hypot(ue_position[0] - prev[0][0], ue_position[1] - prev[0][1])
            rho = math.exp(-moved / self.params.decorrelation_m) if self.params.decorrelation_m > 0 else 0.0
            u = rho * prev[1] + math.sqrt(max(0.0, 1.0 - rho * rho)) * z
        self._state[enb_id] = (Position(*ue_position), u)
        return sigma * u


def shadowing_db(stream: RngStream, enb_id: int, ue_position: Position, field: ShadowingField,
                 sigma: float) -> float:
    return field.sample(stream, enb_id, ue_position, sigma)


# --------------------------------------------------------------------------- channel trace

class SnrSample(NamedTuple):
    time: int
    enb_id: int
    snr: float


@dataclass
class ChannelTrace:
    """SNR of every (eNB, UE) link on the sampling grid, precomputed for a run."""

    times: np.ndarray  # (n,) int64 us
    enb_ids: tuple[int, ...]
    snr: np.ndarray  # (n, n_enb) dB
    los: np.ndarray  # (n, n_enb) bool
    period_us: int

    def index_of(self, time_us: int) -> int:
        if time_us % self.period_us:
            raise ValueError(f"t={time_us} us is not on the {self.period_us} us sampling grid")
        return time_us // self.period_us

    def column(self, enb_id: int) -> int:
        return self.enb_ids.index(enb_id)

    def write_csv(self, path, upto_index: int | None = None) -> None:
        n = len(self.times) if upto_index is None else upto_index
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("time_us,enb_id,snr_db\n")
            for i in range(n):
                t = int(self.times[i])
                for j, eid in enumerate(self.enb_ids):
                    fh.write(f"{t},{eid},{self.snr[i, j]:.6f}\n")


class ChannelModel:
    """Builds the channel trace for a scenario from the "channel" stream only.

    The number and order of channel draws depend on the geometry and the
    sampling period alone: one normal per eNB per sample, eNBs in id order.
    """

    def __init__(self, scenario: Scenario, period_us: int, horizon_us: int, stream: RngStream,
                 shadowing: ShadowingParams = ShadowingParams()):
        self.scenario = scenario
        self.period_us = int(period_us)
        self.shadowing = shadowing
        self.samples: list[SnrSample] = []
        n = horizon_us // self.period_us + 1
        times = np.arange(n, dtype=np.int64) * self.period_us
        pos = scenario.path.positions(times)
        enbs = sorted(scenario.enbs, key=lambda e: e.id)
        z = np.array([stream.normal() for _ in range(n * len(enbs))]).reshape(n, len(enbs)) if enbs else np.zeros((n, 0))
        snr = np.empty((n, len(enbs)))
        los = np.empty((n, len(enbs)), dtype=bool)
        moved = np.diff(pos, axis=0)
        rho = np.ones(n)
        if shadowing.decorrelation_m > 0:
            rho[1:] = np.exp(-np.hypot(moved[:, 0], moved[:, 1]) / shadowing.decorrelation_m)
        else:
            rho[1:] = 0.0
        for j, enb in enumerate(enbs):
            los[:, j] = [is_los_segment(enb.position, Position(px, py), scenario.buildings) for px, py in pos]
            d = np.hypot(pos[:, 0] - enb.position.x, pos[:, 1] - enb.position.y)
            pl = pathloss_db_array(enb.kind, los[:, j], d)
            unit = kernels.ar1_filter(np.ascontiguousarray(z[:, j]), rho)
            if enb.is_mmwave:
                sigma = np.where(los[:, j], shadowing.sigma_los, shadowing.sigma_nlos)
            else:
                sigma = np.full(n, shadowing.sigma_los)
            shadow = sigma * unit
            floor = noise_floor_dbm(enb.bandwidth, enb.noise_figure)
            snr[:, j] = enb.tx_power + enb.antenna_gain - pl - shadow - floor
        self.trace = ChannelTrace(times, tuple(e.id for e in enbs), snr, los, self.period_us)

    def sample_channel(self, time_us: int) -> list[SnrSample]:
        i = self.trace.index_of(time_us)
        out = [SnrSample(time_us, eid, float(self.trace.snr[i, j])) for j, eid in enumerate(self.trace.enb_ids)]
        self.samples.extend(out)
        return out


def sample_channel(model: ChannelModel, time_us: int) -> list[SnrSample]:
    return model.sample_channel(time_us)


def outage_intervals(trace: ChannelTrace, mmwave_ids: Sequence[int], threshold_db: float) -> list[tuple[int, int]]:
    """Intervals during which every mmWave link is below ``threshold_db``."""
    if not mmwave_ids:
        return []
    cols = [trace.column(i) for i in mmwave_ids]
    all_out = np.all(trace.snr[:, cols] < threshold_db, axis=1)
    out = []
    start = None
    for i, flag in enumerate(all_out):
        if flag and start is None:
            start = int(trace.times[i])
        elif not flag and start is not None:
            out.append((start, int(trace.times[i])))
            start = None
    if start is not None:
        out.append((start, int(trace.times[-1]) + trace.period_us))
    return out


# --------------------------------------------------------------------------- scenario files

def _num(block: dict[str, str], key: str, where: str, default=None) -> float:
    if key not in block:
        if default is None:
            raise ConfigError(f"{where}: missing key {key!r}")
        return default
    try:
        return float(block[key])
    except ValueError:
        raise ConfigError(f"{where}: key {key!r} is not a number: {block[key]!r}") from None


_ENB_KEYS = {"id", "kind", "x", "y", "tx_power", "carrier", "bandwidth", "noise_figure", "antenna_gain"}
_BUILDING_KEYS = {"x_min", "y_min", "x_max", "y_max"}
_PATH_KEYS = {"start_x", "start_y", "end_x", "end_y", "speed"}


def scenario_from_parsed(parsed: ParsedText, default_speed: float = 2.0) -> Scenario:
    if parsed.values:
        raise ConfigError(f"scenario: unexpected top-level keys {sorted(parsed.values)}")
    enbs, buildings, path = [], [], None
    for name, block in parsed.blocks:
        if name == "enb":
            unknown = set(block) - _ENB_KEYS
            if unknown:
                raise ConfigError(f"enb block: unknown keys {sorted(unknown)}")
            where = f"enb {block.get('id', '?')}"
            kind = block.get("kind", "").upper()
            if kind not in ("LTE", "MMWAVE"):
                raise ConfigError(f"{where}: key 'kind' must be LTE or MMWAVE, got {block.get('kind')!r}")
            overrides = {k: _num(block, k, where) for k in _ENB_KEYS - {"id", "kind", "x", "y"} if k in block}
            enbs.append(EnbConfig.with_defaults(int(_num(block, "id", where)), kind,
                                                Position(_num(block, "x", where), _num(block, "y", where)),
                                                **overrides))
        elif name == "building":
            unknown = set(block) - _BUILDING_KEYS
            if unknown:
                raise ConfigError(f"building block: unknown keys {sorted(unknown)}")
            buildings.append(Building(Position(_num(block, "x_min", "building"), _num(block, "y_min", "building")),
                                      Position(_num(block, "x_max", "building"), _num(block, "y_max", "building"))))
        elif name == "ue_path":
            unknown = set(block) - _PATH_KEYS
            if unknown:
                raise ConfigError(f"ue_path block: unknown keys {sorted(unknown)}")
            if path is not None:
                raise ConfigError("scenario: more than one ue_path block")
            path = UePath(Position(_num(block, "start_x", "ue_path"), _num(block, "start_y", "ue_path")),
                          Position(_num(block, "end_x", "ue_path"), _num(block, "end_y", "ue_path")),
                          _num(block, "speed", "ue_path", default_speed))
        else:
            raise ConfigError(f"scenario: unknown block {name!r}")
    if path is None:
        raise ConfigError("scenario: missing ue_path block")
    return Scenario(tuple(enbs), tuple(buildings), path)


def load_scenario(path) -> Scenario:
    return scenario_from_parsed(parse_file(path))


def default_scenario_text() -> str:
    return resources.files("dcsim").joinpath("data/default_scenario.txt").read_text(encoding="utf-8")


def default_scenario() -> Scenario:
    return scenario_from_parsed(parse_text(default_scenario_text(), "default_scenario"))
