"""Simulation parameters, sweep specification and config-file loading.

Times are integer microseconds, sizes are bytes, SNR quantities are dB.
Config files use the same names as the ``SimulationParams`` fields.
"""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields
from typing import Any, Mapping

from .textconf import ConfigError, parse_file

MESSAGE_KINDS = ("MEAS_REPORT", "SWITCH_CMD", "SWITCH_ACK", "HO_REQUEST", "HO_ACK", "RRC_RECONF",
                 "RACH_MSG", "PATH_SWITCH_REQ", "PATH_SWITCH_ACK")

DEFAULT_MESSAGE_SIZES = {
    "MEAS_REPORT": 32,
    "SWITCH_CMD": 16,
    "SWITCH_ACK": 16,
    "HO_REQUEST": 64,
    "HO_ACK": 64,
    "RRC_RECONF": 128,
    "RACH_MSG": 20,
    "PATH_SWITCH_REQ": 64,
    "PATH_SWITCH_ACK": 64,
}

MODES = ("dc", "hh")
FLUSH_POLICIES = ("reroute", "drain")


@dataclass(frozen=True)
class SimulationParams:
    mode: str = "dc"
    outage_threshold: float = -5.0
    hysteresis: float = 3.0
    recovery_margin: float = 2.0
    d_x2: int = 1_000
    s1_mme_latency: int = 10_000
    s1_u_latency: int = 1_000
    b_rlc: int = 10_000_000
    max_retx: int = 3
    udp_size: int = 1024
    udp_interval: int = 80
    ue_speed: float = 2.0
    n_runs: int = 10
    master_seed: int = 1
    report_period: int = 5_000
    sample_period: int = 5_000
    epoch: int = 1_000
    window: int = 100_000
    duration: int | None = None
    scenario_path: str | None = None
    eta: float = 0.65
    sched_delay: int = 1_000
    rach_window_ms: float = 5.0
    rach_proc_ms: float = 3.0
    rrc_max_attempts: int = 5
    flush_policy: str = "reroute"
    bler_enabled: bool = True
    shadow_sigma_los: float = 4.0
    shadow_sigma_nlos: float = 7.0
    shadow_decorrelation: float = 10.0
    msg_sizes: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_MESSAGE_SIZES))

    def __post_init__(self):
        object.__setattr__(self, "mode", str(self.mode).lower())
        object.__setattr__(self, "flush_policy", str(self.flush_policy).lower())
        sizes = dict(DEFAULT_MESSAGE_SIZES)
        sizes.update(self.msg_sizes)
        object.__setattr__(self, "msg_sizes", sizes)
        validate(self)

    def replace(self, **changes) -> "SimulationParams":
        return dataclasses.replace(self, **changes)

    @property
    def offered_rate_bps(self) -> float:
        return self.udp_size * 8 * 1e6 / self.udp_interval

    def comparable_key(self) -> tuple:
        """Everything except the seed; runs aggregated together must agree on it."""
        d = dataclasses.asdict(self)
        d.pop("master_seed")
        d["msg_sizes"] = tuple(sorted(d["msg_sizes"].items()))
        return tuple(sorted(d.items()))


def _fail(key: str, msg: str):
    raise ConfigError(f"invalid value for {key!r}: {msg}")


def validate(p: SimulationParams) -> None:
    if p.mode not in MODES:
        _fail("mode", f"must be one of {MODES}, got {p.mode!r}")
    if p.flush_policy not in FLUSH_POLICIES:
        _fail("flush_policy", f"must be one of {FLUSH_POLICIES}, got {p.flush_policy!r}")
    for key in ("d_x2", "s1_mme_latency", "s1_u_latency", "sched_delay"):
        if getattr(p, key) < 0:
            _fail(key, "latencies must be >= 0")
    for key in ("udp_interval", "report_period", "sample_period", "epoch", "window", "udp_size"):
        if getattr(p, key) <= 0:
            _fail(key, "must be > 0")
    if p.b_rlc <= p.udp_size:
        _fail("b_rlc", f"must exceed udp_size ({p.udp_size} B), got {p.b_rlc}")
    if p.hysteresis < 0:
        _fail("hysteresis", "must be >= 0")
    if p.recovery_margin < 0:
        _fail("recovery_margin", "must be >= 0")
    if not p.ue_speed > 0:
        _fail("ue_speed", "must be > 0")
    if p.n_runs < 1:
        _fail("n_runs", "must be >= 1")
    if p.max_retx < 0:
        _fail("max_retx", "must be >= 0")
    if p.rrc_max_attempts < 1:
        _fail("rrc_max_attempts", "must be >= 1")
    if not 0 < p.eta <= 1:
        _fail("eta", "must lie in (0, 1]")
    if p.rach_window_ms < 0 or p.rach_proc_ms < 0:
        _fail("rach_window_ms", "RACH timings must be >= 0")
    if p.duration is not None and p.duration <= 0:
        _fail("duration", "must be > 0")
    if min(p.shadow_sigma_los, p.shadow_sigma_nlos, p.shadow_decorrelation) < 0:
        _fail("shadow_sigma_los", "shadowing parameters must be >= 0")
    if p.master_seed < 0 or p.master_seed >= 2**64:
        _fail("master_seed", "must be an unsigned 64-bit integer")
    unknown = set(p.msg_sizes) - set(MESSAGE_KINDS)
    if unknown:
        _fail("msg_sizes", f"unknown message kinds {sorted(unknown)}")
    for kind, size in p.msg_sizes.items():
        if int(size) <= 0:
            _fail(f"msg_size_{kind.lower()}", "message sizes must be > 0")


@dataclass(frozen=True)
class SweepSpec:
    d_x2_values: tuple[int, ...] = (100, 1_000, 10_000)
    speed_values: tuple[float, ...] = (2.0, 4.0, 8.0, 16.0)

    def __post_init__(self):
        if not self.d_x2_values:
            _fail("sweep_x2", "list must not be empty")
        if not self.speed_values:
            _fail("sweep_speed", "list must not be empty")
        if any(v < 0 for v in self.d_x2_values):
            _fail("sweep_x2", "latencies must be >= 0")
        if any(not v > 0 for v in self.speed_values):
            _fail("sweep_speed", "speeds must be > 0")

    def points(self):
        for d in self.d_x2_values:
            for s in self.speed_values:
                yield d, s


# --------------------------------------------------------------------------- loading

_FIELD_TYPES = {f.name: f.type for f in fields(SimulationParams)}


def _convert(key: str, raw: Any) -> Any:
    if key.startswith("msg_size_"):
        kind = key[len("msg_size_"):].upper()
        if kind not in MESSAGE_KINDS:
            raise ConfigError(f"unknown key {key!r}")
        try:
            return int(raw)
        except (TypeError, ValueError):
            _fail(key, f"expected an integer, got {raw!r}")
    if key not in _FIELD_TYPES or key == "msg_sizes":
        raise ConfigError(f"unknown key {key!r}")
    typ = _FIELD_TYPES[key]
    if raw is None:
        return None
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if typ == "int":
            return int(float(text)) if "." in text or "e" in text.lower() else int(text)
        if typ == "int | None":
            return None if text.lower() in ("", "none") else int(text)
        if typ == "float":
            return float(text)
        if typ == "bool":
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if typ == "str | None":
            return None if text.lower() in ("", "none") else text
        return text
    except ValueError:
        _fail(key, f"cannot parse {raw!r} as {typ}")


def params_from_mapping(values: Mapping[str, Any], base: SimulationParams | None = None) -> SimulationParams:
    kwargs: dict[str, Any] = {}
    sizes: dict[str, int] = dict((base or SimulationParams()).msg_sizes)
    for key, raw in values.items():
        value = _convert(key, raw)
        if key.startswith("msg_size_"):
            sizes[key[len("msg_size_"):].upper()] = value
        else:
            kwargs[key] = value
    kwargs["msg_sizes"] = sizes
    if base is None:
        return SimulationParams(**kwargs)
    return dataclasses.replace(base, **kwargs)


def load_config(path=None, overrides: Mapping[str, Any] | None = None) -> SimulationParams:
    """File values first, then ``overrides`` (command-line flags) on top."""
    values: dict[str, Any] = {}
    if path is not None:
        parsed = parse_file(path)
        if parsed.blocks:
            raise ConfigError(f"{path}: scenario blocks belong in the scenario file (scenario_path)")
        values.update(parsed.values)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return params_from_mapping(values)


def run_seed(master_seed: int, run_index: int) -> int:
    """Per-run seed: first 8 bytes (little endian) of BLAKE2b("<master>:<index>")."""
    digest = hashlib.blake2b(f"{int(master_seed)}:{int(run_index)}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")
