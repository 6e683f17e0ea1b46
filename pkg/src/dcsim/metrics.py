"""Run metrics: throughput and latency series, association trace, signalling
overhead, loss counters, conservation check and multi-run aggregation.

Latency is PDCP to PDCP: creation at the remote host to first delivery at the
UE. Duplicate copies count towards gross throughput only; drops are kept out
of latency statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .dataplane import PacketTable
from .kernels import DELIVERED, DROP_OVERFLOW, DROP_RETX, IN_FLIGHT


class ConservationError(AssertionError):
    """generated != delivered + dropped + in flight."""


@dataclass(frozen=True)
class CbrProfile:
    packet_size: int = 1024
    interarrival: int = 80

    @property
    def rate_bps(self) -> float:
        return self.packet_size * 8 * 1e6 / self.interarrival

    def count(self, horizon_us: int) -> int:
        if horizon_us <= 0:
            return 0
        return -(-int(horizon_us) // self.interarrival)


def generate_traffic(profile: CbrProfile, horizon_us: int) -> np.ndarray:
    """Creation times of the CBR packets, sn = index."""
    return np.arange(profile.count(horizon_us), dtype=np.int64) * profile.interarrival


@dataclass
class WindowedSeries:
    window: int
    starts: np.ndarray
    values: np.ndarray

    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.starts.tolist(), self.values.tolist()))


@dataclass
class LossCounters:
    generated: int = 0
    delivered: int = 0
    duplicates: int = 0
    dropped_overflow: int = 0
    dropped_retx: int = 0
    in_flight: int = 0

    @property
    def dropped(self) -> int:
        return self.dropped_overflow + self.dropped_retx


@dataclass
class RunMetrics:
    horizon_us: int
    gross_pdcp_throughput: float  # bit/s
    net_goodput: float  # bit/s
    mean_latency: float  # s
    max_latency: float  # s
    throughput_series: WindowedSeries
    latency_series: WindowedSeries  # windowed mean, s
    latency_max_series: WindowedSeries
    association_trace: list[tuple[int, int]]
    rrc_air_bytes_per_s: float
    signaling_bytes: dict[str, int]
    loss: LossCounters
    handovers: int = 0
    rlf: int = 0
    switches: int = 0
    outage_events: int = 0
    blocked_us: int = 0
    valid: bool = True

    @property
    def max_window_latency(self) -> float:
        v = self.latency_series.values
        v = v[~np.isnan(v)]
        return float(v.max()) if len(v) else math.nan

    @property
    def median_window_latency(self) -> float:
        v = self.latency_series.values
        v = v[~np.isnan(v)]
        return float(np.median(v)) if len(v) else math.nan

    def summary(self) -> dict[str, float]:
        return {
            "horizon_s": self.horizon_us / 1e6,
            "gross_pdcp_throughput_mbps": self.gross_pdcp_throughput / 1e6,
            "net_goodput_mbps": self.net_goodput / 1e6,
            "mean_latency_ms": self.mean_latency * 1e3,
            "max_latency_ms": self.max_latency * 1e3,
            "max_window_latency_ms": self.max_window_latency * 1e3,
            "median_window_latency_ms": self.median_window_latency * 1e3,
            "rrc_air_bytes_per_s": self.rrc_air_bytes_per_s,
            "x2_signaling_bytes": self.signaling_bytes.get("X2", 0),
            "s1_mme_signaling_bytes": self.signaling_bytes.get("S1_MME", 0),
            "generated": self.loss.generated,
            "delivered": self.loss.delivered,
            "duplicates": self.loss.duplicates,
            "dropped_overflow": self.loss.dropped_overflow,
            "dropped_retx": self.loss.dropped_retx,
            "in_flight": self.loss.in_flight,
            "handovers": self.handovers,
            "rlf": self.rlf,
            "switches": self.switches,
            "outage_events": self.outage_events,
            "data_blocked_ms": self.blocked_us / 1e3,
        }


def record_delivery(packets: PacketTable, sn: int, time_us: int) -> bool:
    """Mark ``sn`` delivered at ``time_us``; a repeat delivery is logged as a duplicate."""
    if packets.status[sn] == DELIVERED:
        packets.dup_times.append(int(time_us))
        return False
    packets.status[sn] = DELIVERED
    packets.delivered[sn] = time_us
    return True


def windowed(times: np.ndarray, values: np.ndarray, window: int, horizon: int):
    n = max(1, -(-horizon // window))
    sums, counts, maxs = kernels.window_stats(np.ascontiguousarray(times, dtype=np.int64),
                                              np.ascontiguousarray(values, dtype=np.float64), window, n)
    starts = np.arange(n, dtype=np.int64) * window
    return starts, np.asarray(sums), np.asarray(counts), np.asarray(maxs)


def association_segments(changes: Sequence[tuple[int, int]], horizon: int) -> list[tuple[int, int, int]]:
    """(start, end, cell) segments tiling [0, horizon]."""
    pts = [(t, c) for t, c in changes if t <= horizon]
    out = []
    for i, (t, c) in enumerate(pts):
        end = pts[i + 1][0] if i + 1 < len(pts) else horizon
        if end > t or (not out and end == t):
            out.append((t, end, c))
    return out


def check_conservation(packets: PacketTable, in_system: np.ndarray, horizon: int) -> LossCounters:
    status = packets.status
    delivered_mask = (status == DELIVERED) & (packets.delivered <= horizon)
    late = (status == DELIVERED) & (packets.delivered > horizon)
    flight = np.zeros(packets.n, dtype=bool)
    flight[in_system] = True
    flight |= late
    loss = LossCounters(
        generated=packets.n,
        delivered=int(delivered_mask.sum()),
        duplicates=sum(1 for t in packets.dup_times if t <= horizon),
        dropped_overflow=int((status == DROP_OVERFLOW).sum()),
        dropped_retx=int((status == DROP_RETX).sum()),
        in_flight=int(flight.sum()),
    )
    lost = (status == IN_FLIGHT) & ~flight
    if loss.delivered + loss.dropped + loss.in_flight != loss.generated or lost.any():
        raise ConservationError(
            f"generated {loss.generated} != delivered {loss.delivered} + dropped {loss.dropped}"
            f" + in flight {loss.in_flight}; {int(lost.sum())} packets unaccounted for")
    return loss


def finalize_run(packets: PacketTable, in_system: np.ndarray, horizon: int, window: int,
                 association: Sequence[tuple[int, int]], air_bytes: int, signaling_bytes: dict[str, int],
                 strict: bool = True, **counts) -> RunMetrics:
    try:
        loss = check_conservation(packets, in_system, horizon)
        valid = True
    except ConservationError:
        if strict:
            raise
        loss, valid = LossCounters(generated=packets.n), False
    secs = horizon / 1e6
    bits = packets.size * 8
    ok = (packets.status == DELIVERED) & (packets.delivered <= horizon)
    sns = np.nonzero(ok)[0]
    t_del = packets.delivered[sns]
    lat_s = (t_del - sns * packets.interval) / 1e6
    dups = np.array([t for t in packets.dup_times if t <= horizon], dtype=np.int64)

    all_t = np.concatenate([t_del, dups])
    starts, sums, _, _ = windowed(all_t, np.full(len(all_t), float(bits)), window, horizon)
    widths = np.minimum(starts + window, horizon) - starts
    thr = sums / (widths / 1e6)
    _, lsum, lcnt, lmax = windowed(t_del, lat_s, window, horizon)
    with np.errstate(invalid="ignore", divide="ignore"):
        lmean = np.where(lcnt > 0, lsum / np.maximum(lcnt, 1), np.nan)
    lmax = np.where(lcnt > 0, lmax, np.nan)

    gross = (len(sns) + len(dups)) * bits / secs if secs > 0 else 0.0
    net = len(sns) * bits / secs if secs > 0 else 0.0
    return RunMetrics(
        horizon_us=horizon,
        gross_pdcp_throughput=gross,
        net_goodput=net,
        mean_latency=float(lat_s.mean()) if len(lat_s) else math.nan,
        max_latency=float(lat_s.max()) if len(lat_s) else math.nan,
        throughput_series=WindowedSeries(window, starts, thr),
        latency_series=WindowedSeries(window, starts, lmean),
        latency_max_series=WindowedSeries(window, starts, lmax),
        association_trace=[(s, c) for s, _, c in association_segments(association, horizon)],
        rrc_air_bytes_per_s=air_bytes / secs if secs > 0 else 0.0,
        signaling_bytes=dict(signaling_bytes),
        loss=loss,
        valid=valid,
        **counts,
    )


# --------------------------------------------------------------------------- aggregation

@dataclass
class AggregateMetrics:
    n: int
    mean: dict[str, float] = field(default_factory=dict)
    std: dict[str, float] = field(default_factory=dict)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("metric,mean,stddev,n\n")
            for k in self.mean:
                fh.write(f"{k},{_fmt(self.mean[k])},{_fmt(self.std[k])},{self.n}\n")


class AggregationError(ValueError):
    pass


def aggregate(runs: Sequence[RunMetrics], keys: Sequence | None = None) -> AggregateMetrics:
    """Mean and sample standard deviation of every summary field.

    ``keys`` are the runs' comparable configuration keys; all must agree.
    """
    if not runs:
        raise AggregationError("no runs to aggregate")
    if keys is not None and len(set(keys)) > 1:
        raise AggregationError("runs differ in configuration other than the seed")
    bad = [i for i, r in enumerate(runs) if not r.valid]
    if bad:
        raise AggregationError(f"invalid runs {bad}")
    rows = [r.summary() for r in runs]
    agg = AggregateMetrics(len(runs))
    for k in rows[0]:
        v = np.array([row[k] for row in rows], dtype=float)
        agg.mean[k] = float(v.mean())
        agg.std[k] = float(v.std(ddof=1)) if len(v) > 1 else 0.0
    return agg


# --------------------------------------------------------------------------- CSV output

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return repr(round(v, 9))


def write_series_csvs(m: RunMetrics, outdir) -> None:
    with open(outdir / "throughput_series.csv", "w", encoding="utf-8") as fh:
        fh.write("window_start_us,mbit_per_s\n")
        for s, v in m.throughput_series.pairs():
            fh.write(f"{s},{_fmt(v / 1e6)}\n")
    with open(outdir / "latency_series.csv", "w", encoding="utf-8") as fh:
        fh.write("window_start_us,mean_ms,max_ms\n")
        for (s, mean), (_, mx) in zip(m.latency_series.pairs(), m.latency_max_series.pairs()):
            fh.write(f"{s},{_fmt(mean * 1e3)},{_fmt(mx * 1e3)}\n")
    with open(outdir / "association.csv", "w", encoding="utf-8") as fh:
        fh.write("time_us,serving_cell_id\n")
        for t, c in m.association_trace:
            fh.write(f"{t},{c}\n")
    secs = m.horizon_us / 1e6
    with open(outdir / "rrc_traffic.csv", "w", encoding="utf-8") as fh:
        fh.write("path,bytes,bytes_per_s\n")
        for path, b in m.signaling_bytes.items():
            fh.write(f"{path},{b},{_fmt(b / secs)}\n")
        air = m.signaling_bytes.get("AIR_LTE", 0) + m.signaling_bytes.get("AIR_MMWAVE", 0)
        fh.write(f"AIR_TOTAL,{air},{_fmt(air / secs)}\n")
    with open(outdir / "summary.csv", "w", encoding="utf-8") as fh:
        fh.write("metric,value\n")
        for k, v in m.summary().items():
            fh.write(f"{k},{_fmt(v)}\n")


def write_packet_log(packets: PacketTable, lte_id: int, horizon: int, path) -> None:
    names = PacketTable.DROP_REASONS
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("sn,created_us,delivered_us,leg,retx_count\n")
        for sn in range(packets.n):
            row = packets.row(sn, lte_id)
            st = int(packets.status[sn])
            if st in names:
                d = names[st]
            elif row.delivered is not None and row.delivered <= horizon:
                d = str(row.delivered)
            else:
                d = ""
            fh.write(f"{sn},{row.created},{d},{row.leg or ''},{row.retx_count}\n")


