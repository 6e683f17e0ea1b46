"""User plane: PDCP anchor at the LTE eNB, per-cell RLC AM queues, X2/S1
backhaul and forwarding on route switches and handovers.

Packets are tracked in a column store indexed by sequence number so that the
per-epoch work can run in the compiled kernels. A packet is queued at most
once at a time; copies of packets that were still on the air when a route
changed are re-sent on the new leg and count as duplicate deliveries.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import kernels
from .kernels import DELIVERED, DROP_OVERFLOW, DROP_RETX, IN_FLIGHT
from .phy import LinkState


class LinkKind(str, Enum):
    X2 = "X2"
    S1_MME = "S1_MME"
    S1_U = "S1_U"


class FlushPolicy(str, Enum):
    REROUTE = "reroute"
    DRAIN = "drain"


@dataclass(frozen=True)
class BackhaulLink:
    """Point-to-point wired link. ``rate=None`` means serialization is ignored."""

    latency: int
    kind: LinkKind = LinkKind.X2
    rate: float | None = None
    mtu: int = 1500

    def __post_init__(self):
        if self.latency < 0:
            raise ValueError("backhaul latency must be >= 0")

    def fragments(self, size: int) -> int:
        return max(1, math.ceil(size / self.mtu))

    def delay(self, size: int) -> int:
        if self.rate is None:
            return self.latency
        return self.latency + math.ceil(size * 8 * 1e6 / self.rate)


class PdcpPacket(NamedTuple):
    """Row view of one packet in a ``PacketTable``."""

    sn: int
    size: int
    created: int
    delivered: int | None
    leg: str | None
    retx_count: int


class PacketTable:
    """Per-SN packet state for a constant-size CBR flow."""

    DROP_REASONS = {DROP_OVERFLOW: "DROP_OVERFLOW", DROP_RETX: "DROP_RETX"}

    def __init__(self, n: int, size: int, interval: int):
        self.n = int(n)
        self.size = int(size)
        self.interval = int(interval)
        self.delivered = np.full(self.n, -1, dtype=np.int64)
        self.status = np.zeros(self.n, dtype=np.int8)
        self.retx = np.zeros(self.n, dtype=np.int16)
        self.cell_of = np.full(self.n, -1, dtype=np.int8)
        self.x2_hops = np.zeros(self.n, dtype=np.int8)
        self.dup_times: list[int] = []

    def created(self, sn) -> np.ndarray | int:
        return sn * self.interval

    def row(self, sn: int, lte_id: int) -> PdcpPacket:
        d = int(self.delivered[sn])
        cell = int(self.cell_of[sn])
        leg = None if cell < 0 else ("LTE" if cell == lte_id else "MMWAVE")
        return PdcpPacket(sn, self.size, sn * self.interval, None if d < 0 else d, leg, int(self.retx[sn]))


class Arrivals(NamedTuple):
    sns: np.ndarray
    ready: np.ndarray


class RlcAmQueue:
    """RLC AM transmit buffer of one cell for the UE.

    ``inbound`` holds batches still travelling towards this eNB; they are
    admitted (tail drop against ``capacity``) when their arrival time is
    reached, in arrival order.
    """

    def __init__(self, cell_id: int, capacity: int, packet_size: int, max_retx: int, max_burst: int):
        self.cell_id = cell_id
        self.capacity = int(capacity)
        self.packet_size = int(packet_size)
        self.capacity_pkts = self.capacity // self.packet_size
        self.max_retx = int(max_retx)
        self.ring = np.zeros(self.capacity_pkts + 1, dtype=np.int64)
        self.qs = np.zeros(3, dtype=np.int64)  # head, count, credit bytes
        self.inbound: list[tuple[int, int, np.ndarray, np.ndarray]] = []
        self._in_seq = 0
        self.air_sns = np.zeros(max_burst, dtype=np.int64)
        self.air_done = np.zeros(max_burst, dtype=np.int64)
        self.air_new = np.zeros(max_burst, dtype=np.int8)
        self.air_len = 0
        self.forward_to: int | None = None
        self.peak_bytes = 0
        self.busy_until = 0  # air completion of the last burst

    @property
    def count(self) -> int:
        return int(self.qs[1])

    @property
    def bytes_queued(self) -> int:
        return int(self.qs[1]) * self.packet_size

    def queued_sns(self) -> np.ndarray:
        head, count = int(self.qs[0]), int(self.qs[1])
        idx = (head + np.arange(count)) % len(self.ring)
        return self.ring[idx]

    def clear(self) -> np.ndarray:
        sns = self.queued_sns()
        self.qs[:] = 0
        return sns

    def push_inbound(self, sns: np.ndarray, ready: np.ndarray) -> None:
        if len(sns):
            heapq.heappush(self.inbound, (int(ready[0]), self._in_seq, sns, ready))
            self._in_seq += 1

    def pop_arrived(self, now: int) -> Arrivals | None:
        inbound = self.inbound
        if not inbound or inbound[0][0] > now:
            return None
        parts = []
        while inbound and inbound[0][0] <= now:
            _, seq, sns, ready = heapq.heappop(inbound)
            cut = int(np.searchsorted(ready, now, side="right")) if ready[-1] > now else len(ready)
            parts.append((sns[:cut], ready[:cut], seq))
            if cut < len(ready):
                heapq.heappush(inbound, (int(ready[cut]), seq, sns[cut:], ready[cut:]))
        if len(parts) == 1:
            return Arrivals(parts[0][0], parts[0][1])
        sns = np.concatenate([p[0] for p in parts])
        ready = np.concatenate([p[1] for p in parts])
        order_key = np.concatenate([np.full(len(p[0]), p[2]) for p in parts])
        order = np.lexsort((order_key, ready))
        return Arrivals(sns[order], ready[order])

    def take_inbound(self) -> Arrivals:
        """Remove everything still in transit towards this cell."""
        if not self.inbound:
            return Arrivals(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
        items = sorted(self.inbound, key=lambda b: (b[0], b[1]))
        self.inbound = []
        return Arrivals(np.concatenate([b[2] for b in items]), np.concatenate([b[3] for b in items]))

    def in_air(self, now: int) -> np.ndarray:
        """SNs of the last burst whose transmission has not completed at ``now``."""
        if not self.air_len:
            return np.zeros(0, dtype=np.int64)
        done = self.air_done[: self.air_len]
        return self.air_sns[: self.air_len][done > now].copy()


def rlc_drain(queue: RlcAmQueue, link: LinkState, epoch_start: int, epoch_len: int, u: float,
              packets: PacketTable, sched_delay: int) -> tuple[int, int, int, int, int]:
    """Serve one scheduling epoch. Returns (sent, new, dup, dropped, discarded_copies)."""
    if link.rate <= 0.0:
        return 0, 0, 0, 0, 0
    budget = int(link.rate * epoch_len * 1e-6 / 8)
    # carried-over credit can stretch a burst past its epoch; the next one
    # queues behind it on the air instead of overtaking it
    start = max(epoch_start, queue.busy_until - sched_delay)
    res = kernels.rlc_serve(queue.ring, queue.qs, budget, queue.packet_size, u, link.bler, start,
                            link.rate, sched_delay, queue.max_retx, packets.delivered, packets.retx,
                            packets.status, packets.cell_of, queue.cell_id, queue.air_sns, queue.air_done,
                            queue.air_new)
    sent, new, dup = res[0], res[1], res[2]
    if sent:
        queue.air_len = sent
        queue.busy_until = int(queue.air_done[sent - 1])
        if dup:
            mask = queue.air_new[:sent] == 0
            packets.dup_times.extend(queue.air_done[:sent][mask].tolist())
    return res


@dataclass
class DataPlaneStats:
    reroutes: int = 0
    rerouted_packets: int = 0
    forwarded_packets: int = 0
    duplicate_copies: int = 0
    discarded_copies: int = 0


class DataPlane:
    """PDCP anchor, per-cell RLC queues and the downlink data path.

    ``route_cell`` is where the anchor currently sends new PDCP PDUs; only
    cells in ``active`` are scheduled on the air.
    """

    def __init__(self, cell_ids, lte_id: int, packets: PacketTable, *, b_rlc: int, max_retx: int,
                 x2: BackhaulLink, s1_u: BackhaulLink, epoch: int, sched_delay: int, phy_stream,
                 max_rate_bps: float = 20e9):
        self.lte_id = lte_id
        self.packets = packets
        self.x2 = x2
        self.s1_u = s1_u
        self.epoch = int(epoch)
        self.sched_delay = int(sched_delay)
        self.phy_stream = phy_stream
        max_burst = int(max_rate_bps * epoch * 1e-6 / 8 // packets.size) + 2
        self.queues = {cid: RlcAmQueue(cid, b_rlc, packets.size, max_retx, max_burst) for cid in sorted(cell_ids)}
        self._order = sorted(cell_ids)
        self.links: dict[int, LinkState] = {}
        self.route_cell = lte_id
        self.active: set[int] = set()
        self.next_sn = 0
        self.stats = DataPlaneStats()

    # ---------------------------------------------------------------- ingress
    def hop_delay(self, src: int, dst: int) -> int:
        return 0 if src == dst else self.x2.delay(self.packets.size)

    def pdcp_ingress(self, sns: np.ndarray, arrival: np.ndarray, cell: int | None = None) -> None:
        """Route PDUs that reached the anchor at ``arrival`` towards ``cell`` (default: route)."""
        cell = self.route_cell if cell is None else cell
        if cell == self.lte_id:
            self.queues[cell].push_inbound(sns, arrival)
        else:
            self.packets.x2_hops[sns] += 1
            self.queues[cell].push_inbound(sns, arrival + self.hop_delay(self.lte_id, cell))

    def ingest_until(self, now: int) -> None:
        p = self.packets
        lat = self.s1_u.delay(p.size)
        if now < lat:
            return
        hi = min(p.n, (now - lat) // p.interval + 1)
        if hi <= self.next_sn:
            return
        sns = np.arange(self.next_sn, hi, dtype=np.int64)
        self.next_sn = hi
        self.pdcp_ingress(sns, sns * p.interval + lat)

    # ---------------------------------------------------------------- epochs
    def tick(self, now: int) -> None:
        self.ingest_until(now)
        packets = self.packets
        # one phy draw per cell per epoch whether or not the cell transmits, so
        # a given cell-epoch sees the same draw in every mode
        draws = [self.phy_stream.uniform() for _ in self._order]
        for k, cid in enumerate(self._order):
            q = self.queues[cid]
            arr = q.pop_arrived(now) if q.inbound else None
            if arr is not None:
                if q.forward_to is not None:
                    self._send(arr.sns, arr.ready, q.forward_to, cid)
                    self.stats.forwarded_packets += len(arr.sns)
                else:
                    kernels.rlc_admit(q.ring, q.qs, arr.sns, q.capacity_pkts, packets.status)
                    b = q.bytes_queued
                    if b > q.peak_bytes:
                        q.peak_bytes = b
            if q.qs[1] and cid in self.active:
                link = self.links.get(cid)
                if link is None or link.rate <= 0.0:
                    continue
                res = rlc_drain(q, link, now, self.epoch, draws[k], packets, self.sched_delay)
                self.stats.discarded_copies += res[4]

    # ---------------------------------------------------------------- moving queued data
    def _send(self, sns: np.ndarray, ready: np.ndarray, dst: int, src: int) -> None:
        if not len(sns):
            return
        fresh = sns[self.packets.status[sns] == IN_FLIGHT]
        self.packets.x2_hops[fresh] += 1
        self.queues[dst].push_inbound(sns, ready + self.hop_delay(src, dst))

    def move_queue(self, src: int, dst: int, now: int, include_air: bool = True) -> int:
        """Send everything held by or travelling to ``src`` over X2 to ``dst``.

        Order is kept: PDUs still on the air (as copies), then the RLC buffer,
        then PDUs in transit towards ``src``.
        """
        if src == dst:
            return 0
        q = self.queues[src]
        moved = 0
        if include_air:
            copies = q.in_air(now)
            q.air_len = 0
            if len(copies):
                self.stats.duplicate_copies += len(copies)
                self._send(copies, np.full(len(copies), now, dtype=np.int64), dst, src)
                moved += len(copies)
        queued = q.clear()
        if len(queued):
            self._send(queued, np.full(len(queued), now, dtype=np.int64), dst, src)
            moved += len(queued)
        transit = q.take_inbound()
        if len(transit.sns):
            self._send(transit.sns, np.maximum(transit.ready, now), dst, src)
            moved += len(transit.sns)
        return moved

    def switch_route(self, new_cell: int, now: int, policy: FlushPolicy = FlushPolicy.REROUTE) -> bool:
        """Point the anchor at ``new_cell``; returns False for a no-op switch."""
        self.ingest_until(now)
        if new_cell == self.route_cell:
            return False
        old = self.route_cell
        self.route_cell = new_cell
        self.queues[new_cell].forward_to = None
        old_link = self.links.get(old)
        old_usable = old in self.active and old_link is not None and not old_link.in_outage
        if policy is FlushPolicy.REROUTE or not old_usable:
            n = self.move_queue(old, new_cell, now)
            self.stats.reroutes += 1
            self.stats.rerouted_packets += n
        return True

    def set_path(self, new_cell: int, now: int) -> None:
        """Change the anchor's destination without touching queued data (path switch)."""
        self.ingest_until(now)
        self.route_cell = new_cell

    def start_forwarding(self, src: int, dst: int, now: int) -> int:
        """Handover data forwarding: ``src`` hands its buffer and later arrivals to ``dst``."""
        self.ingest_until(now)
        if src == dst:
            return 0
        self.queues[src].forward_to = dst
        # dst may still hold a forwarding pointer from an earlier handover
        self.queues[dst].forward_to = None
        n = self.move_queue(src, dst, now)
        self.stats.forwarded_packets += n
        return n

    def attach(self, cell: int) -> None:
        self.active.add(cell)
        self.queues[cell].forward_to = None

    def detach(self, cell: int) -> None:
        self.active.discard(cell)

    # ---------------------------------------------------------------- accounting
    def in_system_sns(self) -> np.ndarray:
        """Undelivered, undropped SNs found in a queue, in transit or not yet ingested."""
        parts = [np.arange(self.next_sn, self.packets.n, dtype=np.int64)]
        for q in self.queues.values():
            parts.append(q.queued_sns())
            parts.extend(b[2] for b in q.inbound)
        allsns = np.concatenate(parts)
        return allsns[self.packets.status[allsns] == IN_FLIGHT]

    def check_buffers(self) -> None:
        for q in self.queues.values():
            if q.bytes_queued > q.capacity or q.peak_bytes > q.capacity:
                raise AssertionError(f"RLC buffer of cell {q.cell_id} exceeded {q.capacity} B")


def generated_count(horizon_us: int, interval_us: int) -> int:
    """Packets with creation time sn*interval strictly before the horizon."""
    if horizon_us <= 0:
        return 0
    return -(-int(horizon_us) // int(interval_us))
