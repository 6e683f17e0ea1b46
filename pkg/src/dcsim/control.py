"""Mobility control at the LTE coordinator.

mmWave eNBs report the UE's SNR over X2 every report period. On each report
arrival the coordinator applies the outage / hysteresis rule and runs one of
two procedures:

* dual connectivity: the LTE eNB switches the PDCP route with one RRC message
  pair over the always-attached LTE link;
* hard handover: X2 preparation, RRC reconfiguration over the source link,
  non-contention random access at the target and a path switch with the MME.

Between mmWave cells both modes hand over; in DC mode data rides on LTE in
the meantime and no MME signalling is needed because the anchor stays put.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple

from .dataplane import BackhaulLink, DataPlane, FlushPolicy
from .phy import LinkOutage, PhyParams, random_access


class MsgKind(str, Enum):
    MEAS_REPORT = "MEAS_REPORT"
    SWITCH_CMD = "SWITCH_CMD"
    SWITCH_ACK = "SWITCH_ACK"
    HO_REQUEST = "HO_REQUEST"
    HO_ACK = "HO_ACK"
    RRC_RECONF = "RRC_RECONF"
    RACH_MSG = "RACH_MSG"
    PATH_SWITCH_REQ = "PATH_SWITCH_REQ"
    PATH_SWITCH_ACK = "PATH_SWITCH_ACK"


class MsgPath(str, Enum):
    AIR_LTE = "AIR_LTE"
    AIR_MMWAVE = "AIR_MMWAVE"
    X2 = "X2"
    S1_MME = "S1_MME"


AIR_PATHS = (MsgPath.AIR_LTE, MsgPath.AIR_MMWAVE)


class ControlMessage(NamedTuple):
    time: int
    kind: MsgKind
    path: MsgPath
    size: int
    src: str
    dst: str


class SignalingLedger:
    """Per-path byte counters plus the full message log."""

    def __init__(self):
        self.log: list[ControlMessage] = []
        self.bytes = {p: 0 for p in MsgPath}
        self.counts = {k: 0 for k in MsgKind}

    def account(self, msg: ControlMessage) -> None:
        if msg.size <= 0:
            raise ValueError(f"message size must be > 0: {msg}")
        self.log.append(msg)
        self.bytes[msg.path] += msg.size
        self.counts[msg.kind] += 1

    @property
    def air_bytes(self) -> int:
        return sum(self.bytes[p] for p in AIR_PATHS)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("time_us,kind,path,size_bytes,src,dst\n")
            for m in self.log:
                fh.write(f"{m.time},{m.kind.value},{m.path.value},{m.size},{m.src},{m.dst}\n")


def account_signaling(ledger: SignalingLedger, msg: ControlMessage) -> None:
    ledger.account(msg)


@dataclass
class MeasurementEntry:
    enb_id: int
    snr: float
    reported_at: int


class CoordinatorTable(dict):
    """Latest report per mmWave eNB, keyed by eNB id."""

    def update_entry(self, entry: MeasurementEntry) -> None:
        self[entry.enb_id] = entry

    def fresh(self, now: int, period: int) -> dict[int, float]:
        return {eid: e.snr for eid, e in self.items() if now - e.reported_at <= 2 * period}


class Mode(str, Enum):
    DC = "dc"
    HH = "hh"


class Phase(str, Enum):
    STEADY = "STEADY"
    SWITCHING = "SWITCHING"
    HO_PREP = "HO_PREP"
    HO_EXEC = "HO_EXEC"
    HO_PATH_SWITCH = "HO_PATH_SWITCH"


@dataclass
class MobilityState:
    mode: Mode
    serving_cell: int  # cell carrying the UE's data
    mm_cell: int | None = None  # DC only: attached mmWave cell
    phase: Phase = Phase.STEADY
    data_blocked: bool = False


class DecisionKind(str, Enum):
    NONE = "NONE"
    SWITCH_TO_LTE = "SWITCH_TO_LTE"
    SWITCH_TO_MMWAVE = "SWITCH_TO_MMWAVE"
    HANDOVER = "HANDOVER"


class Decision(NamedTuple):
    kind: DecisionKind
    target: int | None = None


NO_DECISION = Decision(DecisionKind.NONE)


@dataclass(frozen=True)
class DecisionRule:
    outage_threshold: float = -5.0
    hysteresis: float = 3.0
    recovery_margin: float = 2.0


def decide(snrs: dict[int, float], state: MobilityState, lte_id: int,
           rule: DecisionRule = DecisionRule()) -> Decision:
    """Pure decision function over the fresh part of the coordinator table."""
    if not snrs:
        return NO_DECISION
    thr = rule.outage_threshold
    best = max(sorted(snrs), key=lambda eid: snrs[eid])
    best_snr = snrs[best]
    serving = state.serving_cell
    dc = state.mode is Mode.DC
    if serving == lte_id:
        if best_snr >= thr + rule.recovery_margin:
            if dc and best == state.mm_cell:
                return Decision(DecisionKind.SWITCH_TO_MMWAVE, best)
            return Decision(DecisionKind.HANDOVER, best)
        return NO_DECISION
    to_lte = Decision(DecisionKind.SWITCH_TO_LTE) if dc else Decision(DecisionKind.HANDOVER, lte_id)
    if best_snr < thr:
        return to_lte
    cur = snrs.get(serving, -math.inf)
    if best != serving and best_snr > cur + rule.hysteresis:
        return Decision(DecisionKind.HANDOVER, best)
    if cur < thr:
        # serving link lost, but no candidate clears the hysteresis margin
        return to_lte
    return NO_DECISION


@dataclass
class HandoverRecord:
    mode: str
    start: int
    source: int
    target: int
    end: int | None = None
    outcome: str = "in_progress"  # completed | rlf | aborted
    blocked_us: int = 0


@dataclass
class ControlTimings:
    d_x2: int
    s1_mme: int
    epoch: int
    sched_delay: int
    report_period: int
    rrc_max_attempts: int
    msg_sizes: dict = field(default_factory=dict)


class MobilityController:
    """Procedures driven by the engine; owns the MobilityState."""

    def __init__(self, engine, dataplane: DataPlane, state: MobilityState, lte_id: int, mmwave_kind: dict[int, bool],
                 timings: ControlTimings, rule: DecisionRule, phy: PhyParams, control_stream,
                 flush_policy: FlushPolicy = FlushPolicy.REROUTE):
        self.engine = engine
        self.dp = dataplane
        self.state = state
        self.lte_id = lte_id
        self.is_mm = mmwave_kind
        self.t = timings
        self.rule = rule
        self.phy = phy
        self.rng = control_stream
        self.flush_policy = flush_policy
        self.x2 = BackhaulLink(timings.d_x2)
        self.s1 = BackhaulLink(timings.s1_mme)
        self.ledger = SignalingLedger()
        self.table = CoordinatorTable()
        self.association: list[tuple[int, int]] = [(0, state.serving_cell)]
        self.handovers: list[HandoverRecord] = []
        self.switches: list[tuple[int, int, int]] = []  # (decided, landed, new cell)
        self.blocked_since: int | None = None
        self.blocked_intervals: list[tuple[int, int, str]] = []
        self.decisions = 0
        self.autonomous = True  # False: reports are collected but never acted on

    # ------------------------------------------------------------ helpers
    def _name(self, cell) -> str:
        return cell if isinstance(cell, str) else f"enb{cell}"

    def _size(self, kind: MsgKind) -> int:
        return int(self.t.msg_sizes[kind.value])

    def _air_path(self, cell: int) -> MsgPath:
        return MsgPath.AIR_MMWAVE if self.is_mm.get(cell, False) else MsgPath.AIR_LTE

    def _wired(self, kind: MsgKind, path: MsgPath, src, dst, then: Callable[[], None]) -> None:
        size = self._size(kind)
        now = self.engine.now
        self.ledger.account(ControlMessage(now, kind, path, size, self._name(src), self._name(dst)))
        link = self.x2 if path is MsgPath.X2 else self.s1
        self.engine.schedule(now + link.delay(size), kind.value.lower(), lambda _: then())

    def _air(self, kind: MsgKind, cell: int, downlink: bool, on_ok: Callable[[], None],
             on_fail: Callable[[], None], attempt: int = 0) -> None:
        """Send over the air of ``cell``; a lost attempt is retried when it times out."""
        now = self.engine.now
        link = self.dp.links[cell]
        size = self._size(kind)
        if link.in_outage:
            ok, done = False, now + self.t.sched_delay
        else:
            src, dst = (self._name(cell), "ue") if downlink else ("ue", self._name(cell))
            self.ledger.account(ControlMessage(now, kind, self._air_path(cell), size, src, dst))
            ok = self.rng.uniform() >= link.bler
            done = now + self.t.sched_delay + math.ceil(size * 8 * 1e6 / link.rate)
        if ok:
            self.engine.schedule(done, kind.value.lower(), lambda _: on_ok())
        elif attempt + 1 >= self.t.rrc_max_attempts:
            self.engine.schedule(done, kind.value.lower() + "_fail", lambda _: on_fail())
        else:
            self.engine.schedule(done, kind.value.lower() + "_retx",
                                 lambda _: self._air(kind, cell, downlink, on_ok, on_fail, attempt + 1))

    def _set_serving(self, cell: int) -> None:
        if cell != self.state.serving_cell:
            self.state.serving_cell = cell
            now = self.engine.now
            if self.association and self.association[-1][0] == now:
                self.association[-1] = (now, cell)
            else:
                self.association.append((now, cell))

    def _block(self, on: bool, reason: str = "rach") -> None:
        now = self.engine.now
        if on and not self.state.data_blocked:
            self.state.data_blocked = True
            self.blocked_since = now
        elif not on and self.state.data_blocked:
            self.state.data_blocked = False
            self.blocked_intervals.append((self.blocked_since, now, reason))
            self.blocked_since = None

    # ------------------------------------------------------------ measurements
    def send_reports(self, samples: dict[int, float]) -> None:
        """MEAS_REPORT from each mmWave eNB to the coordinator over X2."""
        if not samples:
            return
        now = self.engine.now
        size = self._size(MsgKind.MEAS_REPORT)
        for eid in sorted(samples):
            self.ledger.account(ControlMessage(now, MsgKind.MEAS_REPORT, MsgPath.X2, size, self._name(eid),
                                               self._name(self.lte_id)))
        self.engine.schedule(now + self.x2.delay(size), "meas_rx", self.on_reports, dict(samples))

    def on_reports(self, samples: dict[int, float]) -> None:
        now = self.engine.now
        for eid, snr in samples.items():
            self.table.update_entry(MeasurementEntry(eid, snr, now))
        if self.autonomous and self.state.phase is Phase.STEADY:
            self.execute(self.current_decision())

    def current_decision(self) -> Decision:
        return decide(self.table.fresh(self.engine.now, self.t.report_period), self.state, self.lte_id, self.rule)

    def execute(self, d: Decision) -> None:
        if d.kind is DecisionKind.NONE:
            return
        self.decisions += 1
        if d.kind is DecisionKind.SWITCH_TO_LTE:
            self.execute_dc_switch(self.lte_id)
        elif d.kind is DecisionKind.SWITCH_TO_MMWAVE:
            self.execute_dc_switch(d.target)
        elif self.state.mode is Mode.DC:
            self.execute_dc_handover(d.target)
        else:
            self.execute_handover(d.target)

    # ------------------------------------------------------------ DC fast switch
    def execute_dc_switch(self, new_cell: int) -> bool:
        """One SWITCH_CMD over LTE, the route flips on delivery, SWITCH_ACK closes it."""
        st = self.state
        if new_cell == st.serving_cell or st.phase is not Phase.STEADY:
            return False
        st.phase = Phase.SWITCHING
        decided = self.engine.now

        def landed():
            self.dp.switch_route(new_cell, self.engine.now, self.flush_policy)
            self._set_serving(new_cell)
            self.switches.append((decided, self.engine.now, new_cell))
            self._air(MsgKind.SWITCH_ACK, self.lte_id, False, done, done)

        def done():
            st.phase = Phase.STEADY

        self._air(MsgKind.SWITCH_CMD, self.lte_id, True, landed, done)
        return True

    # ------------------------------------------------------------ DC inter-mmWave handover
    def execute_dc_handover(self, target: int) -> None:
        st = self.state
        now = self.engine.now
        source = st.mm_cell
        rec = HandoverRecord("dc", now, source if source is not None else self.lte_id, target)
        self.handovers.append(rec)
        st.phase = Phase.HO_PREP
        if st.serving_cell != self.lte_id:
            # data moves to LTE for the duration of the handover
            self.dp.switch_route(self.lte_id, now, FlushPolicy.REROUTE)
            self._set_serving(self.lte_id)
        x2_src = source if source is not None else self.lte_id

        def ack():
            self._air(MsgKind.RRC_RECONF, self.lte_id, True, reconf_ok, reconf_fail)

        def reconf_ok():
            if st.mm_cell is not None:
                self.dp.detach(st.mm_cell)
            st.mm_cell = None
            st.phase = Phase.HO_EXEC
            try:
                delay = random_access(self.rng, self.dp.links[target], self.phy)
            except LinkOutage:
                return finish("aborted")
            self._account_rach(target)
            self.engine.schedule(self.engine.now + delay, "rach_done", lambda _: attached())

        def attached():
            st.mm_cell = target
            self.dp.attach(target)
            self.dp.switch_route(target, self.engine.now, FlushPolicy.REROUTE)
            self._set_serving(target)
            finish("completed")

        def reconf_fail():
            finish("aborted")

        def finish(outcome):
            rec.end = self.engine.now
            rec.outcome = outcome
            st.phase = Phase.STEADY

        self._wired(MsgKind.HO_REQUEST, MsgPath.X2, x2_src, target,
                    lambda: self._wired(MsgKind.HO_ACK, MsgPath.X2, target, x2_src, ack))

    def _account_rach(self, cell: int) -> None:
        self.ledger.account(ControlMessage(self.engine.now, MsgKind.RACH_MSG, self._air_path(cell),
                                           self._size(MsgKind.RACH_MSG), "ue", self._name(cell)))

    # ------------------------------------------------------------ hard handover
    def execute_handover(self, target: int) -> HandoverRecord | None:
        st = self.state
        source = st.serving_cell
        if target == source or st.phase is not Phase.STEADY:
            return None
        rec = HandoverRecord(st.mode.value, self.engine.now, source, target)
        self.handovers.append(rec)
        st.phase = Phase.HO_PREP

        def ack():
            # source stops scheduling the UE and forwards its buffer from here on
            self.dp.detach(source)
            self.dp.start_forwarding(source, target, self.engine.now)
            self._air(MsgKind.RRC_RECONF, source, True, reconf_ok, lambda: self._rlf(rec))

        def reconf_ok():
            st.phase = Phase.HO_EXEC
            self._block(True)
            try:
                delay = random_access(self.rng, self.dp.links[target], self.phy)
            except LinkOutage:
                return self._rlf(rec)
            self._account_rach(target)
            self.engine.schedule(self.engine.now + delay, "rach_done", lambda _: attached())

        def attached():
            self._block(False)
            self.dp.attach(target)
            self._set_serving(target)
            rec.blocked_us = self.blocked_intervals[-1][1] - self.blocked_intervals[-1][0]
            self._path_switch(rec, target, "completed")

        self._wired(MsgKind.HO_REQUEST, MsgPath.X2, source, target,
                    lambda: self._wired(MsgKind.HO_ACK, MsgPath.X2, target, source, ack))
        return rec

    def _path_switch(self, rec: HandoverRecord, cell: int, outcome: str) -> None:
        st = self.state
        st.phase = Phase.HO_PATH_SWITCH

        def switched():
            self.dp.set_path(cell, self.engine.now)
            rec.end = self.engine.now
            rec.outcome = outcome
            st.phase = Phase.STEADY

        if self.dp.route_cell == cell:
            return switched()
        self._wired(MsgKind.PATH_SWITCH_REQ, MsgPath.S1_MME, cell, "mme",
                    lambda: self._wired(MsgKind.PATH_SWITCH_ACK, MsgPath.S1_MME, "mme", cell, switched))

    def _rlf(self, rec: HandoverRecord) -> None:
        """Radio link failure mid-handover: fall back to LTE via random access."""
        st = self.state
        now = self.engine.now
        lte = self.lte_id
        st.phase = Phase.HO_EXEC
        self._block(True, "rlf")
        for cell in {rec.source, rec.target} - {lte}:
            self.dp.detach(cell)
            self.dp.start_forwarding(cell, lte, now)

        def attempt():
            try:
                delay = random_access(self.rng, self.dp.links[lte], self.phy)
            except LinkOutage:
                self.engine.schedule(self.engine.now + int(self.phy.rach_window_ms * 1000) + self.t.epoch,
                                     "rach_retry", lambda _: attempt())
                return
            self._account_rach(lte)
            self.engine.schedule(self.engine.now + delay, "rach_done", lambda _: attached())

        def attached():
            self._block(False, "rlf")
            self.dp.attach(lte)
            self._set_serving(lte)
            self._path_switch(rec, lte, "rlf")

        attempt()

    # ------------------------------------------------------------ initial attach
    def initial_attach(self, snrs: dict[int, float], now: int = 0) -> None:
        st = self.state
        thr = self.rule.outage_threshold
        best = max(sorted(snrs), key=lambda e: snrs[e]) if snrs else None
        usable = best is not None and snrs[best] >= thr
        if st.mode is Mode.DC:
            self.dp.attach(self.lte_id)
            if best is not None:
                st.mm_cell = best
                self.dp.attach(best)
            cell = best if usable else self.lte_id
        else:
            cell = best if usable else self.lte_id
            self.dp.attach(cell)
        st.serving_cell = cell
        self.dp.route_cell = cell
        self.association = [(now, cell)]

    def close(self, end: int) -> None:
        if self.state.data_blocked and self.blocked_since is not None:
            self.blocked_intervals.append((self.blocked_since, end, "open"))
