"""One simulation run: builds the channel trace, data plane and mobility
controller for a parameter set and a seed, drives them through the engine and
collects the metrics.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .channel import ChannelModel, Scenario, ShadowingParams, default_scenario, load_scenario, outage_intervals
from .config import SimulationParams
from .control import ControlTimings, Decision, DecisionKind, DecisionRule, MobilityController, MobilityState, Mode
from .dataplane import BackhaulLink, DataPlane, FlushPolicy, LinkKind, PacketTable, generated_count
from .engine import Engine, make_streams
from .metrics import RunMetrics, finalize_run, write_packet_log, write_series_csvs
from .phy import LinkState, PhyParams


def resolve_scenario(params: SimulationParams, scenario: Scenario | None = None) -> Scenario:
    if scenario is None:
        scenario = load_scenario(params.scenario_path) if params.scenario_path else default_scenario()
    return scenario.with_speed(params.ue_speed)


def horizon_of(params: SimulationParams, scenario: Scenario) -> int:
    return int(params.duration) if params.duration is not None else scenario.path.duration_us


@dataclass
class RunResult:
    params: SimulationParams
    seed: int
    scenario: Scenario
    metrics: RunMetrics
    engine: Engine
    channel: ChannelModel
    dataplane: DataPlane
    controller: MobilityController
    streams: dict

    def write(self, outdir, packet_log: bool = False) -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        write_series_csvs(self.metrics, outdir)
        self.channel.trace.write_csv(outdir / "channel_trace.csv")
        self.controller.ledger.write_csv(outdir / "messages.csv")
        if self.engine.trace:
            self.engine.write_log(None, outdir / "events.csv")
        if packet_log:
            write_packet_log(self.dataplane.packets, self.scenario.lte.id, self.metrics.horizon_us,
                             outdir / "packets.csv")


class Simulation:
    """Wires the components for one run; ``run()`` drives it to the horizon.

    ``setup`` hooks (callables taking the simulation) run after initial
    attachment and before the first event, which is how tests force a
    handover at a given time.
    """

    def __init__(self, params: SimulationParams, seed: int | None = None, scenario: Scenario | None = None,
                 trace: bool = False, strict: bool = True):
        self.params = p = params
        self.seed = p.master_seed if seed is None else int(seed)
        self.scenario = sc = resolve_scenario(p, scenario)
        self.horizon = horizon_of(p, sc)
        self.strict = strict
        self.streams = make_streams(self.seed)
        self.engine = Engine(trace=trace)
        shadow = ShadowingParams(p.shadow_sigma_los, p.shadow_sigma_nlos, p.shadow_decorrelation)
        self.channel = ChannelModel(sc, p.sample_period, self.horizon, self.streams["channel"], shadow)
        self.phy = PhyParams(p.outage_threshold, p.eta, p.sched_delay, p.rach_window_ms, p.rach_proc_ms,
                             p.bler_enabled)
        self.lte_id = sc.lte.id
        self.mm_ids = [e.id for e in sorted(sc.mmwave, key=lambda e: e.id)]
        self.bandwidth = {e.id: e.bandwidth for e in sc.enbs}
        packets = PacketTable(generated_count(self.horizon, p.udp_interval), p.udp_size, p.udp_interval)
        self.dataplane = DataPlane(
            [e.id for e in sc.enbs], self.lte_id, packets, b_rlc=p.b_rlc, max_retx=p.max_retx,
            x2=BackhaulLink(p.d_x2, LinkKind.X2), s1_u=BackhaulLink(p.s1_u_latency, LinkKind.S1_U),
            epoch=p.epoch, sched_delay=p.sched_delay, phy_stream=self.streams["phy"],
            max_rate_bps=self._max_rate())
        timings = ControlTimings(p.d_x2, p.s1_mme_latency, p.epoch, p.sched_delay, p.report_period,
                                 p.rrc_max_attempts, dict(p.msg_sizes))
        state = MobilityState(Mode(p.mode), self.lte_id)
        self.controller = MobilityController(
            self.engine, self.dataplane, state, self.lte_id, {e.id: e.is_mmwave for e in sc.enbs}, timings,
            DecisionRule(p.outage_threshold, p.hysteresis, p.recovery_margin), self.phy,
            self.streams["control"], FlushPolicy(p.flush_policy))
        self.latest: dict[int, float] = {}
        self._update_links(0)
        self.controller.initial_attach({i: self.latest[i] for i in self.mm_ids})

    def _max_rate(self) -> float:
        trace = self.channel.trace
        best = 0.0
        for j, eid in enumerate(trace.enb_ids):
            snr = float(trace.snr[:, j].max()) if len(trace.times) else 0.0
            best = max(best, LinkState.from_snr(eid, snr, self.bandwidth[eid], self.phy).rate)
        return max(best, 1.0)

    def _update_links(self, now: int) -> None:
        trace = self.channel.trace
        i = trace.index_of(now)
        for j, eid in enumerate(trace.enb_ids):
            snr = float(trace.snr[i, j])
            self.latest[eid] = snr
            self.dataplane.links[eid] = LinkState.from_snr(eid, snr, self.bandwidth[eid], self.phy)

    # ------------------------------------------------------------ periodic handlers
    def _on_channel(self, _):
        now = self.engine.now
        self._update_links(now)
        self.engine.schedule(now + self.params.sample_period, "chan", self._on_channel)

    def _on_report(self, _):
        now = self.engine.now
        self.controller.send_reports({i: self.latest[i] for i in self.mm_ids})
        self.engine.schedule(now + self.params.report_period, "meas", self._on_report)

    def _on_tick(self, _):
        now = self.engine.now
        self.dataplane.tick(now)
        self.engine.schedule(now + self.params.epoch, "tick", self._on_tick)

    def force_handover(self, target: int, at: int, autonomous: bool = False) -> None:
        """Hand over to ``target`` at time ``at`` with the procedure of the current mode."""
        self.controller.autonomous = autonomous
        self.engine.schedule(at, "force_ho", lambda _: self.controller.execute(Decision(DecisionKind.HANDOVER, target)))

    def start(self) -> None:
        self.engine.schedule(0, "chan", self._on_channel)
        self.engine.schedule(0, "meas", self._on_report)
        self.engine.schedule(0, "tick", self._on_tick)

    def run(self, *setup) -> RunResult:
        self.start()
        for hook in setup:
            hook(self)
        self.engine.run_until(self.horizon)
        return self.finish()

    def finish(self) -> RunResult:
        ctl = self.controller
        ctl.close(self.horizon)
        self.dataplane.check_buffers()
        outages = outage_intervals(self.channel.trace, self.mm_ids, self.params.outage_threshold)
        hos = [h for h in ctl.handovers]
        metrics = finalize_run(
            self.dataplane.packets, self.dataplane.in_system_sns(), self.horizon, self.params.window,
            ctl.association, ctl.ledger.air_bytes, {k.value: v for k, v in ctl.ledger.bytes.items()},
            strict=self.strict,
            handovers=sum(1 for h in hos if h.outcome == "completed"),
            rlf=sum(1 for h in hos if h.outcome == "rlf"),
            switches=len(ctl.switches),
            outage_events=len(outages),
            blocked_us=sum(b - a for a, b, _ in ctl.blocked_intervals),
        )
        return RunResult(self.params, self.seed, self.scenario, metrics, self.engine, self.channel,
                         self.dataplane, self.controller, self.streams)


def run_simulation(params: SimulationParams, seed: int | None = None, scenario: Scenario | None = None,
                   trace: bool = False, strict: bool = True) -> RunResult:
    return Simulation(params, seed, scenario, trace, strict).run()
