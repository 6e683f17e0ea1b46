"""Experiment orchestration: N seeded runs per configuration point, optionally
paired DC/HH, optionally swept over X2 latency and UE speed.

Layout: ``<out>/<config>/<mode>/run<i>/`` per run, ``<out>/<config>/<mode>/aggregate.csv``
per mode and ``<out>/<config>/paired.csv`` when both modes ran.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .channel import Scenario
from .config import SimulationParams, SweepSpec, run_seed
from .metrics import AggregateMetrics, RunMetrics, _fmt, aggregate
from .simulation import resolve_scenario, run_simulation

log = logging.getLogger(__name__)


def config_name(params: SimulationParams) -> str:
    return f"dx2_{params.d_x2}us_speed_{params.ue_speed:g}"


@dataclass
class PointResult:
    name: str
    params: SimulationParams
    seeds: list[int]
    runs: dict[str, list[RunMetrics]] = field(default_factory=dict)
    aggregates: dict[str, AggregateMetrics] = field(default_factory=dict)


def _one_run(job):
    params, seed, scenario, outdir, trace, packet_log = job
    res = run_simulation(params, seed=seed, scenario=scenario, trace=trace)
    if outdir is not None:
        res.write(outdir, packet_log=packet_log)
    return res.metrics


def _write_paired(path: Path, seeds, dc: list[RunMetrics], hh: list[RunMetrics]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("run,seed,dc_mean_latency_ms,hh_mean_latency_ms,dc_gross_mbps,hh_gross_mbps,"
                 "dc_net_mbps,hh_net_mbps,dc_max_window_latency_ms,hh_max_window_latency_ms,"
                 "dc_rrc_air_bytes_per_s,hh_rrc_air_bytes_per_s,outage_events\n")
        for i, (s, d, h) in enumerate(zip(seeds, dc, hh)):
            vals = [d.mean_latency * 1e3, h.mean_latency * 1e3, d.gross_pdcp_throughput / 1e6,
                    h.gross_pdcp_throughput / 1e6, d.net_goodput / 1e6, h.net_goodput / 1e6,
                    d.max_window_latency * 1e3, h.max_window_latency * 1e3, d.rrc_air_bytes_per_s,
                    h.rrc_air_bytes_per_s, d.outage_events]
            fh.write(f"{i},{s}," + ",".join(_fmt(v) for v in vals) + "\n")


def run_experiment(params: SimulationParams, sweep: SweepSpec | None = None, paired: bool = False,
                   out: str | Path | None = None, trace: bool = False, packet_log: bool = False,
                   jobs: int = 1, scenario: Scenario | None = None) -> list[PointResult]:
    """Run every (config point, mode, run index); results are ordered by run index."""
    # fail on a broken scenario before anything runs
    scenario = resolve_scenario(params, scenario)
    modes = ["dc", "hh"] if paired else [params.mode]
    points = [params] if sweep is None else [params.replace(d_x2=d, ue_speed=s) for d, s in sweep.points()]
    seeds = [run_seed(params.master_seed, i) for i in range(params.n_runs)]
    out = Path(out) if out is not None else None

    jobs_list, index = [], []
    for p in points:
        name = config_name(p)
        for mode in modes:
            pm = p.replace(mode=mode)
            for i, seed in enumerate(seeds):
                rundir = out / name / mode / f"run{i}" if out is not None else None
                jobs_list.append((pm, seed, scenario, rundir, trace, packet_log))
                index.append((name, mode, i))
    log.info("running %d simulations", len(jobs_list))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            metrics = list(ex.map(_one_run, jobs_list))
    else:
        metrics = [_one_run(j) for j in jobs_list]

    results: dict[str, PointResult] = {}
    for p in points:
        results[config_name(p)] = PointResult(config_name(p), p, seeds)
    for (name, mode, _), m in zip(index, metrics):
        results[name].runs.setdefault(mode, []).append(m)
    for pr in results.values():
        for mode, runs in pr.runs.items():
            key = pr.params.replace(mode=mode).comparable_key()
            pr.aggregates[mode] = aggregate(runs, [key] * len(runs))
            if out is not None:
                pr.aggregates[mode].write_csv(out / pr.name / mode / "aggregate.csv")
        if out is not None and paired:
            _write_paired(out / pr.name / "paired.csv", seeds, pr.runs["dc"], pr.runs["hh"])
    return list(results.values())
