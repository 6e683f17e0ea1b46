"""Command-line entry point: ``dcsim --mode dc --seed 42 --out results``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import SweepSpec, load_config
from .metrics import ConservationError
from .textconf import ConfigError

log = logging.getLogger("dcsim")


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("list must not be empty")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dcsim", description="LTE-mmWave dual connectivity vs hard handover simulator")
    ap.add_argument("--mode", choices=["dc", "hh"], help="mobility scheme (default from config: dc)")
    ap.add_argument("--paired", action="store_true", help="run DC and HH with the same seeds")
    ap.add_argument("--config", metavar="PATH", help="key = value parameter file")
    ap.add_argument("--scenario", metavar="PATH", help="scenario file (default: built-in street scenario)")
    ap.add_argument("--seed", type=int, metavar="U64", help="master seed")
    ap.add_argument("--runs", type=int, metavar="N", help="runs per configuration point")
    ap.add_argument("--x2-latency-ms", type=float, metavar="F")
    ap.add_argument("--s1-latency-ms", type=float, metavar="F", help="S1-MME one-way latency")
    ap.add_argument("--ue-speed", type=float, metavar="F", help="m/s")
    ap.add_argument("--sweep-x2", type=_float_list, nargs="?", const=[0.1, 1.0, 10.0], metavar="LIST",
                    help="X2 latencies in ms (default list 0.1,1,10)")
    ap.add_argument("--sweep-speed", type=_float_list, nargs="?", const=[2.0, 4.0, 8.0, 16.0], metavar="LIST",
                    help="UE speeds in m/s (default list 2,4,8,16)")
    ap.add_argument("--duration-s", type=float, metavar="F", help="run horizon (default: path length / speed)")
    ap.add_argument("--out", default="results", metavar="DIR")
    ap.add_argument("--trace", action="store_true", help="write the event log of every run")
    ap.add_argument("--packet-log", action="store_true", help="write the per-packet record CSV of every run")
    ap.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel worker processes")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _ms(v: float | None) -> int | None:
    return None if v is None else int(round(v * 1000))


def overrides_from_args(args) -> dict:
    return {
        "mode": args.mode,
        "scenario_path": args.scenario,
        "master_seed": args.seed,
        "n_runs": args.runs,
        "d_x2": _ms(args.x2_latency_ms),
        "s1_mme_latency": _ms(args.s1_latency_ms),
        "ue_speed": args.ue_speed,
        "duration": None if args.duration_s is None else int(round(args.duration_s * 1e6)),
    }


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    from .experiment import run_experiment

    try:
        params = load_config(args.config, overrides_from_args(args))
        sweep = None
        if args.sweep_x2 is not None or args.sweep_speed is not None:
            sweep = SweepSpec(
                tuple(_ms(v) for v in args.sweep_x2) if args.sweep_x2 is not None else (params.d_x2,),
                tuple(args.sweep_speed) if args.sweep_speed is not None else (params.ue_speed,),
            )
        if args.jobs < 1:
            raise ConfigError("invalid value for 'jobs': must be >= 1")
        results = run_experiment(params, sweep=sweep, paired=args.paired, out=args.out, trace=args.trace,
                                 packet_log=args.packet_log, jobs=args.jobs)
    except (ConfigError, FileNotFoundError) as e:
        print(f"dcsim: error: {e}", file=sys.stderr)
        return 2
    except ConservationError as e:
        print(f"dcsim: conservation check failed: {e}", file=sys.stderr)
        return 3
    for pr in results:
        for mode, agg in pr.aggregates.items():
            print(f"{pr.name} {mode}: latency {agg.mean['mean_latency_ms']:.2f} ms, "
                  f"gross {agg.mean['gross_pdcp_throughput_mbps']:.2f} Mbit/s, "
                  f"RRC air {agg.mean['rrc_air_bytes_per_s']:.1f} B/s over {agg.n} runs")
    return 0


if __name__ == "__main__":
    sys.exit(main())
