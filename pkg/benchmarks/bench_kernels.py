"""Compiled vs pure-Python kernels, per kernel and for a whole run.

    python benchmarks/bench_kernels.py [--repeat 5] [--sim-seconds 10]

The whole-run comparison starts a subprocess per backend because the backend
is fixed at import (``DCSIM_PURE_PYTHON=1`` selects the fallback).
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from dcsim import kernels
from dcsim.kernels import python_backend

RUN_SNIPPET = """
import time
from dcsim import SimulationParams, run_simulation
from dcsim.kernels import BACKEND
t0 = time.perf_counter()
run_simulation(SimulationParams(duration={dur}), seed=7)
print(BACKEND, time.perf_counter() - t0)
"""


def _serve_case(backend, n_epochs=2000):
    size, cap = 1024, 4000
    delivered = np.full(200_000, -1, dtype=np.int64)
    retx = np.zeros(200_000, dtype=np.int16)
    status = np.zeros(200_000, dtype=np.int8)
    cell_of = np.full(200_000, -1, dtype=np.int8)
    air = np.zeros(64, dtype=np.int64), np.zeros(64, dtype=np.int64), np.zeros(64, dtype=np.int8)

    def run():
        delivered.fill(-1)
        status.fill(0)
        retx.fill(0)
        ring = np.zeros(cap + 1, dtype=np.int64)
        qs = np.zeros(3, dtype=np.int64)
        rng = np.random.default_rng(0)
        sn = 0
        for e in range(n_epochs):
            backend.rlc_admit(ring, qs, np.arange(sn, sn + 13, dtype=np.int64), cap, status)
            sn += 13
            backend.rlc_serve(ring, qs, 46_000, size, float(rng.random()), 0.1, e * 1000, 372e6, 1000, 3,
                              delivered, retx, status, cell_of, 2, *air)
    return run


def _ar1_case(backend, n=20_000):
    rng = np.random.default_rng(1)
    z = rng.standard_normal(n)
    rho = np.full(n, 0.99)
    return lambda: backend.ar1_filter(z, rho)


def _window_case(backend, n=1_250_000):
    rng = np.random.default_rng(2)
    t = np.sort(rng.integers(0, 100_000_000, n)).astype(np.int64)
    v = rng.random(n)
    return lambda: backend.window_stats(t, v, 100_000, 1000)


def bench_kernels(repeat: int) -> list[tuple[str, float, float | None]]:
    rows = []
    for name, case in (("rlc_admit+rlc_serve x2000 epochs", _serve_case), ("ar1_filter n=20000", _ar1_case),
                       ("window_stats n=1.25M", _window_case)):
        py = min(timeit.repeat(case(python_backend), number=1, repeat=repeat))
        c = None
        if kernels.compiled_backend is not None:
            c = min(timeit.repeat(case(kernels.compiled_backend), number=1, repeat=repeat))
        rows.append((name, py, c))
    return rows


def bench_run(sim_seconds: float) -> dict[str, float]:
    out = {}
    code = RUN_SNIPPET.format(dur=int(sim_seconds * 1e6))
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("DCSIM_PURE_PYTHON", None)
        if pure:
            env["DCSIM_PURE_PYTHON"] = "1"
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, secs = res.stdout.split()
        out[backend] = float(secs)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sim-seconds", type=float, default=10.0)
    args = ap.parse_args(argv)

    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':36s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s}")
    for name, py, c in bench_kernels(args.repeat):
        cs = f"{c:11.4f}" if c is not None else f"{'n/a':>11s}"
        sp = f"{py / c:7.1f}x" if c else f"{'n/a':>8s}"
        print(f"{name:36s} {py:10.4f} {cs} {sp}")
    run = bench_run(args.sim_seconds)
    line = ", ".join(f"{k} {v:.2f} s" for k, v in sorted(run.items()))
    print(f"whole run ({args.sim_seconds:g} s simulated, default scenario): {line}")
    if "compiled" in run and "python" in run:
        print(f"whole-run speedup: {run['python'] / run['compiled']:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
