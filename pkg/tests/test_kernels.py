"""The compiled kernels and their Python twins must agree exactly."""
import numpy as np
import pytest

from dcsim import kernels
from dcsim.kernels import python_backend as py

c = kernels.compiled_backend
needs_c = pytest.mark.skipif(c is None, reason="compiled kernels not built")


def test_backend_selection():
    assert kernels.BACKEND in ("compiled", "python")
    assert (kernels.BACKEND == "compiled") == (c is not None)


@needs_c
def test_ar1_filter_equal():
    rng = np.random.default_rng(1)
    z = rng.standard_normal(5000)
    rho = rng.uniform(0, 1, 5000)
    assert np.array_equal(py.ar1_filter(z, rho), np.asarray(c.ar1_filter(z, rho)))


@needs_c
def test_window_stats_equal():
    rng = np.random.default_rng(2)
    t = rng.integers(-5, 1_050_000, 20_000).astype(np.int64)
    v = rng.uniform(0, 1, 20_000)
    a = py.window_stats(t, v, 100_000, 10)
    b = c.window_stats(t, v, 100_000, 10)
    for x, y in zip(a, b):
        assert np.array_equal(np.asarray(x), np.asarray(y))


def _state(n=400, cap=64, seed=0):
    rng = np.random.default_rng(seed)
    st = dict(
        ring=np.zeros(cap + 1, dtype=np.int64), qs=np.zeros(3, dtype=np.int64),
        delivered=np.full(n, -1, dtype=np.int64), retx=np.zeros(n, dtype=np.int16),
        status=np.zeros(n, dtype=np.int8), cell_of=np.full(n, -1, dtype=np.int8),
        air_sns=np.zeros(200, dtype=np.int64), air_done=np.zeros(200, dtype=np.int64),
        air_new=np.zeros(200, dtype=np.int8),
    )
    return st, rng


def _run(backend, seed):
    st, rng = _state(seed=seed)
    out = []
    sn = 0
    for epoch in range(300):
        k = int(rng.integers(0, 20))
        sns = np.arange(sn, min(sn + k, 400), dtype=np.int64)
        sn += len(sns)
        out.append(backend.rlc_admit(st["ring"], st["qs"], sns, 64, st["status"]))
        res = backend.rlc_serve(st["ring"], st["qs"], int(rng.integers(0, 9000)), 1024, float(rng.random()),
                                float(rng.uniform(0, 0.8)), epoch * 1000, float(rng.uniform(1e6, 1e9)), 1000, 3,
                                st["delivered"], st["retx"], st["status"], st["cell_of"], 2,
                                st["air_sns"], st["air_done"], st["air_new"])
        out.append(tuple(res))
    return out, st


@needs_c
@pytest.mark.parametrize("seed", range(5))
def test_rlc_kernels_equal(seed):
    a, sa = _run(py, seed)
    b, sb = _run(c, seed)
    assert a == b
    for key in sa:
        assert np.array_equal(sa[key], sb[key]), key


@pytest.mark.parametrize("backend", [py] + ([c] if c is not None else []))
def test_rlc_serve_semantics(backend):
    st, _ = _state()
    sns = np.arange(10, dtype=np.int64)
    assert backend.rlc_admit(st["ring"], st["qs"], sns, 64, st["status"]) == 10
    args = (st["delivered"], st["retx"], st["status"], st["cell_of"], 2, st["air_sns"], st["air_done"], st["air_new"])
    # lost burst: nothing counts as sent, packets stay at the head with one more retransmission
    res = backend.rlc_serve(st["ring"], st["qs"], 4096, 1024, 0.1, 0.5, 0, 1e8, 1000, 3, *args)
    assert tuple(res)[:3] == (0, 0, 0) and st["qs"][1] == 10 and st["retx"][:4].tolist() == [1] * 4
    # successful burst
    res = backend.rlc_serve(st["ring"], st["qs"], 4096, 1024, 0.9, 0.5, 1000, 1e8, 1000, 3, *args)
    assert tuple(res)[:2] == (4, 4) and st["qs"][1] == 6
    assert st["delivered"][0] == 1000 + 1000 + int(np.ceil(1024 * 8.0 * 1e6 / 1e8))
    assert (st["status"][:4] == kernels.DELIVERED).all()


@pytest.mark.parametrize("backend", [py] + ([c] if c is not None else []))
def test_retx_limit_drops(backend):
    st, _ = _state()
    backend.rlc_admit(st["ring"], st["qs"], np.arange(2, dtype=np.int64), 64, st["status"])
    args = (st["delivered"], st["retx"], st["status"], st["cell_of"], 2, st["air_sns"], st["air_done"], st["air_new"])
    dropped = 0
    for e in range(4):
        dropped += tuple(backend.rlc_serve(st["ring"], st["qs"], 4096, 1024, 0.0, 0.9, e * 1000, 1e8, 1000, 3,
                                           *args))[3]
    assert dropped == 2 and st["qs"][1] == 0
    assert (st["status"][:2] == kernels.DROP_RETX).all()


@pytest.mark.parametrize("backend", [py] + ([c] if c is not None else []))
def test_tail_drop_admission(backend):
    st, _ = _state(cap=4)
    st["ring"] = np.zeros(5, dtype=np.int64)
    n = backend.rlc_admit(st["ring"], st["qs"], np.arange(6, dtype=np.int64), 4, st["status"])
    assert n == 4 and st["status"][4] == kernels.DROP_OVERFLOW and st["status"][5] == kernels.DROP_OVERFLOW


@needs_c
def test_whole_run_identical_across_backends(tmp_path):
    import filecmp
    import os
    import subprocess
    import sys
    outs = {}
    for pure in ("0", "1"):
        env = {k: v for k, v in os.environ.items() if k != "DCSIM_PURE_PYTHON"}
        if pure == "1":
            env["DCSIM_PURE_PYTHON"] = "1"
        out = tmp_path / pure
        subprocess.run([sys.executable, "-m", "dcsim.cli", "--paired", "--runs", "1", "--duration-s", "3",
                        "--out", str(out)], env=env, check=True, capture_output=True)
        outs[pure] = out / "dx2_1000us_speed_2"
    for rel in ("dc/run0/summary.csv", "hh/run0/summary.csv", "hh/run0/latency_series.csv", "paired.csv"):
        assert filecmp.cmp(outs["0"] / rel, outs["1"] / rel, shallow=False)
