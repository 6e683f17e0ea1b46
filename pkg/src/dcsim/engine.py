"""Discrete-event engine: integer-microsecond clock, FIFO tie-broken event
queue and named random streams.

The streams are what make a dual-connectivity run and a hard-handover run
comparable under one seed: each stream's sequence depends only on the master
seed and the stream name, so draws made by the control plane in one mode can
never shift the channel realisation seen by the other.
"""
from __future__ import annotations

import heapq
from typing import Any, Callable, Iterable

import numpy as np

STREAM_NAMES = ("channel", "phy", "control", "traffic")
_STREAM_KEYS = {name: i for i, name in enumerate(STREAM_NAMES)}

MAX_TIME_US = 10**12


class SchedulingError(RuntimeError):
    """An event was scheduled before the current clock."""


class RngStream:
    """Deterministic generator keyed by ``(master_seed, name)``.

    Uniform and normal draws come from two child generators of the stream's
    seed sequence, so the k-th uniform depends only on the seed, the name and
    k. Values are served from pre-generated blocks.
    """

    _BLOCK = 4096

    def __init__(self, master_seed: int, name: str):
        if name not in _STREAM_KEYS:
            raise ValueError(f"unknown stream {name!r}; expected one of {STREAM_NAMES}")
        self.name = name
        self.master_seed = int(master_seed)
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(_STREAM_KEYS[name],))
        uni_seq, norm_seq = ss.spawn(2)
        self._uni_gen = np.random.Generator(np.random.PCG64(uni_seq))
        self._norm_gen = np.random.Generator(np.random.PCG64(norm_seq))
        self._uni = self._uni_gen.random(self._BLOCK)
        self._norm = self._norm_gen.standard_normal(self._BLOCK)
        self._ui = 0
        self._ni = 0
        self.uniform_draws = 0
        self.normal_draws = 0

    def uniform(self) -> float:
        if self._ui == self._BLOCK:
            self._uni = self._uni_gen.random(self._BLOCK)
            self._ui = 0
        v = self._uni[self._ui]
        self._ui += 1
        self.uniform_draws += 1
        return float(v)

    def normal(self) -> float:
        if self._ni == self._BLOCK:
            self._norm = self._norm_gen.standard_normal(self._BLOCK)
            self._ni = 0
        v = self._norm[self._ni]
        self._ni += 1
        self.normal_draws += 1
        return float(v)

    def normals(self, n: int) -> np.ndarray:
        out = np.empty(n)
        for i in range(n):
            out[i] = self.normal()
        return out

    @property
    def draws(self) -> int:
        return self.uniform_draws + self.normal_draws


def draw_uniform(stream: RngStream) -> float:
    return stream.uniform()


def make_streams(master_seed: int) -> dict[str, RngStream]:
    return {name: RngStream(master_seed, name) for name in STREAM_NAMES}


class Engine:
    """Single-threaded event loop.

    Events are ordered by ``(fire_at, seq)`` where ``seq`` is a global
    insertion counter, so simultaneous events fire in scheduling order.
    """

    def __init__(self, trace: bool = False):
        self.now = 0
        self._queue: list[tuple[int, int, str, Callable[..., Any], Any]] = []
        self._seq = 0
        self.fired = 0
        self.trace = trace
        self.log: list[tuple[int, int, str]] = []

    def schedule(self, fire_at: int, tag: str, handler: Callable[..., Any], payload: Any = None) -> int:
        fire_at = int(fire_at)
        if fire_at < self.now:
            raise SchedulingError(f"event {tag!r} at t={fire_at} us is before clock {self.now} us")
        if fire_at > MAX_TIME_US:
            raise SchedulingError(f"event {tag!r} at t={fire_at} us exceeds the run time base")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, (fire_at, seq, tag, handler, payload))
        return seq

    def schedule_in(self, delay: int, tag: str, handler: Callable[..., Any], payload: Any = None) -> int:
        return self.schedule(self.now + int(delay), tag, handler, payload)

    def run_until(self, end: int) -> None:
        q = self._queue
        pop = heapq.heappop
        log = self.log if self.trace else None
        while q and q[0][0] <= end:
            fire_at, seq, tag, handler, payload = pop(q)
            self.now = fire_at
            self.fired += 1
            if log is not None:
                log.append((fire_at, seq, tag))
            handler(payload)
        if end > self.now:
            self.now = end

    def pending(self) -> int:
        return len(self._queue)

    def write_log(self, lines: Iterable[tuple[int, int, str]] | None, path) -> None:
        rows = self.log if lines is None else lines
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("time_us,seq,handler_tag\n")
            for t, s, tag in rows:
                fh.write(f"{t},{s},{tag}\n")
