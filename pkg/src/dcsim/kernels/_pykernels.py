"""Reference implementations of the hot kernels in plain Python.

Semantics must match ``_ckernels.pyx`` exactly, including the floating point
expression used for serialization times.
"""
from __future__ import annotations

import math

import numpy as np

IN_FLIGHT = 0
DELIVERED = 1
DROP_OVERFLOW = 2
DROP_RETX = 3


def ar1_filter(z, rho):
    n = len(z)
    out = np.empty(n)
    if n == 0:
        return out
    prev = float(z[0])
    out[0] = prev
    for k in range(1, n):
        r = float(rho[k])
        prev = r * prev + math.sqrt(max(0.0, 1.0 - r * r)) * float(z[k])
        out[k] = prev
    return out


def window_stats(times, values, window, n_windows):
    sums = np.zeros(n_windows)
    counts = np.zeros(n_windows, dtype=np.int64)
    maxs = np.zeros(n_windows)
    for t, v in zip(times.tolist(), values.tolist()):
        if t < 0:
            continue
        w = t // window
        if w >= n_windows:
            continue
        sums[w] += v
        if counts[w] == 0 or v > maxs[w]:
            maxs[w] = v
        counts[w] += 1
    return sums, counts, maxs


def rlc_admit(ring, qs, sns, capacity_pkts, status):
    """Tail-drop admission. Returns the number of packets admitted."""
    size = len(ring)
    head, count = int(qs[0]), int(qs[1])
    admitted = 0
    for sn in sns.tolist():
        if count < capacity_pkts:
            ring[(head + count) % size] = sn
            count += 1
            admitted += 1
        elif status[sn] != DELIVERED:
            status[sn] = DROP_OVERFLOW
    qs[1] = count
    return admitted


def rlc_serve(ring, qs, budget, size_bytes, u, bler, start_us, rate_bps, sched_us, max_retx,
              delivered, retx, status, cell_of, cell_id, air_sns, air_done, air_new):
    """One scheduling burst. Returns (sent, new, dup, dropped, discarded_copies)."""
    rsize = len(ring)
    head, count, credit = int(qs[0]), int(qs[1]), int(qs[2])
    credit += budget
    k = min(count, credit // size_bytes)
    if k <= 0:
        if count == 0:
            credit = 0
        qs[2] = credit
        return 0, 0, 0, 0, 0
    credit -= k * size_bytes
    new = dup = dropped = discarded = 0
    if u >= bler:
        for i in range(k):
            sn = int(ring[(head + i) % rsize])
            done = start_us + sched_us + int(math.ceil((i + 1) * size_bytes * 8.0 * 1e6 / rate_bps))
            air_sns[i] = sn
            air_done[i] = done
            if status[sn] == DELIVERED:
                air_new[i] = 0
                dup += 1
            else:
                air_new[i] = 1
                delivered[sn] = done
                status[sn] = DELIVERED
                cell_of[sn] = cell_id
                new += 1
        head = (head + k) % rsize
        count -= k
    else:
        w = k - 1
        for i in range(k - 1, -1, -1):
            sn = int(ring[(head + i) % rsize])
            if status[sn] == DELIVERED:
                discarded += 1
                continue
            retx[sn] += 1
            if retx[sn] > max_retx:
                status[sn] = DROP_RETX
                dropped += 1
                continue
            ring[(head + w) % rsize] = sn
            w -= 1
        removed = w + 1
        head = (head + removed) % rsize
        count -= removed
        k = 0
    if count == 0:
        credit = 0
    qs[0], qs[1], qs[2] = head, count, credit
    return k, new, dup, dropped, discarded
