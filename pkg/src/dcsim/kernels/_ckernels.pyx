# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see _pykernels.py for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, ceil

cnp.import_array()

cdef enum:
    IN_FLIGHT = 0
    DELIVERED = 1
    DROP_OVERFLOW = 2
    DROP_RETX = 3


def ar1_filter(const double[::1] z, const double[::1] rho):
    cdef Py_ssize_t n = z.shape[0], k
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double prev, r, c
    if n == 0:
        return out
    prev = z[0]
    o[0] = prev
    for k in range(1, n):
        r = rho[k]
        c = 1.0 - r * r
        if c < 0.0:
            c = 0.0
        prev = r * prev + sqrt(c) * z[k]
        o[k] = prev
    return out


def window_stats(const cnp.int64_t[::1] times, const double[::1] values, cnp.int64_t window,
                 Py_ssize_t n_windows):
    sums_a = np.zeros(n_windows)
    counts_a = np.zeros(n_windows, dtype=np.int64)
    maxs_a = np.zeros(n_windows)
    cdef double[::1] sums = sums_a
    cdef cnp.int64_t[::1] counts = counts_a
    cdef double[::1] maxs = maxs_a
    cdef Py_ssize_t i, m = times.shape[0]
    cdef cnp.int64_t t, w
    cdef double v
    for i in range(m):
        t = times[i]
        if t < 0:
            continue
        w = t // window
        if w >= n_windows:
            continue
        v = values[i]
        sums[w] += v
        if counts[w] == 0 or v > maxs[w]:
            maxs[w] = v
        counts[w] += 1
    return sums_a, counts_a, maxs_a


def rlc_admit(cnp.int64_t[::1] ring, cnp.int64_t[::1] qs, const cnp.int64_t[::1] sns,
              cnp.int64_t capacity_pkts, cnp.int8_t[::1] status):
    cdef Py_ssize_t rsize = ring.shape[0], i, m = sns.shape[0]
    cdef cnp.int64_t head = qs[0], count = qs[1], sn
    cdef cnp.int64_t admitted = 0
    for i in range(m):
        sn = sns[i]
        if count < capacity_pkts:
            ring[(head + count) % rsize] = sn
            count += 1
            admitted += 1
        elif status[sn] != DELIVERED:
            status[sn] = DROP_OVERFLOW
    qs[1] = count
    return admitted


def rlc_serve(cnp.int64_t[::1] ring, cnp.int64_t[::1] qs, cnp.int64_t budget, cnp.int64_t size_bytes,
              double u, double bler, cnp.int64_t start_us, double rate_bps, cnp.int64_t sched_us,
              int max_retx, cnp.int64_t[::1] delivered, cnp.int16_t[::1] retx, cnp.int8_t[::1] status,
              cnp.int8_t[::1] cell_of, int cell_id, cnp.int64_t[::1] air_sns, cnp.int64_t[::1] air_done,
              cnp.int8_t[::1] air_new):
    cdef Py_ssize_t rsize = ring.shape[0]
    cdef cnp.int64_t head = qs[0], count = qs[1], credit = qs[2]
    cdef cnp.int64_t k, i, w, sn, done, removed
    cdef int new = 0, dup = 0, dropped = 0, discarded = 0
    credit += budget
    k = credit // size_bytes
    if k > count:
        k = count
    if k <= 0:
        if count == 0:
            credit = 0
        qs[2] = credit
        return 0, 0, 0, 0, 0
    credit -= k * size_bytes
    if u >= bler:
        for i in range(k):
            sn = ring[(head + i) % rsize]
            done = start_us + sched_us + <cnp.int64_t>ceil((i + 1) * size_bytes * 8.0 * 1e6 / rate_bps)
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
            sn = ring[(head + i) % rsize]
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
    qs[0] = head
    qs[1] = count
    qs[2] = credit
    return k, new, dup, dropped, discarded
