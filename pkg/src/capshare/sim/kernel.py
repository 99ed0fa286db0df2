"""Compiled replication loop; mirrors ``engine.run_replication`` event for event.

Requests live in ``m`` slots (each active request holds at least one
channel). The event heap is a growable ``(cap, 5)`` float array of rows
``(time, seq, kind, target, version)`` ordered by ``(time, seq)``; stale
completions are skipped when their slot version no longer matches.
"""
import math

import numba
import numpy as np

ARRIVAL = 0
COMPLETION = 1

# result vector layout (after the 2*N per-class counters)
R_BLOCKED, R_WINDOW, R_EVENTS, R_WORK_ERR, R_VIOLATIONS = range(5)


@numba.njit(cache=True)
def _less(h, a, b):
    return h[a, 0] < h[b, 0] or (h[a, 0] == h[b, 0] and h[a, 1] < h[b, 1])


@numba.njit(cache=True)
def _swap(h, a, b):
    for c in range(5):
        tmp = h[a, c]
        h[a, c] = h[b, c]
        h[b, c] = tmp


@numba.njit(cache=True)
def _push(h, size, time, seq, kind, target, version):
    if size == h.shape[0]:
        bigger = np.empty((2 * h.shape[0], 5))
        bigger[:size] = h[:size]
        h = bigger
    h[size, 0] = time
    h[size, 1] = seq
    h[size, 2] = kind
    h[size, 3] = target
    h[size, 4] = version
    i = size
    while i > 0:
        parent = (i - 1) // 2
        if _less(h, i, parent):
            _swap(h, i, parent)
            i = parent
        else:
            break
    return h


@numba.njit(cache=True)
def _pop(h, size):
    # moves the minimum to row size-1 and restores the heap on rows [0, size-1)
    last = size - 1
    _swap(h, 0, last)
    i = 0
    while True:
        left = 2 * i + 1
        if left >= last:
            break
        child = left
        if left + 1 < last and _less(h, left + 1, left):
            child = left + 1
        if _less(h, child, i):
            _swap(h, i, child)
            i = child
        else:
            break


@numba.njit(cache=True)
def _exp(u):
    return -math.log(1.0 - u)


@numba.njit(cache=True)
def _sample(rng, p):
    kind = int(p[0])
    if kind == 0:
        return p[1] * _exp(rng.random())
    if kind == 1:
        return 0.5 * p[1] * (_exp(rng.random()) + _exp(rng.random()))
    if rng.random() < p[2]:
        return _exp(rng.random()) / p[3]
    return _exp(rng.random()) / p[4]


@numba.njit(cache=True)
def run_replication(m, lam, demand, params, n_arrivals, warmup, rng, check):
    n_cls = lam.shape[0]
    h = np.empty((64 + 8 * m, 5))
    size = 0
    seq = 0

    s_active = np.zeros(m, dtype=np.bool_)
    s_cls = np.zeros(m, dtype=np.int64)
    s_alloc = np.zeros(m, dtype=np.int64)
    s_rem = np.zeros(m)
    s_last = np.zeros(m)
    s_len = np.zeros(m)
    s_acc = np.zeros(m)
    s_ver = np.zeros(m, dtype=np.int64)
    deg = -1

    arrivals = np.zeros(n_cls, dtype=np.int64)
    losses = np.zeros(n_cls, dtype=np.int64)
    base_arr = np.zeros(n_cls, dtype=np.int64)
    base_loss = np.zeros(n_cls, dtype=np.int64)

    for i in range(n_cls):
        h = _push(h, size, _exp(rng.random()) / lam[i], seq, ARRIVAL, i, 0)
        size += 1
        seq += 1

    clock = 0.0
    idle = m
    seen = 0
    counting = warmup == 0
    blocked = 0.0
    start = 0.0
    events = 0
    work_err = 0.0
    violations = 0

    while True:
        _pop(h, size)
        size -= 1
        time = h[size, 0]
        kind = int(h[size, 2])
        target = int(h[size, 3])
        if kind == COMPLETION:
            if not s_active[target] or s_ver[target] != int(h[size, 4]):
                continue
        if counting and idle == 0:
            blocked += time - clock
        clock = time
        events += 1

        if kind == ARRIVAL:
            cls = target
            h = _push(h, size, time + _exp(rng.random()) / lam[cls], seq, ARRIVAL, cls, 0)
            size += 1
            seq += 1
            arrivals[cls] += 1
            if idle == 0:
                losses[cls] += 1
            else:
                length = _sample(rng, params[cls])
                d = demand[cls]
                k = min(idle, d)
                slot = 0
                while s_active[slot]:
                    slot += 1
                s_active[slot] = True
                s_cls[slot] = cls
                s_alloc[slot] = k
                s_rem[slot] = length
                s_last[slot] = clock
                s_len[slot] = length
                s_acc[slot] = 0.0
                idle -= k
                if k < d:
                    if deg >= 0:
                        violations += 1
                    deg = slot
                s_ver[slot] += 1
                h = _push(h, size, clock + s_rem[slot] * d / k, seq, COMPLETION, slot, s_ver[slot])
                size += 1
                seq += 1
            seen += 1
        else:
            r = target
            work = s_alloc[r] / demand[s_cls[r]] * (clock - s_last[r])
            s_acc[r] += work
            err = abs(s_acc[r] - s_len[r])
            if err > work_err:
                work_err = err
            s_active[r] = False
            freed = s_alloc[r]
            if deg == r:
                deg = -1
            elif deg >= 0:
                o = deg
                d = demand[s_cls[o]]
                work = s_alloc[o] / d * (clock - s_last[o])
                s_rem[o] = max(s_rem[o] - work, 0.0)
                s_acc[o] += work
                s_last[o] = clock
                grant = min(freed, d - s_alloc[o])
                s_alloc[o] += grant
                freed -= grant
                if s_alloc[o] == d:
                    deg = -1
                s_ver[o] += 1
                h = _push(h, size, clock + s_rem[o] * d / s_alloc[o], seq, COMPLETION, o, s_ver[o])
                size += 1
                seq += 1
            idle += freed

        if check:
            held = 0
            under = 0
            for s in range(m):
                if s_active[s]:
                    held += s_alloc[s]
                    if s_alloc[s] < demand[s_cls[s]]:
                        under += 1
            if held + idle != m or under > 1 or (under == 1 and idle != 0):
                violations += 1
            if (under == 1) != (deg >= 0):
                violations += 1

        if kind == ARRIVAL:
            if seen == warmup and not counting:
                counting = True
                start = clock
                base_arr[:] = arrivals
                base_loss[:] = losses
            if seen == n_arrivals:
                break

    out = np.zeros(2 * n_cls + 5)
    for i in range(n_cls):
        out[i] = arrivals[i] - base_arr[i]
        out[n_cls + i] = losses[i] - base_loss[i]
    tail = 2 * n_cls
    out[tail + R_BLOCKED] = blocked
    out[tail + R_WINDOW] = clock - start
    out[tail + R_EVENTS] = events
    out[tail + R_WORK_ERR] = work_err
    out[tail + R_VIOLATIONS] = violations
    return out
