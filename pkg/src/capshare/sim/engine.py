"""Reference discrete-event engine for the capacity-sharing loss system.

Readable and instrumented (tracing, invariant assertions, per-request work
accounting) rather than fast. ``capshare.sim.kernel`` runs the same event
logic compiled and must consume the random stream in the same order.

Random draws per replication, in order:
  * one uniform per class at start-up for its first arrival;
  * at each arrival of class ``i``: one uniform for the next class-``i``
    arrival, then, if the request is admitted, the draws for its length
    (1 for exponential, 2 for Erlang-2, 2 for H2: branch then length).
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np

from capshare.model import EXPONENTIAL, ERLANG2, SystemConfig, hyperexp2_branches

ARRIVAL = 0
COMPLETION = 1
WORK_TOL = 1e-9


@dataclass
class ActiveRequest:
    id: int
    cls: int
    length: float
    remaining_work: float
    allocated: int
    last_update: float
    version: int = 0
    accrued: float = 0.0


@dataclass
class SimulationState:
    config: SystemConfig
    clock: float = 0.0
    idle: int = 0
    active: dict = field(default_factory=dict)
    degraded: Optional[int] = None  # id of the under-served request, if any
    arrivals: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    heap: list = field(default_factory=list)
    seq: int = 0
    next_id: int = 0
    completed: int = 0
    max_work_error: float = 0.0

    def __post_init__(self):
        n = len(self.config.classes)
        self.idle = self.config.channels
        self.arrivals = [0] * n
        self.losses = [0] * n

    def demand(self, cls):
        return self.config.classes[cls].channels_required

    def push(self, time, kind, target, version=0):
        heapq.heappush(self.heap, (time, self.seq, kind, target, version))
        self.seq += 1


def _exp(u):
    return -math.log(1.0 - u)


def service_params(config: SystemConfig):
    """Per-class ``(kind code, mean, a1, mu1, mu2)`` shared with the compiled kernel."""
    out = []
    for c in config.classes:
        s = c.service
        if s.kind == EXPONENTIAL:
            out.append((0, s.mean, 1.0, 1.0 / s.mean, 1.0 / s.mean))
        elif s.kind == ERLANG2:
            out.append((1, s.mean, 1.0, 2.0 / s.mean, 2.0 / s.mean))
        else:
            a1, _, mu1, mu2 = hyperexp2_branches(s.mean, s.scv)
            out.append((2, s.mean, a1, mu1, mu2))
    return np.array(out, dtype=np.float64)


def sample_length(rng, params):
    kind, mean, a1, mu1, mu2 = params
    if kind == 0:
        return mean * _exp(rng.random())
    if kind == 1:
        return 0.5 * mean * (_exp(rng.random()) + _exp(rng.random()))
    if rng.random() < a1:
        return _exp(rng.random()) / mu1
    return _exp(rng.random()) / mu2


def _accrue(state, req):
    rate = req.allocated / state.demand(req.cls)
    work = rate * (state.clock - req.last_update)
    req.remaining_work = max(req.remaining_work - work, 0.0)
    req.accrued += work
    req.last_update = state.clock


def _schedule_completion(state, req):
    req.version += 1
    d = state.demand(req.cls)
    state.push(state.clock + req.remaining_work * d / req.allocated, COMPLETION, req.id, req.version)


def step_arrival(state: SimulationState, cls: int, length: float) -> Optional[ActiveRequest]:
    """Admit (possibly degraded) or lose an arriving request at ``state.clock``."""
    state.arrivals[cls] += 1
    if state.idle == 0:
        state.losses[cls] += 1
        return None
    d = state.demand(cls)
    k = min(state.idle, d)
    req = ActiveRequest(state.next_id, cls, length, length, k, state.clock)
    state.next_id += 1
    state.active[req.id] = req
    state.idle -= k
    if k < d:
        if state.degraded is not None:
            raise AssertionError("second degraded request")
        state.degraded = req.id
    _schedule_completion(state, req)
    return req


def step_departure(state: SimulationState, req: ActiveRequest) -> None:
    """Release a finished request's channels, topping up the degraded request first."""
    _accrue(state, req)
    err = abs(req.accrued - req.length)
    state.max_work_error = max(state.max_work_error, err)
    del state.active[req.id]
    state.completed += 1
    freed = req.allocated
    if state.degraded == req.id:
        state.degraded = None
    elif state.degraded is not None:
        other = state.active[state.degraded]
        _accrue(state, other)
        d = state.demand(other.cls)
        grant = min(freed, d - other.allocated)
        other.allocated += grant
        freed -= grant
        if other.allocated == d:
            state.degraded = None
        _schedule_completion(state, other)
    state.idle += freed


def check_invariants(state: SimulationState) -> None:
    m = state.config.channels
    held = sum(r.allocated for r in state.active.values())
    if state.idle + held != m:
        raise AssertionError(f"channel conservation broken: idle={state.idle} held={held} m={m}")
    under = [r for r in state.active.values() if r.allocated < state.demand(r.cls)]
    if len(under) > 1:
        raise AssertionError(f"{len(under)} degraded requests")
    if under and state.idle != 0:
        raise AssertionError(f"degraded request with {state.idle} idle channels")
    if (under[0].id if under else None) != state.degraded:
        raise AssertionError("degraded marker out of sync")


@dataclass
class ReplicationResult:
    arrivals: np.ndarray  # counted (post warm-up) arrivals per class
    losses: np.ndarray
    blocked_time: float  # time with zero idle channels inside the counting window
    window: float
    events: int
    max_work_error: float


def run_replication(config: SystemConfig, n_arrivals: int, warmup: int, rng,
                    check: bool = False, trace: Optional[TextIO] = None) -> ReplicationResult:
    """Simulate until the ``n_arrivals``-th arrival; count arrivals after the first ``warmup``."""
    params = service_params(config)
    state = SimulationState(config)
    for i, c in enumerate(config.classes):
        state.push(_exp(rng.random()) / c.arrival_rate, ARRIVAL, i)

    seen = 0
    counting = warmup == 0
    base_arr = [0] * len(config.classes)
    base_loss = [0] * len(config.classes)
    blocked = 0.0
    start = 0.0
    events = 0
    while True:
        time, _, kind, target, version = heapq.heappop(state.heap)
        if kind == COMPLETION:
            req = state.active.get(target)
            if req is None or req.version != version:
                continue
        if counting and state.idle == 0:
            blocked += time - state.clock
        state.clock = time
        events += 1
        if kind == ARRIVAL:
            cls = target
            state.push(time + _exp(rng.random()) / config.classes[cls].arrival_rate, ARRIVAL, cls)
            length = sample_length(rng, params[cls]) if state.idle > 0 else 0.0
            req = step_arrival(state, cls, length)
            seen += 1
            if trace is not None:
                alloc = req.allocated if req is not None else 0
                trace.write(f"{time:.9f} {'arrival' if req else 'loss'} {cls} {alloc} {state.idle}\n")
        else:
            step_departure(state, req)
            if trace is not None:
                trace.write(f"{time:.9f} departure {req.cls} {req.allocated} {state.idle}\n")
        if check:
            check_invariants(state)
        if kind == ARRIVAL:
            if seen == warmup and not counting:
                counting = True
                start = state.clock
                base_arr = list(state.arrivals)
                base_loss = list(state.losses)
            if seen == n_arrivals:
                break

    return ReplicationResult(
        np.array(state.arrivals) - np.array(base_arr),
        np.array(state.losses) - np.array(base_loss),
        blocked,
        state.clock - start,
        events,
        state.max_work_error,
    )
