"""Exact loss probability from the continuous-time Markov chain.

State: counts of fully served requests per (class, phase) plus at most one
degraded request (class, phase, allocated channels). A degraded request only
appears when an arrival takes the last idle channels, and freed channels go
to it before becoming idle, so a degraded request implies zero idle
channels. Both facts are asserted during enumeration.

Phase transitions of the degraded request run at ``allocated / d`` times
the nominal phase rate. Poisson arrivals see time averages, so the loss
probability of every class equals the stationary probability of zero idle
channels.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from capshare.errors import SingularSystem, StateSpaceTooLarge, UnsupportedDistribution
from capshare.model import KINDS, SystemConfig, phase_representation, validate

DEFAULT_MAX_STATES = 20_000
RESIDUAL_TOL = 1e-10


class Degraded(NamedTuple):
    cls: int
    phase: int
    allocated: int


class MarkovState(NamedTuple):
    full_counts: tuple  # flat, indexed by GeneratorMatrix.slots
    degraded: Optional[Degraded]


@dataclass
class GeneratorMatrix:
    config: SystemConfig
    slots: list  # (class, phase) for each entry of full_counts
    states: list
    rates: np.ndarray
    idle: np.ndarray

    @property
    def size(self):
        return len(self.states)

    def index(self, state):
        return self.states.index(state)


@dataclass
class StationaryDistribution:
    probabilities: np.ndarray
    residual: float


def _occupied(state, slot_d):
    busy = sum(n * d for n, d in zip(state.full_counts, slot_d))
    if state.degraded is not None:
        busy += state.degraded.allocated
    return busy


def _transitions(state, m, config, phases, slots, slot_of, slot_d):
    """Yield (target state, rate) for every event leaving ``state``."""
    idle = m - _occupied(state, slot_d)
    full, deg = state.full_counts, state.degraded
    if deg is not None and idle != 0:
        raise AssertionError(f"degraded request with {idle} idle channels in {state}")

    for i, c in enumerate(config.classes):
        if idle == 0:
            continue
        for j, ph in enumerate(phases[i]):
            if ph.initial == 0:
                continue
            rate = c.arrival_rate * ph.initial
            if idle >= c.channels_required:
                counts = list(full)
                counts[slot_of[i, j]] += 1
                yield MarkovState(tuple(counts), deg), rate
            else:
                if deg is not None:
                    raise AssertionError(f"second degraded request in {state}")
                yield MarkovState(full, Degraded(i, j, idle)), rate

    for s, n in enumerate(full):
        if n == 0:
            continue
        i, j = slots[s]
        ph = phases[i][j]
        counts = list(full)
        counts[s] -= 1
        if ph.successor is not None:
            counts[slot_of[i, ph.successor]] += 1
            yield MarkovState(tuple(counts), deg), n * ph.rate
            continue
        new_deg = deg
        if deg is not None:
            d_deg = config.classes[deg.cls].channels_required
            grant = min(slot_d[s], d_deg - deg.allocated)
            if deg.allocated + grant == d_deg:
                counts[slot_of[deg.cls, deg.phase]] += 1
                new_deg = None
            else:
                new_deg = deg._replace(allocated=deg.allocated + grant)
        yield MarkovState(tuple(counts), new_deg), n * ph.rate

    if deg is not None:
        d = config.classes[deg.cls].channels_required
        ph = phases[deg.cls][deg.phase]
        rate = ph.rate * deg.allocated / d
        if ph.successor is not None:
            yield MarkovState(full, deg._replace(phase=ph.successor)), rate
        else:
            yield MarkovState(full, None), rate


def build_state_space(config: SystemConfig, max_states: int = DEFAULT_MAX_STATES) -> GeneratorMatrix:
    """Enumerate states reachable from the empty system and assemble the generator."""
    validate(config)
    for c in config.classes:
        if c.service.kind not in KINDS:
            raise UnsupportedDistribution(c.service.kind)
    m = config.channels
    phases = [phase_representation(c.service) for c in config.classes]
    slots = [(i, j) for i, ph in enumerate(phases) for j in range(len(ph))]
    slot_of = {ij: s for s, ij in enumerate(slots)}
    slot_d = [config.classes[i].channels_required for i, _ in slots]

    start = MarkovState((0,) * len(slots), None)
    index = {start: 0}
    states = [start]
    edges = []
    queue = deque([start])
    while queue:
        state = queue.popleft()
        src = index[state]
        for target, rate in _transitions(state, m, config, phases, slots, slot_of, slot_d):
            if rate == 0:
                continue
            dst = index.get(target)
            if dst is None:
                if len(states) >= max_states:
                    raise StateSpaceTooLarge(f"more than {max_states} reachable states")
                dst = index[target] = len(states)
                states.append(target)
                queue.append(target)
            edges.append((src, dst, rate))

    n = len(states)
    Q = np.zeros((n, n))
    for src, dst, rate in edges:
        if src != dst:
            Q[src, dst] += rate
    Q[np.diag_indices(n)] = -Q.sum(axis=1)
    idle = np.array([m - _occupied(s, slot_d) for s in states])
    return GeneratorMatrix(config, slots, states, Q, idle)


def is_irreducible(gen: GeneratorMatrix) -> bool:
    """True when every state can reach state 0 (the empty system)."""
    n = gen.size
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = [0]
    incoming = gen.rates.T > 0
    while frontier:
        j = frontier.pop()
        for i in np.flatnonzero(incoming[j] & ~seen):
            seen[i] = True
            frontier.append(i)
    return bool(seen.all())


def stationary_distribution(gen: GeneratorMatrix) -> StationaryDistribution:
    """Solve pi Q = 0, sum(pi) = 1 by a dense LU solve with partial pivoting."""
    Q = gen.rates
    n = Q.shape[0]
    # last balance equation is replaced by the normalisation row
    lhs = Q.T.copy()
    lhs[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(pi)):
        raise SingularSystem("non-finite stationary vector")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    residual = float(np.abs(pi @ Q).max()) if n else 0.0
    if residual > RESIDUAL_TOL * max(1.0, float(np.abs(Q).max())):
        raise SingularSystem(f"balance residual {residual:.3e} exceeds tolerance")
    return StationaryDistribution(pi, residual)


def loss_probability_exact(config: SystemConfig, max_states: int = DEFAULT_MAX_STATES) -> float:
    gen = build_state_space(config, max_states)
    pi = stationary_distribution(gen).probabilities
    return float(pi[gen.idle == 0].sum())


def describe_state(gen: GeneratorMatrix, state: MarkovState) -> str:
    parts = [f"c{i}p{j}x{n}" for (i, j), n in zip(gen.slots, state.full_counts) if n]
    full = " ".join(parts) if parts else "-"
    deg = state.degraded
    deg_text = f"c{deg.cls}p{deg.phase}@{deg.allocated}" if deg else "-"
    return f"full[{full}] degraded[{deg_text}]"


def dump_chain(gen: GeneratorMatrix) -> str:
    """Plain-text adjacency listing, one state per line."""
    lines = []
    for k, state in enumerate(gen.states):
        out = [f"{j}:{gen.rates[k, j]:.12g}" for j in np.flatnonzero(gen.rates[k]) if j != k]
        lines.append(f"{k}\t{describe_state(gen, state)}\tidle={gen.idle[k]}\t-> {' '.join(out)}")
    return "\n".join(lines) + "\n"
