"""Discrete-event simulation of the capacity-sharing loss system."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, TextIO

import numpy as np
from scipy import stats

from capshare.errors import InvalidParameters
from capshare.model import SystemConfig, validate
from capshare.sim import engine, kernel
from capshare.sim.engine import (
    ActiveRequest,
    SimulationState,
    check_invariants,
    step_arrival,
    step_departure,
)

__all__ = [
    "ActiveRequest",
    "LossEstimate",
    "SimulationState",
    "check_invariants",
    "replication_rng",
    "run",
    "step_arrival",
    "step_departure",
]

MIN_ARRIVALS = 1000


@dataclass(frozen=True)
class LossEstimate:
    point: float
    ci_low: float
    ci_high: float
    per_class: tuple
    per_class_se: tuple
    replications: int
    arrivals_total: int
    replication_points: tuple
    time_average: float  # fraction of time with zero idle channels
    events: int
    max_work_error: float
    invariant_violations: int

    @property
    def std_error(self):
        r = self.replications
        return float(np.std(self.replication_points, ddof=1) / math.sqrt(r))


def replication_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def _mean_ci(xs, level=0.95):
    xs = np.asarray(xs, dtype=float)
    mean = float(xs.mean())
    se = float(xs.std(ddof=1) / math.sqrt(len(xs)))
    half = float(stats.t.ppf(0.5 + level / 2, len(xs) - 1)) * se
    return mean, max(mean - half, 0.0), min(mean + half, 1.0), se


def run(
    config: SystemConfig,
    arrivals_per_replication: int,
    replications: int,
    warmup_fraction: float = 0.1,
    seed: int = 0,
    *,
    engine_name: str = "compiled",
    check_invariants: bool = False,
    trace: Optional[TextIO] = None,
) -> LossEstimate:
    """Estimate the loss probability from independent replications.

    Each replication simulates ``arrivals_per_replication`` arrivals from an
    empty system and discards the first ``warmup_fraction`` of them. The
    point estimate is the mean of the per-replication loss fractions with a
    Student-t 95% interval. ``engine_name="reference"`` uses the pure-Python
    engine (needed for ``trace``); results are identical either way.
    """
    validate(config)
    if int(arrivals_per_replication) != arrivals_per_replication or arrivals_per_replication < MIN_ARRIVALS:
        raise InvalidParameters(f"arrivals_per_replication must be an integer >= {MIN_ARRIVALS}")
    if int(replications) != replications or replications < 2:
        raise InvalidParameters("replications must be an integer >= 2")
    if not 0.0 <= warmup_fraction < 1.0:
        raise InvalidParameters("warmup_fraction must lie in [0, 1)")
    if engine_name not in ("compiled", "reference"):
        raise InvalidParameters(f"unknown engine {engine_name!r}")
    if trace is not None and engine_name != "reference":
        raise InvalidParameters("event tracing needs engine_name='reference'")

    n = int(arrivals_per_replication)
    warmup = int(warmup_fraction * n)
    n_cls = len(config.classes)
    lam = np.array([c.arrival_rate for c in config.classes], dtype=np.float64)
    demand = np.array([c.channels_required for c in config.classes], dtype=np.int64)
    params = engine.service_params(config)

    points, per_class, blocked, window = [], [], 0.0, 0.0
    events, work_err, violations, counted = 0, 0.0, 0, 0
    for r in range(int(replications)):
        rng = replication_rng(seed, r)
        if engine_name == "compiled":
            out = kernel.run_replication(config.channels, lam, demand, params, n, warmup, rng, check_invariants)
            arr, lost = out[:n_cls].astype(np.int64), out[n_cls:2 * n_cls].astype(np.int64)
            tail = out[2 * n_cls:]
            rep = engine.ReplicationResult(arr, lost, tail[kernel.R_BLOCKED], tail[kernel.R_WINDOW],
                                           int(tail[kernel.R_EVENTS]), tail[kernel.R_WORK_ERR])
            violations += int(tail[kernel.R_VIOLATIONS])
        else:
            rep = engine.run_replication(config, n, warmup, rng, check=check_invariants, trace=trace)
        points.append(rep.losses.sum() / rep.arrivals.sum())
        per_class.append(np.where(rep.arrivals > 0, rep.losses / np.maximum(rep.arrivals, 1), np.nan))
        blocked += float(rep.blocked_time)
        window += float(rep.window)
        events += rep.events
        work_err = max(work_err, rep.max_work_error)
        counted += int(rep.arrivals.sum())

    point, low, high, _ = _mean_ci(points)
    per_class = np.array(per_class)
    cls_mean = tuple(float(x) for x in np.nanmean(per_class, axis=0))
    cls_se = tuple(float(np.nanstd(col, ddof=1) / math.sqrt(np.count_nonzero(~np.isnan(col))))
                   for col in per_class.T)
    return LossEstimate(
        point=point,
        ci_low=min(low, point),
        ci_high=max(high, point),
        per_class=cls_mean,
        per_class_se=cls_se,
        replications=int(replications),
        arrivals_total=counted,
        replication_points=tuple(float(p) for p in points),
        time_average=float(blocked / window) if window > 0 else float("nan"),
        events=events,
        max_work_error=float(work_err),
        invariant_violations=violations,
    )
