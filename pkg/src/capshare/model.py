"""System configuration and the offered-load reduction.

A configuration is an ``m``-channel system fed by several Poisson request
classes. Class ``i`` arrives at rate ``lambda_i``, needs ``d_i`` channels to
be served at rate 1 and has a request length with mean ``b_i``.

The reduction collapses the classes into a single-class loss system with
offered load ``A = sum(lambda_i * b_i)`` and a (possibly fractional) number
of equivalent servers ``v = m / d_bar`` where ``d_bar`` is the load-weighted
mean of the ``d_i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from capshare.errors import InvalidScv, ValidationError, Violation

EXPONENTIAL = "exponential"
ERLANG2 = "erlang2"
HYPEREXP2 = "hyperexp2_balanced"
KINDS = (EXPONENTIAL, ERLANG2, HYPEREXP2)

DEFAULT_SCV = 2.0


@dataclass(frozen=True)
class ServiceLength:
    """Request length distribution (unit-rate service time).

    ``scv`` is only meaningful for the balanced hyperexponential and is
    ignored for the other two kinds.
    """

    kind: str
    mean: float
    scv: float = DEFAULT_SCV

    @classmethod
    def exponential(cls, mean):
        return cls(EXPONENTIAL, mean)

    @classmethod
    def erlang2(cls, mean):
        return cls(ERLANG2, mean)

    @classmethod
    def hyperexp2(cls, mean, scv=DEFAULT_SCV):
        return cls(HYPEREXP2, mean, scv)

    def squared_cv(self):
        return {EXPONENTIAL: 1.0, ERLANG2: 0.5}.get(self.kind, self.scv)


@dataclass(frozen=True)
class RequestClass:
    arrival_rate: float
    channels_required: int
    service: ServiceLength


@dataclass(frozen=True)
class SystemConfig:
    channels: int
    classes: tuple

    def __init__(self, channels, classes):
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "classes", tuple(classes))

    @classmethod
    def single(cls, channels, arrival_rate, channels_required, service):
        return cls(channels, [RequestClass(arrival_rate, channels_required, service)])


@dataclass(frozen=True)
class LoadSummary:
    per_class_load: tuple
    total_load: float
    mean_channels: float
    equivalent_servers: float


@dataclass(frozen=True)
class Phase:
    """One exponential phase of a phase-type length.

    ``successor`` is the index of the next phase, or ``None`` when leaving
    this phase completes the request.
    """

    initial: float
    rate: float
    successor: Optional[int]


def _positive_finite(x):
    try:
        return math.isfinite(x) and x > 0
    except TypeError:
        return False


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def find_violations(config: SystemConfig) -> list:
    out = []
    m = config.channels
    if not _is_int(m) or m < 1:
        out.append(Violation("NonPositiveChannels", f"channels must be a positive integer, got {m!r}"))
    if not config.classes:
        out.append(Violation("EmptyClassList", "at least one request class is required"))
    for i, c in enumerate(config.classes):
        if not _positive_finite(c.arrival_rate):
            out.append(Violation("NonPositiveRate", f"class {i}: arrival_rate must be > 0, got {c.arrival_rate!r}"))
        d = c.channels_required
        if not _is_int(d) or d < 1:
            out.append(Violation("NonPositiveChannelsRequired",
                                 f"class {i}: channels_required must be a positive integer, got {d!r}"))
        elif _is_int(m) and d > m:
            out.append(Violation("ChannelsRequiredExceedsTotal",
                                 f"class {i}: channels_required {d} exceeds channels {m}"))
        s = c.service
        if s.kind not in KINDS:
            out.append(Violation("UnknownDistribution", f"class {i}: unknown service kind {s.kind!r}"))
        if not _positive_finite(s.mean):
            out.append(Violation("NonPositiveMean", f"class {i}: mean length must be > 0 and finite, got {s.mean!r}"))
        if s.kind == HYPEREXP2 and not (isinstance(s.scv, (int, float)) and math.isfinite(s.scv) and s.scv >= 1):
            out.append(Violation("InvalidScv", f"class {i}: scv must be >= 1, got {s.scv!r}"))
    return out


def validate(config: SystemConfig) -> SystemConfig:
    """Return ``config`` unchanged, or raise ValidationError listing every violation."""
    violations = find_violations(config)
    if violations:
        raise ValidationError(violations)
    return config


def offered_loads(config: SystemConfig) -> LoadSummary:
    validate(config)
    loads = tuple(c.arrival_rate * c.service.mean for c in config.classes)
    total = math.fsum(loads)
    d_bar = math.fsum(a * c.channels_required for a, c in zip(loads, config.classes)) / total
    # rounding can push a weighted mean of equal values off the bounds
    ds = [c.channels_required for c in config.classes]
    d_bar = min(max(d_bar, min(ds)), max(ds))
    return LoadSummary(loads, total, d_bar, config.channels / d_bar)


def hyperexp2_branches(mean, scv):
    """Branch probabilities and rates ``(a1, a2, mu1, mu2)`` of the balanced H2 with given mean and scv."""
    if not scv >= 1:
        raise InvalidScv(scv)
    a1 = 0.5 * (1.0 + math.sqrt((scv - 1.0) / (scv + 1.0)))
    a2 = 1.0 - a1
    return a1, a2, 2.0 * a1 / mean, 2.0 * a2 / mean


def phase_representation(dist: ServiceLength) -> Sequence[Phase]:
    if dist.kind == EXPONENTIAL:
        return (Phase(1.0, 1.0 / dist.mean, None),)
    if dist.kind == ERLANG2:
        rate = 2.0 / dist.mean
        return (Phase(1.0, rate, 1), Phase(0.0, rate, None))
    if dist.kind == HYPEREXP2:
        a1, a2, mu1, mu2 = hyperexp2_branches(dist.mean, dist.scv)
        return (Phase(a1, mu1, None), Phase(a2, mu2, None))
    raise ValidationError([Violation("UnknownDistribution", f"unknown service kind {dist.kind!r}")])
