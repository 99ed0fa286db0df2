"""Approximate loss probability via Erlang B with a fractional server count.

The multi-class system is replaced by a single-class loss system with the
offered load and equivalent server count from ``model.offered_loads``; the
loss probability is then the continuous extension of the first Erlang
formula,

    E(A, v) = A**v * exp(-A) / Gamma(v + 1, A),

which agrees with the classic formula whenever ``v`` is an integer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from capshare.errors import DomainError
from capshare.model import SystemConfig, offered_loads

MAX_ITER = 500
EPS = 1e-15
_TINY = 1e-300


@dataclass(frozen=True)
class ErlangBResult:
    blocking: float
    load: float
    servers: float


def _check_finite(**kw):
    for name, x in kw.items():
        if not isinstance(x, (int, float)) or not math.isfinite(x):
            raise DomainError(f"{name} must be finite, got {x!r}")


def _log_lower_series(s, x):
    # log of gamma_lower(s, x) = x^s e^-x sum_n x^n / (s (s+1) ... (s+n))
    term = 1.0 / s
    total = term
    ap = s
    for _ in range(MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * EPS:
            break
    else:
        raise DomainError(f"series for Gamma({s}, {x}) did not converge")
    return s * math.log(x) - x + math.log(total)


def _log_upper_cf(s, x):
    # modified Lentz evaluation of the continued fraction for Gamma(s, x)
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER + 1):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            break
    else:
        raise DomainError(f"continued fraction for Gamma({s}, {x}) did not converge")
    return s * math.log(x) - x + math.log(h)


def log_upper_incomplete_gamma(s: float, x: float) -> float:
    """Natural log of the upper incomplete gamma function Gamma(s, x)."""
    _check_finite(s=s, x=x)
    if s <= 0:
        raise DomainError(f"s must be > 0, got {s}")
    if x < 0:
        raise DomainError(f"x must be >= 0, got {x}")
    log_complete = math.lgamma(s)
    if x == 0:
        return log_complete
    if x < s + 1.0:
        lower_fraction = math.exp(_log_lower_series(s, x) - log_complete)
        return log_complete + math.log1p(-lower_fraction)
    return _log_upper_cf(s, x)


def upper_incomplete_gamma(s: float, x: float) -> float:
    """Gamma(s, x) = integral from x to infinity of y**(s-1) * exp(-y) dy.

    Returns ``inf`` where the value exceeds the double range; use
    :func:`log_upper_incomplete_gamma` in that regime.
    """
    log_value = log_upper_incomplete_gamma(s, x)
    try:
        return math.exp(log_value)
    except OverflowError:
        return math.inf


def _check_load(A):
    _check_finite(A=A)
    if A <= 0:
        raise DomainError(f"offered load must be > 0, got {A}")


def erlang_b_integer(A: float, v: int) -> float:
    """Classic Erlang B blocking for ``v`` servers, by the stable recursion."""
    _check_load(A)
    if isinstance(v, bool) or int(v) != v or v < 0:
        raise DomainError(f"server count must be a non-negative integer, got {v!r}")
    b = 1.0
    for k in range(1, int(v) + 1):
        b = A * b / (k + A * b)
    return b


def erlang_b_fractional(A: float, v: float) -> float:
    _check_load(A)
    _check_finite(v=v)
    if v < 0:
        raise DomainError(f"server count must be >= 0, got {v}")
    if v == 0:
        return 1.0
    log_e = v * math.log(A) - A - log_upper_incomplete_gamma(v + 1.0, A)
    return min(math.exp(log_e), 1.0)


def approximate_loss(config: SystemConfig) -> ErlangBResult:
    loads = offered_loads(config)
    A, v = loads.total_load, loads.equivalent_servers
    return ErlangBResult(erlang_b_fractional(A, v), A, v)
