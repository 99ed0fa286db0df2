"""Loss probability of a multi-channel loss system with capacity sharing.

Three routes to the same quantity: the exact Markov chain (``exact``), the
fractional Erlang B approximation (``approx``) and discrete-event
simulation (``sim``).
"""
from capshare.approx import approximate_loss, erlang_b_fractional, erlang_b_integer
from capshare.exact import loss_probability_exact
from capshare.model import RequestClass, ServiceLength, SystemConfig, offered_loads, validate

__version__ = "0.1.0"

__all__ = [
    "RequestClass",
    "ServiceLength",
    "SystemConfig",
    "approximate_loss",
    "erlang_b_fractional",
    "erlang_b_integer",
    "loss_probability_exact",
    "offered_loads",
    "validate",
]
