"""JSON config files.

Schema::

    {"channels": 3,
     "classes": [{"arrival_rate": 1.0, "channels_required": 2,
                  "service": {"type": "exponential", "mean": 1.0}}]}

``service.type`` is one of ``exponential``, ``erlang2`` or
``hyperexp2_balanced``; the last accepts an optional ``scv`` (default 2.0).
"""
from __future__ import annotations

import json
from pathlib import Path

from capshare.errors import ParseError
from capshare.model import DEFAULT_SCV, HYPEREXP2, KINDS, RequestClass, ServiceLength, SystemConfig, validate


def _require(obj, key, where):
    if not isinstance(obj, dict):
        raise ParseError("expected an object", field=where)
    if key not in obj:
        raise ParseError("missing required field", field=f"{where}.{key}" if where else key)
    return obj[key]


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"expected a number, got {value!r}", field=where)
    return float(value)


def _integer(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"expected an integer, got {value!r}", field=where)
    return value


def config_from_dict(data) -> SystemConfig:
    channels = _integer(_require(data, "channels", ""), "channels")
    raw_classes = _require(data, "classes", "")
    if not isinstance(raw_classes, list):
        raise ParseError("expected a list", field="classes")
    classes = []
    for i, raw in enumerate(raw_classes):
        where = f"classes[{i}]"
        svc = _require(raw, "service", where)
        kind = _require(svc, "type", f"{where}.service")
        if kind not in KINDS:
            raise ParseError(f"unknown distribution type {kind!r}; expected one of {', '.join(KINDS)}",
                             field=f"{where}.service.type")
        mean = _number(_require(svc, "mean", f"{where}.service"), f"{where}.service.mean")
        scv = DEFAULT_SCV
        if kind == HYPEREXP2 and "scv" in svc:
            scv = _number(svc["scv"], f"{where}.service.scv")
        classes.append(RequestClass(
            _number(_require(raw, "arrival_rate", where), f"{where}.arrival_rate"),
            _integer(_require(raw, "channels_required", where), f"{where}.channels_required"),
            ServiceLength(kind, mean, scv),
        ))
    return validate(SystemConfig(channels, classes))


def config_to_dict(config: SystemConfig) -> dict:
    classes = []
    for c in config.classes:
        svc = {"type": c.service.kind, "mean": c.service.mean}
        if c.service.kind == HYPEREXP2:
            svc["scv"] = c.service.scv
        classes.append({"arrival_rate": c.arrival_rate, "channels_required": c.channels_required, "service": svc})
    return {"channels": config.channels, "classes": classes}


def loads_config(text: str) -> SystemConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    return config_from_dict(data)


def parse_config(path) -> SystemConfig:
    """Read and validate a config file; FileNotFoundError propagates unchanged."""
    return loads_config(Path(path).read_text(encoding="utf-8"))


def dumps_config(config: SystemConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2) + "\n"
