"""Named function shapes used by scenario files.

Scenario configs refer to functions declaratively, e.g.
``gaussian(center=0, width=1, height=1)`` or ``indicator(a=-1, b=0)``,
which keeps the files portable and the parser strict.  All shapes are
vectorised callables of one real argument.
"""

from __future__ import annotations

import re

import numpy as np

__all__ = ["parse_shape", "shape_names", "ShapeError"]


class ShapeError(ValueError):
    pass


def _gaussian(center=0.0, width=1.0, height=1.0):
    if width <= 0:
        raise ShapeError("gaussian width must be positive")
    return lambda x: height * np.exp(-(((np.asarray(x) - center) / width) ** 2))


def _indicator(a=0.0, b=1.0):
    if not a < b:
        raise ShapeError("indicator needs a < b")
    return lambda x: ((np.asarray(x) >= a) & (np.asarray(x) <= b)).astype(float)


def _sine(freq=1.0, amp=1.0, phase=0.0):
    return lambda x: amp * np.sin(freq * np.asarray(x) + phase)


def _constant(value=0.0):
    return lambda x: np.full_like(np.asarray(x, dtype=float), float(value))


def _tanh(scale=1.0, amp=1.0):
    return lambda x: amp * np.tanh(scale * np.asarray(x))


_REGISTRY = {
    "gaussian": _gaussian,
    "indicator": _indicator,
    "sine": _sine,
    "constant": _constant,
    "tanh": _tanh,
}

_CALL_RE = re.compile(r"^\s*([a-z_]+)\s*\(([^()]*)\)\s*$")
_NUM_RE = re.compile(r"^[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$")


def shape_names() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def parse_shape(text: str):
    """Turn a declaration like ``gaussian(center=0, width=1)`` into a callable."""
    m = _CALL_RE.match(text)
    if not m:
        raise ShapeError(f"not a shape declaration: {text!r}")
    name, argstr = m.group(1), m.group(2).strip()
    if name not in _REGISTRY:
        raise ShapeError(f"unknown shape {name!r}; available: {', '.join(shape_names())}")
    kwargs = {}
    if argstr:
        for part in argstr.split(","):
            if "=" not in part:
                raise ShapeError(f"shape arguments must be key=value, got {part.strip()!r}")
            key, val = (s.strip() for s in part.split("=", 1))
            if not _NUM_RE.match(val):
                raise ShapeError(f"shape argument {key}={val!r} is not numeric")
            kwargs[key] = float(val)
    try:
        return _REGISTRY[name](**kwargs)
    except TypeError as exc:
        raise ShapeError(f"bad arguments for shape {name!r}: {exc}") from None
