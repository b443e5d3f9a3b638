"""Unit parsing for configuration values and a float-safe ceiling."""

import math
import re

from .errors import ConfigError

BITS_PER_BYTE = 8

_DURATION = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "μs": 1e-6, "ns": 1e-9}
_RATE = {"bps": 1.0, "kbps": 1e3, "mbps": 1e6, "gbps": 1e9}
_SIZE = {"b": 8, "bytes": 8, "bit": 1, "bits": 1}
_NUM_UNIT = re.compile(r"^\s*([-+0-9.eE]+)\s*([A-Za-zµμ]*)\s*$")


def guarded_ceil(x):
    """Ceiling that ignores float noise just above an exact integer.

    >>> guarded_ceil(79.99999999999)
    80
    >>> guarded_ceil(80.0000000000001)
    80
    >>> guarded_ceil(23.4375)
    24
    """
    return math.ceil(x - 1e-9 * max(1.0, abs(x)))


def _split(value, what):
    if isinstance(value, bool):
        raise ConfigError(f"{what}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value), ""
    m = _NUM_UNIT.match(str(value))
    if not m:
        raise ConfigError(f"{what}: cannot parse {value!r}")
    try:
        return float(m.group(1)), m.group(2)
    except ValueError:
        raise ConfigError(f"{what}: cannot parse {value!r}") from None


def duration(value, what="duration"):
    """Seconds from a number (already seconds) or a string such as ``"2ms"`` or ``"500us"``.

    >>> duration("500us")
    0.0005
    >>> duration(2e-3)
    0.002
    """
    x, unit = _split(value, what)
    if unit and unit not in _DURATION:
        raise ConfigError(f"{what}: unknown time unit {unit!r} in {value!r}")
    return x * _DURATION.get(unit, 1.0)


def rate(value, what="rate"):
    """Bits per second from a number or a string such as ``"1Gbps"``."""
    x, unit = _split(value, what)
    key = unit.lower()
    if unit and key not in _RATE:
        raise ConfigError(f"{what}: unknown rate unit {unit!r} in {value!r}")
    return x * _RATE.get(key, 1.0)


def size_bits(value, what="size"):
    """Bits from a frame size. Bare numbers are bytes; ``"512bits"`` is taken as bits.

    >>> size_bits(64)
    512.0
    >>> size_bits("22118bits")
    22118.0
    """
    x, unit = _split(value, what)
    key = unit.lower()
    if unit and key not in _SIZE:
        raise ConfigError(f"{what}: unknown size unit {unit!r} in {value!r}")
    return x * _SIZE.get(key, BITS_PER_BYTE)


def expand_range(spec, what="grid"):
    """Grid values from a list or an inclusive ``"[start:step:stop]"`` string.

    >>> expand_range("[1:5:21]")
    [1.0, 6.0, 11.0, 16.0, 21.0]
    >>> expand_range([0.1, 0.5])
    [0.1, 0.5]
    """
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    if isinstance(spec, dict):
        start, stop = float(spec["start"]), float(spec["stop"])
        if "num" in spec:
            n = int(spec["num"])
            if n < 1:
                raise ConfigError(f"{what}: num must be >= 1")
            if n == 1:
                return [start]
            return [start + (stop - start) * i / (n - 1) for i in range(n)]
        return _stepped(start, float(spec["step"]), stop, what)
    m = re.match(r"^\s*\[\s*([^:\]]+):([^:\]]+):([^:\]]+)\]\s*$", str(spec))
    if not m:
        raise ConfigError(f"{what}: expected a list or '[start:step:stop]', got {spec!r}")
    start, step, stop = (float(g) for g in m.groups())
    return _stepped(start, step, stop, what)


def _stepped(start, step, stop, what):
    if step <= 0:
        raise ConfigError(f"{what}: step must be positive")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    if n < 1:
        raise ConfigError(f"{what}: empty range")
    return [round(start + i * step, 12) for i in range(n)]
