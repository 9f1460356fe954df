"""Unit parsing and formatting.

All quantities are normalized to integer base units at parse time:
bytes, bytes/s, flop/s, and nanoseconds for durations.  SI decimal
prefixes only (1 GB = 10^9 bytes), matching the conventions of the
hardware projections this simulator reproduces.
"""

from __future__ import annotations

import re
from decimal import Decimal, InvalidOperation
from fractions import Fraction

from .errors import UnitError

SECOND_NS = 10**9

_SI = {"": 1, "K": 10**3, "M": 10**6, "G": 10**9, "T": 10**12, "P": 10**15}

_DURATION_NS = {
    "ns": 1,
    "us": 10**3,
    "ms": 10**6,
    "s": SECOND_NS,
    "m": 60 * SECOND_NS,
    "h": 3600 * SECOND_NS,
    "d": 86400 * SECOND_NS,
}

_QTY_RE = re.compile(r"^\s*([+-]?[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)\s*([A-Za-z/]*)\s*$")


def _split(text: str) -> tuple[Decimal, str]:
    m = _QTY_RE.match(text)
    if not m:
        raise UnitError(f"cannot parse quantity {text!r}")
    try:
        value = Decimal(m.group(1))
    except InvalidOperation as exc:
        raise UnitError(f"bad number in {text!r}") from exc
    return value, m.group(2)


def _to_int(value: Decimal, scale: int, text: str) -> int:
    scaled = value * scale
    if scaled != scaled.to_integral_value():
        raise UnitError(f"{text!r} does not resolve to a whole base unit")
    return int(scaled)


def _parse_scaled(value, suffixes: str, what: str) -> int:
    """Parse ``value`` against SI-prefixed ``suffixes`` (e.g. "B", "B/s")."""
    if isinstance(value, bool):
        raise UnitError(f"expected {what}, got boolean")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not value.is_integer():
            raise UnitError(f"bare float {value!r} is ambiguous for {what}; use a unit string")
        return int(value)
    if not isinstance(value, str):
        raise UnitError(f"expected {what}, got {type(value).__name__}")
    num, unit = _split(value)
    if unit == "":
        return _to_int(num, 1, value)
    for prefix, scale in _SI.items():
        if unit == prefix + suffixes:
            return _to_int(num, scale, value)
    raise UnitError(f"unknown {what} unit in {value!r}")


def parse_bytes(value) -> int:
    """"300GB" -> 300_000_000_000.  Plain ints pass through as bytes."""
    return _parse_scaled(value, "B", "byte size")


def parse_rate(value) -> int:
    """"20GB/s" -> 20_000_000_000 bytes/s."""
    return _parse_scaled(value, "B/s", "bandwidth")


def parse_flops(value) -> int:
    """"2TFlop/s" -> 2_000_000_000_000 flop/s."""
    if isinstance(value, str):
        value = value.replace("Flop/s", "F").replace("flop/s", "F")
    return _parse_scaled(value, "F", "compute rate")


def parse_duration_ns(value) -> int:
    """"300s" -> 3e11 ns; "100ns" -> 100.  Plain numbers are seconds."""
    if isinstance(value, bool):
        raise UnitError("expected duration, got boolean")
    if isinstance(value, (int, float)):
        ns = Decimal(str(value)) * SECOND_NS
        if ns != ns.to_integral_value():
            raise UnitError(f"duration {value!r} is below 1 ns resolution")
        return int(ns)
    if not isinstance(value, str):
        raise UnitError(f"expected duration, got {type(value).__name__}")
    num, unit = _split(value)
    if unit not in _DURATION_NS:
        raise UnitError(f"unknown duration unit in {value!r}")
    return _to_int(num, _DURATION_NS[unit], value)


def parse_fraction(value, what: str = "fraction") -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise UnitError(f"expected numeric {what}, got {value!r}")
    return float(value)


def ns_to_seconds_str(ns: int) -> str:
    """Exact fixed-point rendering with 9 decimals, no float round-trip."""
    sign = "-" if ns < 0 else ""
    ns = abs(ns)
    return f"{sign}{ns // SECOND_NS}.{ns % SECOND_NS:09d}"


def fraction_to_str(value: Fraction, decimals: int = 6) -> str:
    """Truncating fixed-point rendering of an exact rational."""
    sign = "-" if value < 0 else ""
    scaled = abs(value.numerator) * 10**decimals // value.denominator
    return f"{sign}{scaled // 10**decimals}.{scaled % 10**decimals:0{decimals}d}"
