"""Input checking and coercion helpers shared by the modules and estimators."""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Integral, Real

from .exceptions import InvalidConfig

INF = math.inf


def check_rate(rate) -> Fraction:
    """Coerce a production rate to a ``Fraction`` in ``(0, 1]``.

    Accepts ``Fraction``, ints, floats, decimal strings and ``"p/q"`` strings.
    Floats are converted exactly via ``limit_denominator(10**6)``.
    """
    try:
        if isinstance(rate, Fraction):
            value = rate
        elif isinstance(rate, str):
            value = Fraction(rate.strip())
        elif isinstance(rate, bool):
            raise TypeError
        elif isinstance(rate, int):
            value = Fraction(rate)
        elif isinstance(rate, Real):
            value = Fraction(float(rate)).limit_denominator(10**6)
        else:
            raise TypeError
    except (TypeError, ValueError, ZeroDivisionError):
        raise InvalidConfig(f"cannot interpret production rate {rate!r}") from None
    if not 0 < value <= 1:
        raise InvalidConfig(f"production rate must lie in (0, 1], got {value}")
    return value


def check_capacity(capacity) -> int | float:
    """Return a non-negative int, or ``math.inf`` for an unbounded buffer."""
    if isinstance(capacity, str):
        text = capacity.strip().lower()
        if text in ("inf", "infinite", "infinity", "∞"):
            return INF
        try:
            capacity = int(text)
        except ValueError:
            raise InvalidConfig(f"bad buffer capacity {capacity!r}") from None
    if capacity is None:
        return INF
    if isinstance(capacity, float) and math.isinf(capacity) and capacity > 0:
        return INF
    try:
        ok = not isinstance(capacity, bool) and float(capacity).is_integer() and capacity >= 0
    except (TypeError, ValueError, OverflowError):
        ok = False
    if not ok:
        raise InvalidConfig(f"buffer capacity must be a non-negative integer or inf, got {capacity!r}")
    return int(capacity)


def check_nonnegative_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, Integral) or value < 0:
        raise InvalidConfig(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def parse_capacity_range(text: str) -> list:
    """Parse ``"0..8,inf"`` style buffer lists into sorted distinct capacities.

    ``a..b`` is inclusive on both ends.
    """
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, _, hi = part.partition("..")
            lo_c, hi_c = check_capacity(lo), check_capacity(hi)
            if math.isinf(lo_c) or math.isinf(hi_c) or hi_c < lo_c:
                raise InvalidConfig(f"bad buffer range {part!r}")
            out.extend(range(lo_c, hi_c + 1))
        else:
            out.append(check_capacity(part))
    if not out:
        raise InvalidConfig(f"empty buffer list {text!r}")
    return sorted(set(out))


def format_capacity(capacity) -> str:
    return "inf" if math.isinf(capacity) else str(int(capacity))


def format_rate(rate: Fraction) -> str:
    return f"{rate.numerator}/{rate.denominator}"
