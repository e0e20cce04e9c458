"""Parsing of unit-suffixed quantities ("1ms", "100kHz", "25e-5us").

Values are converted to exact fractions in SI base units (seconds, hertz)
so that grid arithmetic such as ``ceil(t_min / t_grid)`` is not perturbed by
binary floating point.
"""

from __future__ import annotations

import re
from decimal import Decimal, InvalidOperation
from fractions import Fraction

_TIME = {
    "s": Fraction(1),
    "ms": Fraction(1, 10**3),
    "us": Fraction(1, 10**6),
    "µs": Fraction(1, 10**6),
    "μs": Fraction(1, 10**6),
    "ns": Fraction(1, 10**9),
    "ps": Fraction(1, 10**12),
}
_FREQ = {
    "hz": Fraction(1),
    "khz": Fraction(10**3),
    "mhz": Fraction(10**6),
    "ghz": Fraction(10**9),
}

_QUANTITY = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([a-zA-Zµμ]*)\s*$")


def exact(value) -> Fraction:
    """Exact rational for ``value``.

    Floats go through their shortest repr, so ``1.5e-05`` becomes exactly
    3/200000 rather than the nearest binary double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Decimal):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(Decimal(repr(value)))
    if isinstance(value, str):
        return parse_quantity(value)
    raise TypeError(f"cannot convert {type(value).__name__} to a quantity")


def parse_quantity(text: str, kind: str | None = None) -> Fraction:
    """Parse ``text`` into SI units.

    ``kind`` may be ``"time"`` or ``"freq"`` to reject a suffix of the wrong
    dimension; a bare number is taken as already being in SI units.
    """
    m = _QUANTITY.match(text)
    if m is None:
        raise ValueError(f"malformed quantity: {text!r}")
    number, suffix = m.groups()
    try:
        value = Fraction(Decimal(number))
    except InvalidOperation as exc:  # pragma: no cover - regex guards this
        raise ValueError(f"malformed quantity: {text!r}") from exc
    if not suffix:
        return value
    if suffix in _TIME:
        if kind == "freq":
            raise ValueError(f"expected a frequency, got {text!r}")
        return value * _TIME[suffix]
    if suffix.lower() in _FREQ:
        if kind == "time":
            raise ValueError(f"expected a time, got {text!r}")
        return value * _FREQ[suffix.lower()]
    raise ValueError(f"unknown unit {suffix!r} in {text!r}")
