"""Unit policy: SI inside, gauss / micrometer / milliampere / microkelvin at the edges.

Conversions happen only when a configuration is parsed and when a report is
written. Every module-to-module interface exchanges SI floats.
"""
import math
from typing import Dict, Optional

from scipy.constants import atomic_mass

from . import parser


class QuantityError(ValueError):
    """Malformed quantity text or a unit outside the accepted set."""
    pass


# unit symbol -> (SI factor, SI dimension symbol)
UNITS: Dict[str, tuple] = {
    # magnetic field
    "T": (1.0, "T"),
    "mT": (1e-3, "T"),
    "G": (1e-4, "T"),
    "mG": (1e-7, "T"),
    # length
    "m": (1.0, "m"),
    "mm": (1e-3, "m"),
    "um": (1e-6, "m"),
    "nm": (1e-9, "m"),
    # current
    "A": (1.0, "A"),
    "mA": (1e-3, "A"),
    # temperature
    "K": (1.0, "K"),
    "mK": (1e-3, "K"),
    "uK": (1e-6, "K"),
    # time
    "s": (1.0, "s"),
    "ms": (1e-3, "s"),
    "us": (1e-6, "s"),
    # frequency / angular frequency
    "Hz": (1.0, "Hz"),
    "kHz": (1e3, "Hz"),
    "MHz": (1e6, "Hz"),
    "rad/s": (1.0, "rad/s"),
    # angle
    "rad": (1.0, "rad"),
    "deg": (math.pi / 180.0, "rad"),
    # velocity
    "m/s": (1.0, "m/s"),
    "mm/s": (1e-3, "m/s"),
    # gradient
    "T/m": (1.0, "T/m"),
    "G/cm": (1e-2, "T/m"),
    # energy
    "J": (1.0, "J"),
    # mass
    "kg": (1.0, "kg"),
    "u": (atomic_mass, "kg"),
}


def parse_quantity(text, expect: Optional[str] = None) -> float:
    """Convert '<number> <unit>' to an SI float.

    expect, if given, is the SI dimension symbol the unit must reduce to
    ("T", "m", "A", "K", "s", ...). A bare number is returned unchanged and is
    only accepted when expect is None.
    """
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        if expect is not None:
            raise QuantityError(f"Quantity {text!r} needs a unit (expected {expect})")
        return float(text)
    try:
        value, unit = parser.parse_quantity_text(text)
    except SyntaxError as e:
        raise QuantityError(f"Malformed quantity {text!r}:\n{e}") from e
    if unit is None:
        if expect is not None:
            raise QuantityError(f"Quantity {text!r} needs a unit (expected {expect})")
        return value
    if unit not in UNITS:
        known = ", ".join(UNITS)
        raise QuantityError(f"Unknown unit '{unit}' in {text!r} (accepted: {known})")
    factor, dimension = UNITS[unit]
    if expect is not None and dimension != expect:
        raise QuantityError(f"Quantity {text!r} has dimension {dimension}, expected {expect}")
    return value * factor


def to_unit(value: float, unit: str) -> float:
    """SI float -> number expressed in unit."""
    try:
        factor, _ = UNITS[unit]
    except KeyError:
        raise QuantityError(f"Unknown unit '{unit}'") from None
    return value / factor


def format_quantity(value: float, unit: str) -> str:
    """SI float -> '<number> <unit>' text that parse_quantity reads back."""
    # repr gives the shortest text that round-trips the float
    return f"{to_unit(value, unit)!r} {unit}"
