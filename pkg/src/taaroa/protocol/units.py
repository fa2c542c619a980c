"""Number and magnitude-with-unit grammars shared by every message.

Integers are ``\\d+`` (plus the single exception of -1 where a field
explicitly admits it).  Reals are ``\\d+.\\d+`` or ``\\d+.\\d+[eE][+-]\\d+``.
Quantities are a non-negative integer optionally followed by a unit
suffix from one of three families; adjacent units differ by a factor
of 1000.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from taaroa.protocol.errors import MalformedNumber, MalformedQuantity

FREQUENCY = "frequency"
MEMORY = "memory"
NETSPEED = "netspeed"

UNIT_FAMILIES: dict[str, tuple[str, ...]] = {
    FREQUENCY: ("Hz", "KHz", "MHz", "GHz", "THz", "PHz"),
    MEMORY: ("B", "KB", "MB", "GB", "TB", "PB"),
    NETSPEED: ("bps", "Kbps", "Mbps", "Gbps", "Tbps", "Pbps"),
}

_INT_RE = re.compile(r"\d+\Z")
_REAL_RE = re.compile(r"\d+\.\d+([eE][+-]\d+)?\Z")
_QUANTITY_RES = {
    family: re.compile(
        r"(\d+)(%s)?\Z" % "|".join(sorted(units, key=len, reverse=True))
    )
    for family, units in UNIT_FAMILIES.items()
}


@dataclass(frozen=True)
class Quantity:
    """Non-negative magnitude with a unit from a single family."""

    magnitude: int
    unit: str
    family: str

    def __post_init__(self):
        units = UNIT_FAMILIES.get(self.family)
        if units is None:
            raise MalformedQuantity(f"unknown unit family {self.family!r}")
        if self.unit not in units:
            raise MalformedQuantity(
                f"unit {self.unit!r} does not belong to the {self.family} family"
            )
        if self.magnitude < 0:
            raise MalformedQuantity("magnitude must be non-negative")

    def canonical(self) -> int:
        """Value in the family's base unit (factor 1000 between units)."""
        return self.magnitude * 1000 ** UNIT_FAMILIES[self.family].index(self.unit)

    def __str__(self) -> str:
        return f"{self.magnitude}{self.unit}"


def parse_int(text: str) -> int:
    """Parse a non-negative integer token; negatives and signs rejected."""
    if not _INT_RE.match(text):
        raise MalformedNumber(f"not a non-negative integer: {text!r}")
    return int(text)


def parse_real(text: str) -> float:
    """Parse a non-negative real in standard or scientific notation."""
    if not _REAL_RE.match(text):
        raise MalformedNumber(f"not a non-negative real: {text!r}")
    value = float(text)
    if math.isinf(value):
        raise MalformedNumber(f"real out of range: {text!r}")
    return value


def format_real(value: float) -> str:
    """Render a non-negative float so that ``parse_real`` recovers it exactly."""
    value = float(value)
    if value < 0 or math.isnan(value) or math.isinf(value):
        raise MalformedNumber(f"cannot render {value!r} as a protocol real")
    text = repr(value)
    if "e" in text or "E" in text:
        mantissa, _, exponent = text.lower().partition("e")
        if "." not in mantissa:
            mantissa += ".0"
        if exponent[0] not in "+-":
            exponent = "+" + exponent
        return mantissa + "e" + exponent
    if "." not in text:
        text += ".0"
    return text


def parse_quantity(text: str, family: str, default_unit: str) -> Quantity:
    """Parse ``<magnitude>[<unit>]``; a bare magnitude takes ``default_unit``."""
    pattern = _QUANTITY_RES.get(family)
    if pattern is None:
        raise MalformedQuantity(f"unknown unit family {family!r}")
    match = pattern.match(text)
    if match is None:
        raise MalformedQuantity(f"not a {family} quantity: {text!r}")
    return Quantity(int(match.group(1)), match.group(2) or default_unit, family)
