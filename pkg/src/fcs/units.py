"""Angle-unit handling at the I/O boundary. Internal math is in radians."""

import math

DEG = math.pi / 180.0

# unit -> (internal unit, factor to internal)
_TO_INTERNAL = {
    "deg": ("rad", DEG),
    "deg/s": ("rad/s", DEG),
    "deg*s": ("rad*s", DEG),
}
_TO_DISPLAY = {
    "rad": ("deg", 1.0 / DEG),
    "rad/s": ("deg/s", 1.0 / DEG),
    "rad*s": ("deg*s", 1.0 / DEG),
}

# units taken as-is (no conversion)
_PASS_THROUGH = {"rad", "rad/s", "rad*s", "g", "g*s", "-", "1", "s", "m", "m/s", "ft", "ft/s", "N", "N*m"}


def is_known(unit):
    return unit in _TO_INTERNAL or unit in _PASS_THROUGH


def to_internal(unit):
    """``(internal_unit, factor)`` so that ``internal = factor * value``."""
    return _TO_INTERNAL.get(unit, (unit, 1.0))


def to_display(unit):
    """``(display_unit, factor)``; radians become degrees, others pass through."""
    return _TO_DISPLAY.get(unit, (unit, 1.0))


def integrated(unit):
    """Unit of the time integral of a signal."""
    if unit.endswith("/s"):
        return unit[:-2]
    return f"{unit}*s"
