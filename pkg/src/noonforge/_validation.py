"""Input validation helpers used by the public constructors and functions."""

import numbers

import numpy as np

from .errors import ConfigError


def check_cutoff(cutoff, name="cutoff"):
    if isinstance(cutoff, bool) or not isinstance(cutoff, numbers.Integral) or cutoff < 0:
        raise ConfigError(f"{name} must be a non-negative integer, got {cutoff!r}", name)
    return int(cutoff)


def check_in_range(value, low, high, name, *, low_open=False, high_open=False):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a real number, got {value!r}", name) from None
    if not np.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {value!r}", name)
    too_low = value <= low if low_open else value < low
    too_high = value >= high if high_open else value > high
    if too_low or too_high:
        lb = "(" if low_open else "["
        rb = ")" if high_open else "]"
        raise ConfigError(f"{name}={value} outside {lb}{low}, {high}{rb}", name)
    return value


def check_probability(value, name):
    return check_in_range(value, 0.0, 1.0, name)


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}", name)
    return int(value)


def check_mode(mode, mode_count, name="mode"):
    if isinstance(mode, bool) or not isinstance(mode, numbers.Integral):
        raise ConfigError(f"{name} must be an integer mode index, got {mode!r}", name)
    if not 0 <= mode < mode_count:
        raise ConfigError(f"{name}={mode} out of range for {mode_count} modes", name)
    return int(mode)


def check_modes(modes, mode_count, name="modes"):
    modes = tuple(check_mode(m, mode_count, name) for m in modes)
    if len(set(modes)) != len(modes):
        raise ConfigError(f"{name} contains repeated indices: {modes}", name)
    return modes
