"""Run configuration: one JSON document per run, layered over shipped defaults."""

from __future__ import annotations

import dataclasses
import json
import math
import numbers
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ._validation import check_cutoff, check_in_range, check_positive_int
from .errors import ConfigError

SCENARIOS = (
    "hom_dip",
    "noon_loss_scan",
    "correlations",
    "remote_css",
    "rates",
    "higher_noon",
    "tomo_selftest",
)


def _grid(start, stop, num):
    return tuple(float(v) for v in np.round(np.linspace(start, stop, num), 12))


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "rates"
    # sources and heralding
    gamma_sq: float = 0.007
    cutoff: int = 6
    arm_loss_db: tuple = (0.0, 0.0)
    loss_scan_db: tuple = (0.0, 10.0)
    eta_spcm: float = 0.15
    photon_resolving: bool = False
    coherence_time_ps: float = 1.6
    delays_ps: tuple = field(default_factory=lambda: _grid(-6.0, 6.0, 49))
    rep_rate_hz: float = 76e6
    # homodyne side
    eta_homodyne: float = 0.55
    etas: tuple = (1.0, 0.55, 0.3)
    delta_theta: tuple = field(default_factory=lambda: _grid(0.0, 2 * math.pi, 73))
    alice_efficiency: float = 0.55
    x_alice: tuple = (0.0, 0.35, 0.7071067811865476, 1.0, 1.5, 2.0)
    window: float = 0.1
    wigner_points: int = 161
    # higher-order N00N states
    noon_orders: tuple = (2, 4, 6)
    noon_gamma_sq: float = 0.01
    tap_reflectivity: float = 0.05
    # tomography and sampling
    n_samples: int = 200000
    tomo_cutoff: int = 2
    tomo_phases: int = 6
    selftest_samples: int = 100000
    selftest_phases: int = 12
    bin_width: float = 0.05
    bootstrap_resamples: int = 0
    seed: int = 0
    threads: int = 1
    out_dir: str = "noonforge_out"

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, list):
                object.__setattr__(self, f.name, tuple(value))
        self.validate()

    def validate(self) -> "ScenarioConfig":
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}", "scenario")
        check_in_range(self.gamma_sq, 0.0, 1.0, "gamma_sq", low_open=True, high_open=True)
        check_in_range(self.noon_gamma_sq, 0.0, 1.0, "noon_gamma_sq", low_open=True, high_open=True)
        check_cutoff(self.cutoff)
        if self.cutoff < 2:
            raise ConfigError("cutoff must be at least 2 for two-photon states", "cutoff")
        _check_real_seq(self.arm_loss_db, "arm_loss_db", 0.0, math.inf, length=2)
        _check_real_seq(self.loss_scan_db, "loss_scan_db", 0.0, math.inf)
        for name in ("eta_spcm", "eta_homodyne", "alice_efficiency"):
            check_in_range(getattr(self, name), 0.0, 1.0, name, low_open=True)
        _check_real_seq(self.etas, "etas", 0.0, 1.0, low_open=True)
        if not isinstance(self.photon_resolving, bool):
            raise ConfigError("photon_resolving must be true or false", "photon_resolving")
        check_in_range(self.coherence_time_ps, 0.0, math.inf, "coherence_time_ps", low_open=True, high_open=True)
        _check_real_seq(self.delays_ps, "delays_ps", -math.inf, math.inf)
        check_in_range(self.rep_rate_hz, 0.0, math.inf, "rep_rate_hz", low_open=True, high_open=True)
        _check_real_seq(self.delta_theta, "delta_theta", -math.inf, math.inf, min_length=5)
        _check_real_seq(self.x_alice, "x_alice", -6.0, 6.0)
        check_in_range(self.window, 0.0, 2.0, "window", low_open=True)
        check_positive_int(self.wigner_points, "wigner_points")
        for n in self.noon_orders:
            if isinstance(n, bool) or not isinstance(n, numbers.Integral) or n < 2 or n % 2:
                raise ConfigError(f"noon_orders must be even integers >= 2, got {n!r}", "noon_orders")
        check_in_range(self.tap_reflectivity, 0.0, 1.0, "tap_reflectivity", low_open=True, high_open=True)
        for name in ("n_samples", "tomo_phases", "selftest_samples", "selftest_phases", "threads"):
            check_positive_int(getattr(self, name), name)
        check_cutoff(self.tomo_cutoff, "tomo_cutoff")
        if self.tomo_cutoff < 2:
            raise ConfigError("tomo_cutoff must be at least 2", "tomo_cutoff")
        check_in_range(self.bin_width, 0.0, 1.0, "bin_width", low_open=True)
        b = self.bootstrap_resamples
        if isinstance(b, bool) or not isinstance(b, numbers.Integral) or (b != 0 and b < 10):
            raise ConfigError("bootstrap_resamples must be 0 (off) or an integer >= 10", "bootstrap_resamples")
        if isinstance(self.seed, bool) or not isinstance(self.seed, numbers.Integral) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}", "seed")
        if not isinstance(self.out_dir, str) or not self.out_dir:
            raise ConfigError("out_dir must be a non-empty path", "out_dir")
        return self

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object", None)
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown configuration field {key!r}", key)
        try:
            return cls(**data)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), None) from exc

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", None) from exc
        return cls.from_dict(data)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def _check_real_seq(values, name, low, high, *, low_open=False, length=None, min_length=1):
    if isinstance(values, (str, bytes)) or not hasattr(values, "__len__"):
        raise ConfigError(f"{name} must be a list of numbers", name)
    if length is not None and len(values) != length:
        raise ConfigError(f"{name} must have {length} entries, got {len(values)}", name)
    if len(values) < min_length:
        raise ConfigError(f"{name} needs at least {min_length} entries", name)
    for v in values:
        if isinstance(v, bool):
            raise ConfigError(f"{name} must contain numbers, got {v!r}", name)
        check_in_range(v, low, high, name, low_open=low_open)


def default_config() -> ScenarioConfig:
    """Configuration from the shipped ``defaults.json``."""
    text = resources.files("noonforge").joinpath("defaults.json").read_text()
    return ScenarioConfig.from_json(text)


def load_config(path) -> ScenarioConfig:
    """Read a JSON config; fields it omits are taken from the shipped defaults."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", "config") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}", "config") from exc
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object", "config")
    merged = default_config().to_dict()
    for key in data:
        if key not in merged:
            raise ConfigError(f"unknown configuration field {key!r}", key)
    merged.update(data)
    return ScenarioConfig.from_dict(merged)
