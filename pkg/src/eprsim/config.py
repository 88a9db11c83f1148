"""Scenario configuration: dataclass, named presets and a flat key-value file format.

Config files hold one ``section.field = value`` pair per line, for example::

    # aspect-like run with a dark rate on B
    preset = aspect1981
    emission.mean_rate = 0.002
    detector_b.dark_rate_per_ns = 1e-4
    window = -3:20

Unit suffixes (``_ns``, ``_rad``, ``_per_ns``) on keys are optional. Values are
converted to the type of the field they replace. A ``preset`` is expanded
first, then the remaining keys, then any command-line overrides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Iterable, Optional

from .coincidence_monitor import ASPECT_WINDOW, DEFAULT_BIN_WIDTH, DEFAULT_RANGE, DEFAULT_SHIFT, FREEDMAN_WINDOW, Window
from .optics_detector import DetectorConfig, PolariserState
from .source_model import EmissionProcessConfig, EnvelopeParams

DEFAULT_SEED = 20240601
PRESETS = ("aspect1981", "freedman1972")
# wide enough for every genuine pair given the default detection horizons
WIDE_WINDOW = Window(-15.0, 50.0)
UNIT_SUFFIXES = ("_per_ns", "_ns", "_rad")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of a simulated single-channel experiment.

    With ``calibrate`` on, both detector thresholds are replaced by values that
    halve the singles rate when a polariser is inserted, and the configured
    thresholds only serve as placeholders.
    """

    emission: EmissionProcessConfig = field(
        default_factory=lambda: EmissionProcessConfig(mean_rate=1e-3, duration=1e8, seed=DEFAULT_SEED)
    )
    envelope_a: EnvelopeParams = field(default_factory=lambda: EnvelopeParams(1.0, 1.0))
    envelope_b: EnvelopeParams = field(default_factory=lambda: EnvelopeParams(1.0, 5.0))
    detector_a: DetectorConfig = field(default_factory=lambda: DetectorConfig(noise_sigma=0.2, max_horizon=8.0))
    detector_b: DetectorConfig = field(default_factory=lambda: DetectorConfig(noise_sigma=0.2, max_horizon=30.0))
    polariser_a: PolariserState = field(default_factory=lambda: PolariserState(True, 0.0, 0.0))
    polariser_b: PolariserState = field(default_factory=lambda: PolariserState(True, 0.0, 0.0))
    window: Window = WIDE_WINDOW
    delay_D: float = 0.0
    # extra B delay per setting, on top of delay_D
    delay_x: float = 0.0
    delay_y: float = 0.0
    delay_z: float = 0.0
    delay_Z: float = 0.0
    auto_center: bool = False
    accidental_shift: float = DEFAULT_SHIFT
    calibrate: bool = True
    calibration_trials: int = 100_000
    bin_width: float = DEFAULT_BIN_WIDTH
    range_start: float = DEFAULT_RANGE[0]
    range_end: float = DEFAULT_RANGE[1]
    preset: Optional[str] = None

    @property
    def seed(self) -> int:
        return self.emission.seed

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, emission=replace(self.emission, seed=int(seed)))

    def with_window(self, window: Window) -> "ScenarioConfig":
        return replace(self, window=window)

    def setting_delay(self, label: str) -> float:
        """``delay_D`` plus the extra delay of a named setting (none for other labels)."""
        if label not in ("x", "y", "z", "Z"):
            return self.delay_D
        return self.delay_D + getattr(self, f"delay_{label}")


def apply_preset(cfg: ScenarioConfig, name: str) -> ScenarioConfig:
    if name == "aspect1981":
        det = dict(dead_time=16.0, jitter_pm_sigma=0.7, jitter_disc_sigma=0.1)
        return replace(
            cfg,
            detector_a=replace(cfg.detector_a, **det),
            detector_b=replace(cfg.detector_b, **det),
            window=ASPECT_WINDOW,
            calibrate=True,
            preset=name,
        )
    if name == "freedman1972":
        # pile-of-plates polariser on the B side adds about a nanosecond of transit time
        return replace(
            cfg,
            polariser_b=replace(cfg.polariser_b, transit_delay=1.0),
            window=FREEDMAN_WINDOW,
            calibrate=True,
            preset=name,
        )
    raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on", "present"):
        return True
    if t in ("0", "false", "no", "off", "absent"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _convert(current, text: str):
    text = text.strip()
    if isinstance(current, bool):
        return _parse_bool(text)
    if isinstance(current, int):
        try:
            return int(text)
        except ValueError:
            pass
        v = float(text)
        if not v.is_integer():
            raise ConfigError(f"expected an integer, got {text!r}")
        return int(v)
    if isinstance(current, float):
        return float(text)
    if current is None or isinstance(current, str):
        return None if text.lower() in ("", "none") else text
    raise ConfigError(f"cannot set a value of type {type(current).__name__}")


def _field_name(obj, name: str) -> str:
    names = {f.name for f in fields(obj)}
    if name in names:
        return name
    for suffix in UNIT_SUFFIXES:
        if name.endswith(suffix) and name[: -len(suffix)] in names:
            return name[: -len(suffix)]
    raise ConfigError(f"unknown key {name!r} for {type(obj).__name__}")


def set_value(cfg: ScenarioConfig, key: str, value: str) -> ScenarioConfig:
    """Return ``cfg`` with the dotted ``key`` set from its text ``value``."""
    key = key.strip()
    if key == "preset":
        if value.strip().lower() == "none":
            return replace(cfg, preset=None)
        return apply_preset(cfg, value.strip())
    if key == "seed":
        return cfg.with_seed(int(value))
    if key == "window":
        try:
            return replace(cfg, window=Window.parse(value.strip()))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    parts = key.split(".")
    try:
        return _set_path(cfg, parts, value)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{key}: {exc}") from exc


def _set_path(obj, parts: list[str], value: str):
    name = _field_name(obj, parts[0])
    current = getattr(obj, name)
    if len(parts) == 1:
        if is_dataclass(current):
            raise ConfigError(f"{parts[0]} is a section; set one of its fields")
        return replace(obj, **{name: _convert(current, value)})
    if not is_dataclass(current):
        raise ConfigError(f"{parts[0]} has no sub-keys")
    return replace(obj, **{name: _set_path(current, parts[1:], value)})


def parse_lines(lines: Iterable[str]) -> list[tuple[str, str]]:
    pairs = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


def build_config(
    pairs: Iterable[tuple[str, str]] = (),
    preset: str | None = None,
    overrides: Iterable[tuple[str, str]] = (),
    seed: int | None = None,
) -> ScenarioConfig:
    """Defaults, then preset (an explicit ``preset`` beats one in ``pairs``),
    then file pairs, then overrides, then ``seed``."""
    pairs = list(pairs)
    file_preset = [v for k, v in pairs if k.strip() == "preset"]
    cfg = ScenarioConfig()
    chosen = preset or (file_preset[-1] if file_preset else None)
    if chosen and chosen.lower() != "none":
        cfg = apply_preset(cfg, chosen)
    for k, v in pairs:
        if k.strip() != "preset":
            cfg = set_value(cfg, k, v)
    for k, v in overrides:
        cfg = set_value(cfg, k, v)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    return cfg


def load_config(path=None, **kwargs) -> ScenarioConfig:
    pairs = []
    if path is not None:
        with open(path) as fh:
            pairs = parse_lines(fh)
    return build_config(pairs, **kwargs)


def _flatten(obj, prefix: str = ""):
    for f in fields(obj):
        v = getattr(obj, f.name)
        key = f"{prefix}{f.name}"
        if isinstance(v, Window):
            yield f"{key}", str(v)
        elif is_dataclass(v):
            yield from _flatten(v, key + ".")
        elif isinstance(v, float):
            yield key, repr(v) if math.isfinite(v) else str(v)
        else:
            yield key, "none" if v is None else str(v)


def dump_config(cfg: ScenarioConfig) -> str:
    """Flat text form; ``load_config`` reads it back to an equal config."""
    lines = [f"{k} = {v}" for k, v in _flatten(cfg)]
    return "\n".join(lines) + "\n"
