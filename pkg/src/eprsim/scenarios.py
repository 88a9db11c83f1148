"""Ready-made scenarios used by the demos and the acceptance tests.

Each builder returns a :class:`ScenarioConfig`; pass ``seed`` to vary the
random streams without touching anything else.
"""

from __future__ import annotations

from dataclasses import replace

from .coincidence_monitor import ASPECT_WINDOW, Window
from .config import DEFAULT_SEED, ScenarioConfig, build_config
from .source_model import EmissionProcessConfig

# covers the full spectrum range: the count-everything reference
FULL_WINDOW = Window(-20.0, 100.0)
NARROW_WINDOW = Window(-1.0, 2.0)


def default_scenario(seed: int = DEFAULT_SEED) -> ScenarioConfig:
    """Local model with calibrated detectors, 10^5 emissions, wide window."""
    return ScenarioConfig().with_seed(seed)


def high_accidental_scenario(seed: int = DEFAULT_SEED) -> ScenarioConfig:
    """Low collection efficiency plus dark counts: delayed-channel accidentals
    outnumber true coincidences roughly three to one in the -3..+17 ns window."""
    cfg = ScenarioConfig()
    det = dict(noise_sigma=0.1, efficiency=0.1, dark_rate=0.0025)
    return replace(
        cfg,
        emission=EmissionProcessConfig(mean_rate=0.05, duration=2e7, seed=seed),
        detector_a=replace(cfg.detector_a, **det),
        detector_b=replace(cfg.detector_b, **det),
        window=ASPECT_WINDOW,
    )


def accidental_pattern_scenario(seed: int = DEFAULT_SEED) -> ScenarioConfig:
    """Higher emission rate and longer run so accidentals are well measured."""
    cfg = ScenarioConfig()
    return replace(
        cfg,
        emission=EmissionProcessConfig(mean_rate=0.002, duration=2.5e8, seed=seed),
        window=ASPECT_WINDOW,
    )


def freedman_bias_scenario(seed: int = DEFAULT_SEED) -> ScenarioConfig:
    """Short window, 1 ns polariser transit delay on the B side."""
    return build_config(preset="freedman1972", seed=seed)


def diagnostic_scenario(window: Window | None = None, seed: int = DEFAULT_SEED) -> ScenarioConfig:
    """No dead time on either detector, so pair detections are conditionally
    independent given the angle; ``window`` defaults to the wide one."""
    cfg = ScenarioConfig().with_seed(seed)
    cfg = replace(
        cfg,
        detector_a=replace(cfg.detector_a, dead_time=0.0),
        detector_b=replace(cfg.detector_b, dead_time=0.0),
    )
    return cfg if window is None else cfg.with_window(window)
