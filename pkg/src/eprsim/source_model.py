"""Pair-emission source: emission times, hidden angles and wave envelopes.

All times are in nanoseconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

MASK64 = (1 << 64) - 1
EMISSION_MODES = ("poisson", "clustered", "regular")


@dataclass(frozen=True)
class PairEmission:
    time: float
    lam: float


@dataclass(frozen=True)
class EnvelopeParams:
    """Exponentially decaying intensity ``i0 * exp(-t / tau)``."""

    i0: float = 1.0
    tau: float = 5.0

    def __post_init__(self):
        if not self.i0 > 0:
            raise ValueError("envelope i0 must be > 0")
        if not self.tau > 0:
            raise ValueError("envelope tau must be > 0")


@dataclass(frozen=True)
class EmissionProcessConfig:
    mean_rate: float = 1e-3
    duration: float = 1e8
    mode: str = "poisson"
    cluster_strength: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.mean_rate > 0:
            raise ValueError("mean_rate must be > 0")
        if not self.duration >= 0:
            raise ValueError("duration must be >= 0")
        if not math.isfinite(self.mean_rate * self.duration):
            raise ValueError("mean_rate * duration must be finite")
        if self.mode not in EMISSION_MODES:
            raise ValueError(f"mode must be one of {EMISSION_MODES}, got {self.mode!r}")
        if not 0.0 <= self.cluster_strength <= 1.0:
            raise ValueError("cluster_strength must lie in [0, 1]")


class EmissionStream:
    """Time-ordered emissions stored column-wise.

    Iterating yields :class:`PairEmission` objects; the arrays ``times`` and
    ``lams`` are what the vectorised detector consumes. Both members of a pair
    share the time and angle.
    """

    def __init__(self, times: np.ndarray, lams: np.ndarray):
        self.times = np.asarray(times, dtype=float)
        self.lams = np.asarray(lams, dtype=float)
        if self.times.shape != self.lams.shape:
            raise ValueError("times and lams must have the same shape")

    def __len__(self) -> int:
        return self.times.size

    def __iter__(self) -> Iterator[PairEmission]:
        for t, lam in zip(self.times.tolist(), self.lams.tolist()):
            yield PairEmission(t, lam)

    def __getitem__(self, i: int) -> PairEmission:
        return PairEmission(float(self.times[i]), float(self.lams[i]))


def splitmix64(value: int) -> int:
    """One round of the SplitMix64 finaliser on a 64-bit integer."""
    z = (value + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, salt: int) -> int:
    """Seed for job ``salt`` of a run seeded with ``master``.

    ``splitmix64(master XOR splitmix64(salt))``, so different salts give
    decorrelated streams and the mapping is reproducible across platforms.
    """
    return splitmix64((master & MASK64) ^ splitmix64(salt & MASK64))


def _gaps(rng: np.random.Generator, cfg: EmissionProcessConfig, n: int) -> np.ndarray:
    mean_gap = 1.0 / cfg.mean_rate
    s = cfg.cluster_strength
    if cfg.mode == "poisson":
        return rng.exponential(mean_gap, n)
    if cfg.mode == "clustered":
        # half of the gaps shortened by (1 - s); base scale keeps the mean rate
        base = mean_gap / (1.0 - 0.5 * s)
        shorten = rng.random(n) < 0.5
        g = rng.exponential(base, n)
        g[shorten] *= 1.0 - s
        return g
    half_width = s * mean_gap / 2.0
    return mean_gap + rng.uniform(-half_width, half_width, n)


def generate_emissions(cfg: EmissionProcessConfig, rng: np.random.Generator | None = None) -> EmissionStream:
    """Emission times in ``[0, duration)`` with independent uniform angles on ``[0, pi)``.

    The generator is seeded from ``cfg.seed`` unless one is supplied.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    expected = cfg.mean_rate * cfg.duration
    chunk = int(expected + 6.0 * math.sqrt(expected) + 16)
    parts = []
    t0 = 0.0
    while True:
        t = t0 + np.cumsum(_gaps(rng, cfg, chunk))
        parts.append(t)
        if t[-1] >= cfg.duration:
            break
        t0 = t[-1]
    times = np.concatenate(parts)
    times = times[times < cfg.duration]
    lams = rng.uniform(0.0, np.pi, times.size)
    return EmissionStream(times, lams)


def envelope_intensity(p: EnvelopeParams, dt):
    """``i0 * exp(-dt / tau)``; accepts scalars or arrays of ``dt >= 0``."""
    arr = np.asarray(dt, dtype=float)
    if np.any(arr < 0):
        raise ValueError("dt must be >= 0")
    out = p.i0 * np.exp(-arr / p.tau)
    return float(out) if out.ndim == 0 else out


def write_emissions_csv(stream: EmissionStream, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("time_ns,lambda_rad\n")
        for t, lam in zip(stream.times.tolist(), stream.lams.tolist()):
            fh.write(f"{t!r},{lam!r}\n")
