"""Polarisers and threshold-crossing photodetectors.

A detector sees the transmitted wave envelope plus independent Gaussian noise
drawn once per time step and fires at the first step where the sum exceeds its
threshold. Only that first crossing is reported; the detection time then picks
up the polariser transit delay and photomultiplier/discriminator jitter, and
events falling inside the dead time of the previous event are dropped.

Two implementations are provided. :func:`detect_first` follows the step loop
literally for a single emission. :func:`detect_channel` handles a whole
emission stream at once by sampling the first-crossing step from its exact
distribution: with per-step crossing probabilities ``q_k`` the step ``k`` is
the first one whose cumulative hazard ``sum_{j<=k} -log(1 - q_j)`` exceeds an
Exp(1) draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterator, Optional

import numpy as np
from scipy.special import log_ndtr, ndtri

from .source_model import EmissionStream, EnvelopeParams, PairEmission, envelope_intensity

CHANNELS = ("A", "B")


class CalibrationError(RuntimeError):
    """No threshold in the search bracket halves the singles rate."""


@dataclass(frozen=True)
class PolariserState:
    """A polariser at ``angle`` (radians), or no polariser when ``present`` is False.

    ``transit_delay`` (ns) is added to detection times only while present.
    """

    present: bool = False
    angle: float = 0.0
    transit_delay: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.transit_delay):
            raise ValueError("transit_delay must be finite")

    @property
    def delay(self) -> float:
        return self.transit_delay if self.present else 0.0

    def rotated(self, angle: float) -> "PolariserState":
        return PolariserState(True, angle, self.transit_delay)

    def removed(self) -> "PolariserState":
        return PolariserState(False, self.angle, self.transit_delay)


@dataclass(frozen=True)
class DetectorConfig:
    threshold: float = 1.0
    noise_sigma: float = 0.1
    time_step: float = 0.1
    max_horizon: float = 40.0
    dead_time: float = 16.0
    jitter_pm_sigma: float = 0.7
    jitter_disc_sigma: float = 0.1
    dark_rate: float = 0.0  # independent Poisson clicks per ns
    efficiency: float = 1.0  # probability that a signal reaches the detector at all

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")
        if not self.time_step > 0:
            raise ValueError("time_step must be > 0")
        if not self.max_horizon >= self.time_step:
            raise ValueError("max_horizon must be >= time_step")
        for name in ("noise_sigma", "dead_time", "jitter_pm_sigma", "jitter_disc_sigma", "dark_rate"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError("efficiency must lie in (0, 1]")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.max_horizon / self.time_step + 1e-9)) + 1


@dataclass(frozen=True)
class DetectionEvent:
    channel: str
    time: float


@dataclass
class ChannelState:
    last_time: float = -math.inf


def transmit(pol: PolariserState, lam, intensity):
    """Malus' law: ``intensity * cos^2(lam - angle)``, or unchanged without a polariser."""
    if not pol.present:
        return intensity
    return intensity * np.cos(np.asarray(lam) - pol.angle) ** 2


def per_step_probability(intensity, cfg: DetectorConfig):
    """Probability that one noise draw lifts ``intensity`` above threshold."""
    if cfg.noise_sigma == 0:
        return (np.asarray(intensity) > cfg.threshold).astype(float)
    return np.exp(log_ndtr((np.asarray(intensity) - cfg.threshold) / cfg.noise_sigma))


def threshold_for_probability(intensity: float, p: float, noise_sigma: float) -> float:
    """Threshold giving per-step crossing probability ``p`` at a fixed intensity."""
    return intensity - noise_sigma * ndtri(p)


def _jitter(rng: np.random.Generator, cfg: DetectorConfig, n=None):
    return rng.normal(0.0, cfg.jitter_pm_sigma, n) + rng.normal(0.0, cfg.jitter_disc_sigma, n)


def detect_first(
    emission: PairEmission,
    envelope: EnvelopeParams,
    pol: PolariserState,
    cfg: DetectorConfig,
    state: ChannelState,
    rng: np.random.Generator,
    channel: str = "A",
    block: int = 64,
) -> Optional[DetectionEvent]:
    """Step-by-step first-crossing detection of one emission.

    Noise is drawn ``block`` steps at a time; the result is the same as one
    draw per step because draws after the crossing are never inspected.
    ``state`` is updated only when an event is emitted.
    """
    if emission.time < 0:
        raise ValueError("emission time must be >= 0")
    if cfg.efficiency < 1.0 and rng.random() >= cfg.efficiency:
        return None
    n = cfg.n_steps
    fired = None
    for start in range(0, n, block):
        k = np.arange(start, min(start + block, n))
        signal = transmit(pol, emission.lam, envelope_intensity(envelope, k * cfg.time_step))
        noise = rng.normal(0.0, cfg.noise_sigma, k.size) if cfg.noise_sigma > 0 else 0.0
        hit = np.flatnonzero(signal + noise > cfg.threshold)
        if hit.size:
            fired = int(k[hit[0]])
            break
    if fired is None:
        return None
    t = emission.time + fired * cfg.time_step + pol.delay + float(_jitter(rng, cfg))
    if abs(t - state.last_time) < cfg.dead_time:
        return None
    state.last_time = t
    return DetectionEvent(channel, t)


class HazardTable:
    """Cumulative crossing hazard on a grid of transmitted peak intensities.

    ``cum[i, k]`` is ``sum_{j<=k} -log(1 - q_j)`` for peak intensity
    ``levels[i]``; rows are interpolated linearly for intermediate intensities.
    """

    def __init__(self, envelope: EnvelopeParams, cfg: DetectorConfig, n_levels: int = 1025):
        if cfg.noise_sigma <= 0:
            raise ValueError("hazard table needs noise_sigma > 0")
        self.envelope = envelope
        self.cfg = cfg
        self.levels = np.linspace(0.0, envelope.i0, n_levels)
        decay = np.exp(-np.arange(cfg.n_steps) * cfg.time_step / envelope.tau)
        z = (cfg.threshold - self.levels[:, None] * decay[None, :]) / cfg.noise_sigma
        self.cum = np.cumsum(-log_ndtr(z), axis=1)

    def _locate(self, intensity: np.ndarray):
        pos = np.clip(intensity / self.envelope.i0, 0.0, 1.0) * (self.levels.size - 1)
        i = np.minimum(pos.astype(np.int64), self.levels.size - 2)
        return i, pos - i

    def total(self, intensity) -> np.ndarray:
        """Hazard accumulated over the whole horizon."""
        i, w = self._locate(np.asarray(intensity, dtype=float))
        last = self.cum[:, -1]
        return (1.0 - w) * last[i] + w * last[i + 1]

    def first_step(self, intensity, draws) -> np.ndarray:
        """First step at which the hazard reaches ``draws`` (Exp(1) samples); -1 if never."""
        intensity = np.asarray(intensity, dtype=float)
        draws = np.asarray(draws, dtype=float)
        i, w = self._locate(intensity)
        n = self.cfg.n_steps
        hit = self.total(intensity) >= draws
        lo = np.zeros(intensity.shape, dtype=np.int64)
        hi = np.full(intensity.shape, n - 1, dtype=np.int64)
        idx = np.flatnonzero(hit)
        lo_h, hi_h, i_h, w_h, e_h = lo[idx], hi[idx], i[idx], w[idx], draws[idx]
        for _ in range(int(math.ceil(math.log2(n))) + 1):
            mid = (lo_h + hi_h) // 2
            v = (1.0 - w_h) * self.cum[i_h, mid] + w_h * self.cum[i_h + 1, mid]
            above = v >= e_h
            hi_h = np.where(above, mid, hi_h)
            lo_h = np.where(above, lo_h, mid + 1)
        out = np.full(intensity.shape, -1, dtype=np.int64)
        out[idx] = lo_h
        return out


def first_crossing_steps(
    intensity: np.ndarray,
    envelope: EnvelopeParams,
    cfg: DetectorConfig,
    rng: np.random.Generator,
    table: HazardTable | None = None,
) -> np.ndarray:
    """Vectorised first-crossing step for each transmitted peak intensity (-1 = no detection)."""
    intensity = np.asarray(intensity, dtype=float)
    if cfg.noise_sigma == 0:
        # a decaying envelope can only cross on the first step
        return np.where(intensity > cfg.threshold, 0, -1).astype(np.int64)
    if table is None:
        table = HazardTable(envelope, cfg)
    return table.first_step(intensity, rng.exponential(1.0, intensity.size))


def apply_dead_time(times: np.ndarray, dead_time: float) -> np.ndarray:
    """Boolean mask keeping events (sorted times) not within ``dead_time`` of the last kept one."""
    keep = np.ones(times.size, dtype=bool)
    if dead_time <= 0 or times.size < 2:
        return keep
    # only events close to a predecessor need the sequential pass
    close = np.flatnonzero(np.diff(times) < dead_time) + 1
    if close.size == 0:
        return keep
    t = times.tolist()
    last = -math.inf
    prev = -2
    for j in close.tolist():
        if j - 1 != prev:
            last = t[j - 1]  # events that are not close to a predecessor are always kept
        if t[j] - last < dead_time:
            keep[j] = False
        else:
            last = t[j]
        prev = j
    return keep


@dataclass
class DetectionStream:
    """Time-sorted detections of one channel.

    ``source`` holds the index of the originating emission, or -1 for a dark
    count.
    """

    channel: str
    times: np.ndarray
    source: np.ndarray

    def __len__(self) -> int:
        return self.times.size

    def events(self) -> Iterator[DetectionEvent]:
        for t in self.times.tolist():
            yield DetectionEvent(self.channel, t)


def detect_channel(
    emissions: EmissionStream,
    envelope: EnvelopeParams,
    pol: PolariserState,
    cfg: DetectorConfig,
    rng: np.random.Generator,
    channel: str = "A",
    duration: float | None = None,
    table: HazardTable | None = None,
) -> DetectionStream:
    """Detections for every emission plus dark counts, sorted, with dead time applied.

    Dead time is applied after sorting by detection time, so the dead-time
    invariant holds even when jitter reorders events.
    """
    if channel not in CHANNELS:
        raise ValueError(f"channel must be one of {CHANNELS}")
    if cfg.efficiency < 1.0:
        reached = np.flatnonzero(rng.random(len(emissions)) < cfg.efficiency)
    else:
        reached = np.arange(len(emissions))
    peak = transmit(pol, emissions.lams[reached], np.full(reached.size, envelope.i0))
    steps = first_crossing_steps(peak, envelope, cfg, rng, table)
    hit = steps >= 0
    src = reached[hit]
    t = emissions.times[src] + steps[hit] * cfg.time_step + pol.delay + _jitter(rng, cfg, src.size)
    if cfg.dark_rate > 0:
        if duration is None:
            duration = float(emissions.times[-1]) if len(emissions) else 0.0
        n_dark = rng.poisson(cfg.dark_rate * duration)
        t = np.concatenate([t, rng.uniform(0.0, duration, n_dark)])
        src = np.concatenate([src, np.full(n_dark, -1)])
    order = np.argsort(t, kind="stable")
    t, src = t[order], src[order]
    keep = apply_dead_time(t, cfg.dead_time)
    return DetectionStream(channel, t[keep], src[keep])


def detection_probability(intensity, envelope: EnvelopeParams, cfg: DetectorConfig, table: HazardTable | None = None):
    """Exact probability of a crossing within the horizon for given peak intensities."""
    intensity = np.asarray(intensity, dtype=float)
    if cfg.noise_sigma == 0:
        return (intensity > cfg.threshold).astype(float)
    if table is None:
        table = HazardTable(envelope, cfg)
    return -np.expm1(-table.total(intensity))


def halving_ratio(
    envelope: EnvelopeParams,
    cfg: DetectorConfig,
    lams: np.ndarray,
    draws: np.ndarray,
) -> float:
    """Monte Carlo singles ratio (polariser present / absent) over the given angles.

    ``draws`` are Exp(1) samples shared between the two arms. Returns nan when
    nothing is detected without the polariser.
    """
    if cfg.noise_sigma == 0:
        n_abs = np.count_nonzero(np.full(lams.size, envelope.i0) > cfg.threshold)
        n_pol = np.count_nonzero(envelope.i0 * np.cos(lams) ** 2 > cfg.threshold)
    else:
        table = HazardTable(envelope, cfg, n_levels=513)
        n_abs = np.count_nonzero(table.total(np.full(lams.size, envelope.i0)) >= draws)
        n_pol = np.count_nonzero(table.total(envelope.i0 * np.cos(lams) ** 2) >= draws)
    return n_pol / n_abs if n_abs else float("nan")


def calibrate_threshold(
    envelope: EnvelopeParams,
    cfg: DetectorConfig,
    rng: np.random.Generator,
    bracket: tuple[float, float] | None = None,
    n_trials: int = 100_000,
    tolerance: float = 0.02,
    max_iter: int = 60,
) -> float:
    """Threshold at which inserting a polariser halves the detection probability.

    Angles are uniform on ``[0, pi)``. Bisection uses common random numbers so
    the Monte Carlo ratio moves monotonically with the threshold. Raises
    :class:`CalibrationError` if the bracket does not straddle one half or the
    final ratio is off by more than ``tolerance`` (relative).
    """
    if cfg.noise_sigma <= 0:
        raise CalibrationError("calibration needs noise_sigma > 0: a noiseless detector cannot be tuned to halve")
    if bracket is None:
        bracket = (1e-9, envelope.i0 + 8.0 * cfg.noise_sigma)
    lams = rng.uniform(0.0, np.pi, n_trials)
    draws = rng.exponential(1.0, n_trials)

    def ratio(th):
        return halving_ratio(envelope, _with_threshold(cfg, th), lams, draws)

    lo, hi = bracket
    r_lo, r_hi = ratio(lo), ratio(hi)
    if math.isnan(r_lo):
        raise CalibrationError(f"no detections even at the lowest threshold {lo:g}")
    if r_lo < 0.5:
        raise CalibrationError(f"ratio {r_lo:.3f} < 0.5 already at threshold {lo:g}")
    if not (math.isnan(r_hi) or r_hi < 0.5):
        raise CalibrationError(
            f"ratio {r_hi:.3f} >= 0.5 at the highest threshold {hi:g} (saturated detector)"
        )
    best, best_r = lo, r_lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r = ratio(mid)
        if not math.isnan(r) and abs(r - 0.5) < abs(best_r - 0.5):
            best, best_r = mid, r
        if math.isnan(r) or r < 0.5:
            hi = mid
        else:
            lo = mid
        if abs(best_r - 0.5) < 0.1 * tolerance * 0.5 or hi - lo < 1e-12 * max(1.0, hi):
            break
    if abs(best_r / 0.5 - 1.0) > tolerance:
        raise CalibrationError(f"best ratio {best_r:.4f} at threshold {best:g} is outside +/-{tolerance:.0%} of 0.5")
    return best


def _with_threshold(cfg: DetectorConfig, threshold: float) -> DetectorConfig:
    return replace(cfg, threshold=threshold)


def write_detections_csv(streams, path) -> None:
    """Merged dump of several :class:`DetectionStream` objects, time ordered."""
    rows = sorted((t, s.channel) for s in streams for t in s.times.tolist())
    with open(path, "w", newline="") as fh:
        fh.write("channel,time_ns\n")
        for t, ch in rows:
            fh.write(f"{ch},{t!r}\n")
