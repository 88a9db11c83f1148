"""Time spectra, windowed coincidence counts and delayed-channel accidentals.

Every A event is matched with the *first* B event at or after the start of the
region of interest, mirroring a start/stop time-to-amplitude converter: each A
contributes at most one count. The B stream is delayed by ``delay`` ns before
matching, so a B detection at ``b`` lands at difference ``b + delay - a``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

DEFAULT_BIN_WIDTH = 0.5
DEFAULT_RANGE = (-20.0, 80.0)
DEFAULT_SHIFT = 100.0


@dataclass(frozen=True)
class Window:
    """Accepted differences ``[start_offset, start_offset + length)`` in ns."""

    start_offset: float
    length: float

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("window length must be > 0")

    @property
    def end(self) -> float:
        return self.start_offset + self.length

    @classmethod
    def parse(cls, text: str) -> "Window":
        """Parse ``"start:length"``, e.g. ``"-3:20"``."""
        try:
            start, length = text.split(":")
            return cls(float(start), float(length))
        except ValueError as exc:
            raise ValueError(f"window must look like start:length, got {text!r}") from exc

    def __str__(self) -> str:
        return f"{self.start_offset!r}:{self.length!r}"


ASPECT_WINDOW = Window(-3.0, 20.0)
FREEDMAN_WINDOW = Window(-2.0, 8.0)


@dataclass
class TimeSpectrum:
    bin_width: float
    range_start: float
    range_end: float
    counts: np.ndarray
    applied_delay: float

    @property
    def bin_starts(self) -> np.ndarray:
        return self.range_start + self.bin_width * np.arange(self.counts.size)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def peak_offset(self) -> float:
        """Centre of the tallest bin."""
        return float(self.bin_starts[int(np.argmax(self.counts))] + 0.5 * self.bin_width)

    def to_csv(self) -> str:
        lines = ["bin_start_ns,count"]
        lines += [f"{s!r},{int(c)}" for s, c in zip(self.bin_starts.tolist(), self.counts.tolist())]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class AccidentalEstimate:
    shifted_count: int
    shift: float
    window: Window


def _times(events) -> np.ndarray:
    if hasattr(events, "times"):
        return np.asarray(events.times, dtype=float)
    arr = np.asarray([getattr(e, "time", e) for e in events], dtype=float)
    return arr.reshape(-1)


def _check_sorted(t: np.ndarray, name: str) -> None:
    if t.size > 1 and np.any(np.diff(t) < 0):
        raise ValueError(f"{name} events must be sorted by time")


def first_differences(a_events, b_events, delay: float, start: float) -> np.ndarray:
    """For each A event, ``b + delay - a`` of the first B with difference >= ``start``.

    A events without such a B get ``inf``.
    """
    a = _times(a_events)
    b = _times(b_events)
    _check_sorted(a, "A")
    _check_sorted(b, "B")
    out = np.full(a.size, np.inf)
    if a.size == 0 or b.size == 0:
        return out
    shifted = b + delay
    idx = np.searchsorted(shifted, a + start, side="left")
    ok = idx < b.size
    out[ok] = shifted[idx[ok]] - a[ok]
    return out


def build_spectrum(
    a_events,
    b_events,
    delay: float = 0.0,
    bin_width: float = DEFAULT_BIN_WIDTH,
    time_range: tuple[float, float] = DEFAULT_RANGE,
) -> TimeSpectrum:
    """Histogram of A to first-B time differences over ``[start, end)``."""
    if not bin_width > 0:
        raise ValueError("bin_width must be > 0")
    start, end = time_range
    if not end > start:
        raise ValueError("range end must exceed start")
    n_bins = int(math.ceil((end - start) / bin_width - 1e-9))
    d = first_differences(a_events, b_events, delay, start)
    d = d[d < end]
    bins = np.minimum(np.floor((d - start) / bin_width).astype(np.int64), n_bins - 1)
    counts = np.bincount(bins, minlength=n_bins)[:n_bins]
    return TimeSpectrum(bin_width, start, end, counts, delay)


def count_coincidences(a_events, b_events, delay: float, w: Window) -> int:
    """Number of A events whose first following B (delayed) lands inside ``w``."""
    d = first_differences(a_events, b_events, delay, w.start_offset)
    return int(np.count_nonzero(d < w.end))


def estimate_accidentals(
    a_events,
    b_events,
    delay: float,
    w: Window,
    shift: float = DEFAULT_SHIFT,
    min_separation: float | None = None,
) -> AccidentalEstimate:
    """Coincidences with the B channel delayed by an extra ``shift``.

    ``min_separation`` is the span (envelope tails plus window) that true pairs
    may occupy; a warning is issued when ``shift`` is less than five times
    that span.
    """
    span = w.length if min_separation is None else min_separation
    if shift < 5.0 * span:
        warnings.warn(
            f"accidental shift {shift:g} ns is below 5x the pair span {span:g} ns; "
            "true pairs may leak into the estimate",
            stacklevel=2,
        )
    return AccidentalEstimate(count_coincidences(a_events, b_events, delay + shift, w), shift, w)
