"""Single-channel Bell-test statistics and accidental-coincidence subtraction.

The four observables are the coincidence rates of a rotationally invariant
experiment::

    x = R(pi/8)       y = R(3pi/8)
    z = R(a, inf)     Z = R(inf, inf)

where ``inf`` means the polariser is removed. Counts are real valued so that
averaged rates can be used directly.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

LIMIT_STD = 2.0
LIMIT_CHSH = 0.0
LIMIT_FREEDMAN = 0.25


class DegenerateDataError(ValueError):
    """A statistic has a zero denominator."""


@dataclass(frozen=True)
class CountQuad:
    """Coincidence counts (or rates) for the four settings.

    Negative components are allowed so that over-subtracted data can still be
    audited; use :attr:`has_negative` to detect them.
    """

    x: float
    y: float
    z: float
    Z: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.z, self.Z)

    @property
    def has_negative(self) -> bool:
        return any(v < 0 for v in self.as_tuple())

    @property
    def is_degenerate(self) -> bool:
        return self.x + self.y == 0 or self.Z == 0

    def scaled(self, factor: float) -> "CountQuad":
        return CountQuad(*(factor * v for v in self.as_tuple()))


@dataclass(frozen=True)
class AccidentalQuad(CountQuad):
    """Accidental coincidences for the four settings; all components >= 0."""

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"accidental count {f.name} must be >= 0")


@dataclass(frozen=True)
class BellResult:
    s_std: float
    s_chsh: float
    s_freedman: float
    limit_std: float = LIMIT_STD
    limit_chsh: float = LIMIT_CHSH
    limit_freedman: float = LIMIT_FREEDMAN

    @property
    def violated_std(self) -> bool:
        return self.s_std > self.limit_std

    @property
    def violated_chsh(self) -> bool:
        return self.s_chsh > self.limit_chsh

    @property
    def violated_freedman(self) -> bool:
        return self.s_freedman > self.limit_freedman

    @property
    def any_violated(self) -> bool:
        return self.violated_std or self.violated_chsh or self.violated_freedman


def s_std(q: CountQuad) -> float:
    """Standard (fair-sampling) statistic ``4 (x - y) / (x + y)``."""
    denom = q.x + q.y
    if denom == 0:
        raise DegenerateDataError("s_std undefined: x + y == 0")
    return 4.0 * (q.x - q.y) / denom


def s_chsh(q: CountQuad) -> float:
    """CHSH single-channel statistic ``(3x - y - 2z) / Z``."""
    if q.Z == 0:
        raise DegenerateDataError("s_chsh undefined: Z == 0")
    return (3.0 * q.x - q.y - 2.0 * q.z) / q.Z


def s_freedman(q: CountQuad) -> float:
    """Freedman statistic ``(x - y) / Z``."""
    if q.Z == 0:
        raise DegenerateDataError("s_freedman undefined: Z == 0")
    return (q.x - q.y) / q.Z


def subtract_accidentals(q: CountQuad, a: CountQuad) -> CountQuad:
    """Componentwise ``q - a``. The result may have negative components."""
    return CountQuad(q.x - a.x, q.y - a.y, q.z - a.z, q.Z - a.Z)


def accidental_quad(A: float) -> AccidentalQuad:
    """Idealised accidentals ``(A, A, 2A, 4A)`` for detectors that halve
    their singles when a polariser is inserted."""
    if A < 0:
        raise ValueError("accidental unit A must be >= 0")
    return AccidentalQuad(A, A, 2.0 * A, 4.0 * A)


def fit_accidental_unit(a: CountQuad) -> float:
    """Least-squares ``A`` for measured accidentals against ``(1, 1, 2, 4)``."""
    pattern = (1.0, 1.0, 2.0, 4.0)
    num = sum(p * v for p, v in zip(pattern, a.as_tuple()))
    return num / sum(p * p for p in pattern)


def evaluate(q: CountQuad) -> BellResult:
    return BellResult(s_std(q), s_chsh(q), s_freedman(q))


def format_value(v: float | None) -> str:
    """Three-decimal display used in reports; full precision is kept internally."""
    if v is None:
        return "degenerate"
    return f"{v:.3f}"
