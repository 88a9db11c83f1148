"""Full single-channel Bell-test runs built from the source, detector and monitor models.

The four settings of a run are::

    x  polarisers at (a, a + pi/8)
    y  polarisers at (a, a + 3pi/8)
    z  polariser A at a, polariser B removed
    Z  both polarisers removed

Each setting gets its own emission stream and detector noise, seeded from the
master seed and the setting index, as consecutive runs of a real experiment
would.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import bell_statistics as bs
from .coincidence_monitor import TimeSpectrum, Window, build_spectrum, count_coincidences, estimate_accidentals
from .config import ScenarioConfig
from .optics_detector import (
    CalibrationError,
    DetectionStream,
    HazardTable,
    PolariserState,
    calibrate_threshold,
    detect_channel,
)
from .source_model import EmissionStream, derive_seed, generate_emissions

log = logging.getLogger(__name__)

SETTINGS = ("x", "y", "z", "Z")
RELATIVE_ANGLE = {"x": math.pi / 8, "y": 3 * math.pi / 8}
CALIBRATION_SALT = 0
DIAGNOSTIC_SALT = 1000
MIN_BUCKET_EMISSIONS = 100


def calibrated(cfg: ScenarioConfig) -> ScenarioConfig:
    """Replace both thresholds by halving-calibrated values when ``cfg.calibrate`` is set.

    Raises :class:`CalibrationError` when either detector cannot be calibrated.
    """
    if not cfg.calibrate:
        return cfg
    seed = derive_seed(cfg.seed, CALIBRATION_SALT)
    rng_a, rng_b = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    n = cfg.calibration_trials
    th_a = calibrate_threshold(cfg.envelope_a, cfg.detector_a, rng_a, n_trials=n)
    th_b = calibrate_threshold(cfg.envelope_b, cfg.detector_b, rng_b, n_trials=n)
    log.info("calibrated thresholds A=%.6g B=%.6g", th_a, th_b)
    return replace(
        cfg,
        detector_a=replace(cfg.detector_a, threshold=th_a),
        detector_b=replace(cfg.detector_b, threshold=th_b),
        calibrate=False,
    )


def setting_polarisers(cfg: ScenarioConfig, label: str) -> tuple[PolariserState, PolariserState]:
    a = cfg.polariser_a.angle
    if label in RELATIVE_ANGLE:
        return cfg.polariser_a.rotated(a), cfg.polariser_b.rotated(a + RELATIVE_ANGLE[label])
    if label == "z":
        return cfg.polariser_a.rotated(a), cfg.polariser_b.removed()
    if label == "Z":
        return cfg.polariser_a.removed(), cfg.polariser_b.removed()
    raise ValueError(f"unknown setting {label!r}; expected one of {SETTINGS}")


@dataclass
class SettingStreams:
    emissions: EmissionStream
    a: DetectionStream
    b: DetectionStream


def simulate_streams(
    cfg: ScenarioConfig,
    pol_a: PolariserState,
    pol_b: PolariserState,
    seed_salt: int,
    tables: tuple[HazardTable | None, HazardTable | None] = (None, None),
) -> SettingStreams:
    """Emissions and both detection streams for one setting; thresholds used as given."""
    seed = derive_seed(cfg.seed, seed_salt)
    r_em, r_a, r_b = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
    em = generate_emissions(cfg.emission, r_em)
    T = cfg.emission.duration
    a = detect_channel(em, cfg.envelope_a, pol_a, cfg.detector_a, r_a, "A", T, tables[0])
    b = detect_channel(em, cfg.envelope_b, pol_b, cfg.detector_b, r_b, "B", T, tables[1])
    return SettingStreams(em, a, b)


@dataclass
class SettingResult:
    label: str
    singles_a: int
    singles_b: int
    coincidences: int
    accidentals: int
    spectrum: TimeSpectrum
    delay: float


def analyse_setting(label: str, streams: SettingStreams, cfg: ScenarioConfig, window: Window | None = None) -> SettingResult:
    """Singles, windowed coincidences, delayed-channel accidentals and the spectrum."""
    window = cfg.window if window is None else window
    delay = cfg.setting_delay(label)
    rng = (cfg.range_start, cfg.range_end)
    spectrum = build_spectrum(streams.a, streams.b, delay, cfg.bin_width, rng)
    if cfg.auto_center and spectrum.total:
        # experimenters centred the window on the observed peak
        delay -= spectrum.peak_offset()
        spectrum = build_spectrum(streams.a, streams.b, delay, cfg.bin_width, rng)
    coinc = count_coincidences(streams.a, streams.b, delay, window)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        acc = estimate_accidentals(streams.a, streams.b, delay, window, cfg.accidental_shift)
    return SettingResult(label, len(streams.a), len(streams.b), coinc, acc.shifted_count, spectrum, delay)


def run_setting(
    cfg: ScenarioConfig,
    pol_a: PolariserState,
    pol_b: PolariserState,
    seed_salt: int,
    label: str = "custom",
) -> SettingResult:
    """Simulate and analyse one polariser configuration.

    Thresholds are calibrated first when ``cfg.calibrate`` is set. ``label``
    selects the per-setting extra delay when it names one of the four settings.
    """
    cfg = calibrated(cfg)
    streams = simulate_streams(cfg, pol_a, pol_b, seed_salt)
    return analyse_setting(label, streams, cfg)


@dataclass
class RunOutput:
    settings: dict[str, SettingResult]
    raw_quad: bs.CountQuad
    accidental_quad: bs.AccidentalQuad
    corrected_quad: bs.CountQuad
    raw_result: Optional[bs.BellResult]
    corrected_result: Optional[bs.BellResult]
    seed: int
    config: ScenarioConfig
    errors: list[str] = field(default_factory=list)

    @property
    def degenerate(self) -> bool:
        return self.raw_result is None or self.corrected_result is None

    @property
    def accidental_unit(self) -> float:
        return bs.fit_accidental_unit(self.accidental_quad)


def _evaluate(q: bs.CountQuad, name: str, errors: list[str]) -> Optional[bs.BellResult]:
    try:
        return bs.evaluate(q)
    except bs.DegenerateDataError as exc:
        errors.append(f"{name}: {exc}")
        return None


def assemble(results: dict[str, SettingResult], cfg: ScenarioConfig) -> RunOutput:
    raw = bs.CountQuad(*(float(results[s].coincidences) for s in SETTINGS))
    acc = bs.AccidentalQuad(*(float(results[s].accidentals) for s in SETTINGS))
    corrected = bs.subtract_accidentals(raw, acc)
    errors: list[str] = []
    raw_res = _evaluate(raw, "raw", errors)
    corr_res = _evaluate(corrected, "corrected", errors)
    if corrected.has_negative:
        errors.append("corrected: negative counts after subtraction")
    return RunOutput(results, raw, acc, corrected, raw_res, corr_res, cfg.seed, cfg, errors)


def simulate_bell_streams(cfg: ScenarioConfig) -> tuple[ScenarioConfig, dict[str, SettingStreams]]:
    """Calibrate (if requested) and simulate the detection streams of all four settings."""
    cfg = calibrated(cfg)
    tables = tuple(
        HazardTable(env, det) if det.noise_sigma > 0 else None
        for env, det in ((cfg.envelope_a, cfg.detector_a), (cfg.envelope_b, cfg.detector_b))
    )
    streams = {}
    for i, label in enumerate(SETTINGS):
        pol_a, pol_b = setting_polarisers(cfg, label)
        streams[label] = simulate_streams(cfg, pol_a, pol_b, i + 1, tables)
    return cfg, streams


def run_bell_scan(cfg: ScenarioConfig) -> RunOutput:
    cfg, streams = simulate_bell_streams(cfg)
    return assemble({s: analyse_setting(s, streams[s], cfg) for s in SETTINGS}, cfg)


@dataclass
class ScanCell:
    window: Window
    output: RunOutput


@dataclass
class ScanGrid:
    cells: list[ScanCell]

    def cell(self, start: float, length: float) -> RunOutput:
        for c in self.cells:
            if c.window.start_offset == start and c.window.length == length:
                return c.output
        raise KeyError((start, length))

    def to_csv(self) -> str:
        head = ["start_ns", "length_ns", "x", "y", "z", "Z", "acc_x", "acc_y", "acc_z", "acc_Z"]
        for kind in ("raw", "corrected"):
            head += [f"{kind}_s_std", f"{kind}_s_chsh", f"{kind}_s_freedman"]
        lines = [",".join(head)]
        for c in self.cells:
            o = c.output
            row = [repr(c.window.start_offset), repr(c.window.length)]
            row += [repr(v) for v in o.raw_quad.as_tuple()]
            row += [repr(v) for v in o.accidental_quad.as_tuple()]
            for res, q in ((o.raw_result, o.raw_quad), (o.corrected_result, o.corrected_quad)):
                row += [_stat_text(fn, q) for fn in (bs.s_std, bs.s_chsh, bs.s_freedman)]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _stat_text(fn, q: bs.CountQuad) -> str:
    try:
        return repr(fn(q))
    except bs.DegenerateDataError:
        return "nan"


def window_sensitivity_scan(cfg: ScenarioConfig, starts, lengths) -> ScanGrid:
    """Bell scan for every window ``(start, length)``; streams are simulated once."""
    starts, lengths = list(starts), list(lengths)
    if not starts or not lengths:
        raise ValueError("window scan needs at least one start and one length")
    cfg, streams = simulate_bell_streams(cfg)
    cells = []
    for start in starts:
        for length in lengths:
            w = Window(float(start), float(length))
            wcfg = cfg.with_window(w)
            results = {s: analyse_setting(s, streams[s], wcfg) for s in SETTINGS}
            cells.append(ScanCell(w, assemble(results, wcfg)))
    return ScanGrid(cells)


# ---------------------------------------------------------------- diagnostics


@dataclass
class BucketRow:
    lam_lo: float
    lam_hi: float
    n: int
    left: float  # p_c, or p(a, lam)
    right: float  # p1 * p2, or p(inf, lam)
    se: float
    channel: str = ""

    @property
    def deviation(self) -> float:
        return self.left - self.right

    @property
    def sigmas(self) -> float:
        if self.se > 0:
            return self.deviation / self.se
        return 0.0 if self.deviation == 0 else math.copysign(math.inf, self.deviation)


@dataclass
class DiagnosticTable:
    kind: str
    rows: list[BucketRow]
    warnings: list[str] = field(default_factory=list)

    @property
    def max_abs_deviation(self) -> float:
        return max((abs(r.deviation) for r in self.rows), default=0.0)

    @property
    def max_abs_sigmas(self) -> float:
        return max((abs(r.sigmas) for r in self.rows), default=0.0)

    def passes(self, n_sigma: float = 3.0) -> bool:
        """Factorability: |p_c - p1 p2| < n_sigma se in every bucket.
        Enhancement: p(a) <= p(inf) + n_sigma se in every bucket."""
        if self.kind == "enhancement":
            return all(r.deviation <= n_sigma * r.se for r in self.rows)
        return all(abs(r.deviation) < n_sigma * r.se or r.deviation == 0 for r in self.rows)

    def to_csv(self) -> str:
        if self.kind == "factorability":
            head = "lambda_lo,lambda_hi,n,p_c,p1_p2,se,sigmas"
        else:
            head = "channel,lambda_lo,lambda_hi,n,p_pol,p_abs,se,sigmas"
        lines = [head]
        for r in self.rows:
            vals = [repr(r.lam_lo), repr(r.lam_hi), str(r.n), repr(r.left), repr(r.right), repr(r.se), repr(r.sigmas)]
            if self.kind != "factorability":
                vals.insert(0, r.channel)
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"


def _buckets(lams: np.ndarray, n_buckets: int) -> np.ndarray:
    return np.minimum((lams / np.pi * n_buckets).astype(np.int64), n_buckets - 1)


def _detected_mask(stream: DetectionStream, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-emission detection flag and time (nan when undetected); dark counts ignored."""
    flag = np.zeros(n, dtype=bool)
    times = np.full(n, np.nan)
    tagged = stream.source >= 0
    flag[stream.source[tagged]] = True
    times[stream.source[tagged]] = stream.times[tagged]
    return flag, times


def factorability_diagnostic(cfg: ScenarioConfig, n_buckets: int = 16, setting: str = "x") -> DiagnosticTable:
    """Compare the pair coincidence probability with the product of singles per angle bucket.

    A coincidence here is both members of the *same* emission detected with a
    time difference inside ``cfg.window``; the emission angle is known because
    the run is tagged.
    """
    if n_buckets < 2:
        raise ValueError("n_buckets must be >= 2")
    cfg = calibrated(cfg)
    pol_a, pol_b = setting_polarisers(cfg, setting)
    streams = simulate_streams(cfg, pol_a, pol_b, DIAGNOSTIC_SALT)
    n = len(streams.emissions)
    det_a, t_a = _detected_mask(streams.a, n)
    det_b, t_b = _detected_mask(streams.b, n)
    table = DiagnosticTable("factorability", [])
    if not (det_a.any() or det_b.any()):
        table.warnings.append("no detections: factorability table is empty")
        return table
    delay = cfg.setting_delay(setting)
    with np.errstate(invalid="ignore"):
        diff = t_b + delay - t_a
        coinc = det_a & det_b & (diff >= cfg.window.start_offset) & (diff < cfg.window.end)
    bucket = _buckets(streams.emissions.lams, n_buckets)
    for k in range(n_buckets):
        sel = bucket == k
        m = int(sel.sum())
        lo, hi = k * math.pi / n_buckets, (k + 1) * math.pi / n_buckets
        if m < MIN_BUCKET_EMISSIONS:
            table.warnings.append(f"bucket {k}: only {m} emissions (< {MIN_BUCKET_EMISSIONS})")
        if m == 0:
            continue
        p1, p2, pc = det_a[sel].mean(), det_b[sel].mean(), coinc[sel].mean()
        # variances under the factorisable null, so empty buckets do not give se = 0
        se_c = p1 * p2 * (1 - p1 * p2) / m
        se_prod = (p2**2 * p1 * (1 - p1) + p1**2 * p2 * (1 - p2)) / m
        table.rows.append(BucketRow(lo, hi, m, float(pc), float(p1 * p2), math.sqrt(se_c + se_prod)))
    return table


def enhancement_diagnostic(cfg: ScenarioConfig, n_buckets: int = 16) -> DiagnosticTable:
    """Per-bucket singles probability with the polariser (at its base angle) versus without.

    Both arms share one emission stream; detector noise is independent.
    """
    if n_buckets < 2:
        raise ValueError("n_buckets must be >= 2")
    cfg = calibrated(cfg)
    seed = derive_seed(cfg.seed, DIAGNOSTIC_SALT + 1)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(5)]
    em = generate_emissions(cfg.emission, rngs[0])
    n = len(em)
    bucket = _buckets(em.lams, n_buckets)
    table = DiagnosticTable("enhancement", [])
    T = cfg.emission.duration
    arms = (
        ("A", cfg.envelope_a, cfg.detector_a, cfg.polariser_a),
        ("B", cfg.envelope_b, cfg.detector_b, cfg.polariser_b),
    )
    flags = {}
    for j, (ch, env, det, pol) in enumerate(arms):
        # dark counts carry no angle and are excluded by the tagging
        with_pol = detect_channel(em, env, pol.rotated(pol.angle), det, rngs[1 + 2 * j], ch, T)
        without = detect_channel(em, env, pol.removed(), det, rngs[2 + 2 * j], ch, T)
        flags[ch] = (_detected_mask(with_pol, n)[0], _detected_mask(without, n)[0])
    if not any(f.any() for pair in flags.values() for f in pair):
        table.warnings.append("no detections: enhancement table is empty")
        return table
    for k in range(n_buckets):
        sel = bucket == k
        m = int(sel.sum())
        if m < MIN_BUCKET_EMISSIONS:
            table.warnings.append(f"bucket {k}: only {m} emissions (< {MIN_BUCKET_EMISSIONS})")
        if m == 0:
            continue
        lo, hi = k * math.pi / n_buckets, (k + 1) * math.pi / n_buckets
        for ch, (fp, fa) in flags.items():
            pp, pa = fp[sel].mean(), fa[sel].mean()
            pooled = 0.5 * (pp + pa)
            se = math.sqrt(2.0 * pooled * (1 - pooled) / m)
            table.rows.append(BucketRow(lo, hi, m, float(pp), float(pa), se, ch))
    return table


# ---------------------------------------------------------------- audit


@dataclass
class AuditReport:
    raw: bs.CountQuad
    accidentals: bs.CountQuad
    corrected: bs.CountQuad
    raw_result: Optional[bs.BellResult]
    corrected_result: Optional[bs.BellResult]
    notes: list[str] = field(default_factory=list)

    @property
    def degenerate(self) -> bool:
        return self.raw_result is None or self.corrected_result is None

    def text(self) -> str:
        head = f"{'':14s}{'x':>9s}{'y':>9s}{'z':>9s}{'Z':>9s}{'S_Std':>9s}{'S_C':>9s}{'S_F':>9s}"
        lines = [head, "-" * len(head)]

        def stats(res):
            if res is None:
                return "".join(f"{'degen.':>9s}" for _ in range(3))
            vals = (res.s_std, res.s_chsh, res.s_freedman)
            flags = (res.violated_std, res.violated_chsh, res.violated_freedman)
            return "".join(f"{bs.format_value(v) + ('*' if f else ''):>9s}" for v, f in zip(vals, flags))

        def counts(q):
            return "".join(f"{v:9.1f}" for v in q.as_tuple())

        lines.append(f"{'Raw':14s}{counts(self.raw)}{stats(self.raw_result)}")
        lines.append(f"{'Accidentals':14s}{counts(self.accidentals)}")
        lines.append(f"{'Corrected':14s}{counts(self.corrected)}{stats(self.corrected_result)}")
        lines.append("(* = exceeds the local-realist limit: S_Std 2, S_C 0, S_F 0.25)")
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines) + "\n"


def subtraction_audit(raw: bs.CountQuad, acc: bs.CountQuad) -> AuditReport:
    """Raw, accidental and corrected rows with statistics and violation flags."""
    corrected = bs.subtract_accidentals(raw, acc)
    notes: list[str] = []
    raw_res = _evaluate(raw, "raw", notes)
    corr_res = _evaluate(corrected, "corrected", notes)
    if corrected.has_negative:
        notes.append("corrected counts contain negative values (over-subtraction)")
    if raw_res is not None and corr_res is not None and not raw_res.any_violated and corr_res.any_violated:
        notes.append("violation appears only after accidentals are subtracted")
    return AuditReport(raw, acc, corrected, raw_res, corr_res, notes)
