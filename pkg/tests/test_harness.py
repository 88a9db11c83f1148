import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eprsim import bell_statistics as bs
from eprsim.coincidence_monitor import Window
from eprsim.config import ScenarioConfig, build_config
from eprsim.harness import (
    SETTINGS,
    calibrated,
    enhancement_diagnostic,
    factorability_diagnostic,
    run_bell_scan,
    run_setting,
    setting_polarisers,
    simulate_streams,
    subtraction_audit,
    window_sensitivity_scan,
)
from eprsim.optics_detector import DetectorConfig, PolariserState, detect_channel
from eprsim.scenarios import FULL_WINDOW, default_scenario, diagnostic_scenario
from eprsim.source_model import EmissionProcessConfig, EmissionStream, EnvelopeParams


def _small(cfg: ScenarioConfig, duration=1e7) -> ScenarioConfig:
    return replace(cfg, emission=replace(cfg.emission, duration=duration))


def _noiseless(threshold: float, duration=1e6) -> ScenarioConfig:
    det = DetectorConfig(threshold=threshold, noise_sigma=0.0, dead_time=0.0, max_horizon=10.0)
    return replace(
        ScenarioConfig(),
        emission=EmissionProcessConfig(mean_rate=1e-3, duration=duration, seed=3),
        detector_a=det,
        detector_b=det,
        calibrate=False,
    )


def test_noiseless_every_pair_coincides():
    cfg = _noiseless(0.5)
    streams = simulate_streams(cfg, PolariserState(), PolariserState(), 7)
    n = len(streams.emissions)
    res = run_setting(cfg, PolariserState(), PolariserState(), 7)
    assert n > 800
    assert res.coincidences == res.singles_a == res.singles_b == n
    assert res.coincidences <= min(res.singles_a, res.singles_b)


def test_crossed_polariser_fixed_population_gives_nothing():
    det = DetectorConfig(threshold=0.5, noise_sigma=0.0, dead_time=0.0)
    em = EmissionStream(np.arange(1000) * 100.0, np.full(1000, 0.3))
    crossed = PolariserState(True, 0.3 + math.pi / 2)
    assert len(detect_channel(em, EnvelopeParams(1.0, 5.0), crossed, det, np.random.default_rng(0), "B")) == 0


def test_aspect_calibration_remeasured_on_singles():
    cfg = build_config(preset="aspect1981", overrides=[("emission.duration", "1e9")])
    cfg = calibrated(cfg)
    a_pol, _ = setting_polarisers(cfg, "z")
    with_pol = run_setting(cfg, a_pol, PolariserState(), 11)
    without = run_setting(cfg, PolariserState(), PolariserState(), 11)
    assert with_pol.singles_a > 400_000
    assert 0.46 <= with_pol.singles_a / without.singles_a <= 0.54


def test_subthreshold_scan_is_degenerate():
    out = run_bell_scan(_noiseless(2.0))
    assert out.raw_quad.as_tuple() == (0, 0, 0, 0)
    assert out.degenerate
    assert any("raw" in e for e in out.errors)


def test_run_structure_and_determinism():
    cfg = _small(default_scenario(5))
    a, b = run_bell_scan(cfg), run_bell_scan(cfg)
    assert set(a.settings) == set(SETTINGS)
    assert a.raw_quad == b.raw_quad and a.accidental_quad == b.accidental_quad
    for s in SETTINGS:
        assert np.array_equal(a.settings[s].spectrum.counts, b.settings[s].spectrum.counts)
    assert a.corrected_quad == bs.subtract_accidentals(a.raw_quad, a.accidental_quad)
    assert a.seed == 5
    c = run_bell_scan(_small(default_scenario(6)))
    assert c.raw_quad != a.raw_quad


def test_rotational_invariance():
    xs = {0.0: [], 0.7: []}
    ys = {0.0: [], 0.7: []}
    for seed in range(10):
        for angle in xs:
            base = _small(default_scenario(100 + seed), 2e7)
            cfg = replace(base, polariser_a=replace(base.polariser_a, angle=angle))
            out = run_bell_scan(cfg)
            xs[angle].append(out.raw_quad.x)
            ys[angle].append(out.raw_quad.y)
    for data in (xs, ys):
        a, b = np.array(data[0.0]), np.array(data[0.7])
        sigma = math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
        assert abs(a.mean() - b.mean()) < 3 * sigma


def test_spectrum_shape():
    out = run_bell_scan(_small(default_scenario(), 5e7))
    for s in SETTINGS:
        spec = out.settings[s].spectrum
        peak = int(np.argmax(spec.counts))
        zero_bin = int((0.0 - spec.range_start) / spec.bin_width)
        assert abs(peak - zero_bin) <= 3
        # the decade after the peak falls, in 2 ns groups, allowing for counting noise
        groups = spec.counts[peak + 1 : peak + 21].reshape(5, 4).sum(axis=1)
        for early, late in zip(groups[:-1], groups[1:]):
            assert late <= early + 3 * math.sqrt(early + 1)


def test_scan_single_cell_equals_fresh_run():
    cfg = _small(default_scenario(9))
    w = Window(-3.0, 20.0)
    grid = window_sensitivity_scan(cfg, [w.start_offset], [w.length])
    fresh = run_bell_scan(cfg.with_window(w))
    cell = grid.cell(-3.0, 20.0)
    assert cell.raw_quad == fresh.raw_quad
    assert cell.accidental_quad == fresh.accidental_quad
    assert grid.to_csv().splitlines()[0].startswith("start_ns,length_ns,x,y,z,Z")


def test_full_window_counts_everything_and_lengths_monotone():
    cfg = _small(default_scenario(4))
    grid = window_sensitivity_scan(cfg, [FULL_WINDOW.start_offset, -3.0], [FULL_WINDOW.length, 8.0, 0.5])
    full = grid.cell(FULL_WINDOW.start_offset, FULL_WINDOW.length)
    totals = tuple(float(full.settings[s].spectrum.total) for s in SETTINGS)
    assert full.raw_quad.as_tuple() == totals
    wide = full.raw_quad.as_tuple()
    mid = grid.cell(-3.0, 8.0).raw_quad.as_tuple()
    tiny = grid.cell(-3.0, 0.5).raw_quad.as_tuple()
    for a, b, c in zip(wide, mid, tiny):
        assert a >= b >= c
    assert max(tiny) < 0.02 * max(wide)
    with pytest.raises(ValueError):
        window_sensitivity_scan(cfg, [], [1.0])


def test_auto_center_moves_peak_to_zero():
    cfg = replace(_small(default_scenario(2)), delay_D=12.0, auto_center=True)
    out = run_bell_scan(cfg)
    for s in SETTINGS:
        assert abs(out.settings[s].spectrum.peak_offset()) <= 1.0


def test_factorability_wide_window_passes():
    table = factorability_diagnostic(diagnostic_scenario(seed=3), 16)
    assert len(table.rows) == 16
    assert table.passes()
    assert table.to_csv().splitlines()[0] == "lambda_lo,lambda_hi,n,p_c,p1_p2,se,sigmas"


def test_factorability_narrow_window_flagged():
    table = factorability_diagnostic(diagnostic_scenario(Window(-1.0, 2.0), seed=3), 16)
    assert not table.passes()


def test_diagnostics_with_no_detections():
    cfg = _noiseless(2.0)
    fact = factorability_diagnostic(cfg, 8)
    assert fact.rows == [] and fact.warnings
    enh = enhancement_diagnostic(cfg, 8)
    assert enh.rows == [] and enh.warnings
    with pytest.raises(ValueError):
        factorability_diagnostic(cfg, 1)


def test_small_bucket_warning():
    cfg = _noiseless(0.5, duration=5e4)
    assert any("emissions" in w for w in factorability_diagnostic(cfg, 16).warnings)


def test_enhancement_default_passes_without_dead_time():
    table = enhancement_diagnostic(_small(diagnostic_scenario(seed=8), 5e7), 16)
    assert len(table.rows) == 32
    assert table.passes()


def test_dead_time_creates_apparent_enhancement():
    # a busier channel is dead more often, so removing the polariser costs
    # about dead_time * (extra singles rate) of the detections
    cfg = default_scenario(1)
    table = enhancement_diagnostic(cfg, 16)
    rows = [r for r in table.rows if r.channel == "B"]
    best = max(rows, key=lambda r: r.right)
    rate_abs = cfg.emission.mean_rate * best.right
    expected = best.right * cfg.detector_b.dead_time * rate_abs * 0.5
    assert not table.passes()
    assert 0.5 * expected < max(r.deviation for r in rows) < 2.0 * expected


def test_enhancement_trivial_buckets():
    k = 5
    centre = (k + 0.5) * math.pi / 16
    base = _noiseless(0.9, duration=1e7)
    cfg = replace(base, polariser_a=PolariserState(True, centre), polariser_b=PolariserState(True, centre))
    table = enhancement_diagnostic(cfg, 16)
    rows = [r for r in table.rows if r.channel == "A"]
    assert rows[k].left == 1.0 and rows[k].right == 1.0
    assert rows[(k + 8) % 16].left == 0.0


def test_audit_table_values():
    raw = bs.CountQuad(86.8, 38.3, 126.0, 248.2)
    acc = bs.AccidentalQuad(22.8, 22.5, 45.5, 90.0)
    report = subtraction_audit(raw, acc)
    text = report.text()
    assert "1.551" in text and "-0.120" in text and "0.195" in text
    assert "2.416*" in text and "0.096*" in text and "0.305*" in text
    assert any("only after" in n for n in report.notes)


def test_audit_zero_accidentals_duplicates_raw():
    raw = bs.CountQuad(10, 5, 12, 30)
    report = subtraction_audit(raw, bs.AccidentalQuad(0, 0, 0, 0))
    assert report.corrected == raw and report.corrected_result == report.raw_result


def test_audit_degenerate_reported_inline():
    report = subtraction_audit(bs.CountQuad(1, 1, 2, 4), bs.CountQuad(1, 1, 2, 4))
    assert report.degenerate
    assert "degen." in report.text()


@settings(max_examples=60, deadline=None)
@given(
    st.floats(min_value=1.0, max_value=1e4),
    st.floats(min_value=0.1, max_value=1e4),
    st.floats(min_value=0.0, max_value=1e4),
    st.floats(min_value=1.0, max_value=1e5),
)
def test_audit_half_y_accidentals_raise_all_statistics(x, y, z, Z):
    A = y / 2
    if not (x > y and Z - 4 * A > 1e-6 * Z and 3 * x - y - 2 * z > -Z / 2):
        return
    report = subtraction_audit(bs.CountQuad(x, y, z, Z), bs.accidental_quad(A))
    r, c = report.raw_result, report.corrected_result
    assert c.s_std > r.s_std and c.s_chsh > r.s_chsh and c.s_freedman > r.s_freedman
