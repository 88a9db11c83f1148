# One four-setting run of the local wave model with calibrated detectors.
import numpy as np

from eprsim.harness import run_bell_scan, subtraction_audit
from eprsim.scenarios import default_scenario

out = run_bell_scan(default_scenario())
cfg = out.config
print("calibrated thresholds: A %.4f  B %.4f" % (cfg.detector_a.threshold, cfg.detector_b.threshold))
for label, r in out.settings.items():
    print(f"{label}: singles {r.singles_a:6d} / {r.singles_b:6d}  coincidences {r.coincidences:6d}  accidentals {r.accidentals}")

print()
print(subtraction_audit(out.raw_quad, out.accidental_quad).text())

# crude text plot of the Z spectrum: sharp rise, then a fall set by jitter and the B envelope
spec = out.settings["Z"].spectrum
sel = (spec.bin_starts >= -4) & (spec.bin_starts < 10)
peak = spec.counts[sel].max()
for start, c in zip(spec.bin_starts[sel], spec.counts[sel]):
    print(f"{start:6.1f} ns {'#' * int(60 * c / peak)}")
