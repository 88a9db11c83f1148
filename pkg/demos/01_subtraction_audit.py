# Accidental subtraction on a published-style count table.
# Raw counts satisfy every inequality; subtracting the delayed-window
# accidentals pushes all three statistics past their limits.
import numpy as np

from eprsim import bell_statistics as bs
from eprsim.harness import subtraction_audit

raw = bs.CountQuad(86.8, 38.3, 126.0, 248.2)
acc = bs.AccidentalQuad(22.8, 22.5, 45.5, 90.0)

print(subtraction_audit(raw, acc).text())

# the accidentals follow the (A, A, 2A, 4A) pattern expected when each
# polariser halves the singles rate
A = bs.fit_accidental_unit(acc)
print("fitted A =", round(A, 2), "pattern", bs.accidental_quad(A).as_tuple())

# subtracting any A > 0 raises all statistics, as long as the corrected
# counts stay positive
for A in np.linspace(0, 30, 7):
    r = bs.evaluate(bs.subtract_accidentals(raw, bs.accidental_quad(A)))
    print(f"A={A:5.1f}  S_Std={r.s_std:.3f}  S_C={r.s_chsh:+.3f}  S_F={r.s_freedman:.3f}")
