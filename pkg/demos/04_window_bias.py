# Short-window bias: a 1 ns transit delay in the B polariser shifts the x and y
# spectra relative to z and Z, so an 8 ns window placed a little late cuts
# z and Z harder than x and y and inflates S_F.
from eprsim.harness import window_sensitivity_scan
from eprsim.scenarios import FULL_WINDOW, freedman_bias_scenario

starts = [-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0]
grid = window_sensitivity_scan(freedman_bias_scenario(), starts + [FULL_WINDOW.start_offset], [8.0, FULL_WINDOW.length])

ref = grid.cell(FULL_WINDOW.start_offset, FULL_WINDOW.length)
print("full-window reference S_F = %.4f" % ref.raw_result.s_freedman)
for s in starts:
    o = grid.cell(s, 8.0)
    q = o.raw_quad
    print(f"start {s:+.0f} ns: x {q.x:6.0f} y {q.y:6.0f} z {q.z:6.0f} Z {q.Z:6.0f}  S_F {o.raw_result.s_freedman:.4f}")
