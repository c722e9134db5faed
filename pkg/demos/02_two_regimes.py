"""How the pair-to-accidental ratio r decides what the switch can do.

Run with ``python demos/02_two_regimes.py``.
"""
import math

import numpy as np

from cphase_switch import detection, model

theta = np.radians(np.arange(0, 360, 45))

for name, rates in (("small", detection.SMALL_REGIME_RATES), ("large", detection.LARGE_REGIME_RATES)):
    sw = detection.calibrate(rates)
    report = model.classify_regime(sw.r)
    print(f"{name} regime: r = {sw.r:.4f} ({report.regime.value})")
    curve = model.theory_curve(sw.r, theta)
    for t, phi in curve.points():
        print(f"  theta_p = {math.degrees(t):5.1f} deg -> dphi = {math.degrees(phi):+7.2f} deg")

# Below r = 1 the shift never exceeds arcsin(r); above it the shift winds
# through a full turn as the pump phase does.
print(f"largest small-regime shift: {math.degrees(model.max_small_regime_shift(math.sqrt(4.7 / 256))):.2f} deg")
print(f"r = 1000 at 123 deg: {math.degrees(model.conditional_phase_shift(1000, math.radians(123))):.2f} deg")
