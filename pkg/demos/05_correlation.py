"""
Loss versus nitrogen
====================

Fit a power law through (P1 concentration, metric) points. An exponent
above one means the metric grows faster than the nitrogen content.
"""
# %%
import numpy as np

from nvoptics.analysis import CorrelationPoint, monotonic_trend, power_law_fit, superlinear_flag
from nvoptics.synth import standard_normals

x = np.geomspace(0.2, 30.0, 10)
y = 0.015 * x**1.3 * np.exp(0.05 * standard_normals(11, x.size))
pts = [CorrelationPoint(float(a), float(b), 0.05 * float(b)) for a, b in zip(x, y)]

fit = power_law_fit(pts)
print(fit, "superlinear:", superlinear_flag(fit))
print(power_law_fit(pts, weighted=True))
print(monotonic_trend(pts))
