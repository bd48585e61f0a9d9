"""
From transmittance to absorption coefficient
============================================

A diamond plate measured in an integrating sphere loses about 29% of the
light to its two surfaces. This demo shows how much of that loss the
reflection-corrected conversion removes compared to plain Beer-Lambert.
"""
# %%
import numpy as np

from nvoptics import absorption as ab
from nvoptics.synth import SynthSpec, synth_transmittance
from nvoptics.types import SampleGeometry, WavelengthGrid

print("R_t from n = 2.4:", ab.fresnel_total_reflectance(2.4))
print("default R_t:", ab.DEFAULT_R_TOTAL)

# %%
# A single sample point: 60% transmittance through 300 um.
d = SampleGeometry(300.0).thickness_cm
print("sphere:", ab.absorption_coefficient_integrating(0.6, d))
print("simple:", ab.absorption_coefficient_simple(0.6, d))

# %%
# The forward model inverts the conversion exactly.
A = np.array([0.01, 1.0, 10.0, 40.0])
T = ab.transmittance_forward(A, d)
print(np.column_stack([A, T, ab.absorption_coefficient_integrating(T, d)]))

# %%
# A whole synthetic spectrum, and its figure of merit over 680-760 nm.
grid = WavelengthGrid.linspace(220.0, 800.0, 1.0)
spec = SynthSpec({"c270": 2.0, "c360": 0.6, "c520": 0.3, "c_ramp": 0.4, "c_offset": 0.8})
t = synth_transmittance(spec, grid)
geom = spec.geometry
for mode in ab.ConversionMode:
    a = ab.spectrum_to_absorption(t, geom, mode)
    print(f"{mode.value:>7}: band average {ab.band_average(a):.4f} cm^-1")
