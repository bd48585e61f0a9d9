"""
Birefringence maps
==================

A polarimeter gives a retardation map in nm. Dividing by the thickness gives
the birefringence, whose mean decides whether a plate counts as ultra-low
(below 1e-5), and whose value bounds the polarization loss of the NV signal.
"""
# %%
from nvoptics.birefringence import classify_ultra_low, delta_n_map, loss_map, map_stats, worst_case_loss
from nvoptics.synth import Blob, MapSynthSpec, synth_retardation_map
from nvoptics.types import SampleGeometry

geom = SampleGeometry(300.0)
print("loss at dn=1e-4:", worst_case_loss(1e-4, geom.thickness_cm, 700.0))
print("loss at dn=1e-5:", worst_case_loss(1e-5, geom.thickness_cm, 700.0))

# %%
spec = MapSynthSpec(width=80, height=60, baseline_dn=4e-6, blobs=(Blob(20, 30, 6, 3e-5),),
                    noise_sigma_nm=0.2, seed=3, mask_shape="ellipse")
dn = delta_n_map(synth_retardation_map(spec), geom)
st = map_stats(dn)
print(st)
print("ultra-low:", classify_ultra_low(st))

# %%
# Loss is a per-pixel map; its maximum sits on the strain blob.
print("max loss:", map_stats(loss_map(dn, geom)).max)
