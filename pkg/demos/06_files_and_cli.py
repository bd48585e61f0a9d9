"""
Files and the command line
==========================

Write a synthetic transmittance file, then run the ``nvoptics`` command on
it. Every command writes a JSON report with the input hashes and the
effective configuration.
"""
# %%
import json
from pathlib import Path

from nvoptics.cli import main
from nvoptics.io import write_spectrum
from nvoptics.synth import SynthSpec, synth_transmittance
from nvoptics.types import WavelengthGrid

out = Path("demo_output")
out.mkdir(exist_ok=True)
spec = SynthSpec({"c270": 2.0, "c360": 0.6, "c520": 0.3, "c_ramp": 0.4, "c_offset": 0.8}, noise_sigma=0.005, seed=2)
write_spectrum(out / "sample.csv", synth_transmittance(spec, WavelengthGrid.linspace(220, 800, 2.0)), spec.geometry)
print((out / "sample.csv").read_text().splitlines()[:4])

# %%
# Full-range spectra come from a detector without the sphere, so decompose
# converts transmittance with the simple form by default. The offset then
# also carries the surface reflection loss.
code = main(["decompose", str(out / "sample.csv"), "--report", str(out / "decompose.json"), "--svg", str(out / "fit.svg")])
print("exit code", code)
print(json.dumps(json.loads((out / "decompose.json").read_text())["results"]["files"][0]["decomposition"]["coefficients"], indent=1))
