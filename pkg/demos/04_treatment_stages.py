"""
Irradiation and annealing
=========================

Synthetic grown, irradiated and annealed spectra for a low- and a
high-fluence run. The comparison reports the change of the 680-760 nm band
average at each step and flags over-irradiation when a GR1-like residual
survives the anneal.
"""
# %%
from nvoptics.analysis import compare_stages
from nvoptics.synth import stage_scenario

for fluence in ("low", "high"):
    cmp = compare_stages(stage_scenario(fluence))
    print(f"--- {fluence} fluence")
    for st in cmp.stages:
        print(f"{st.label.name:>11}: band avg {st.band_avg_680_760:.4f}  gr1 {st.gr1_metric:.4f}")
    for d in cmp.deltas:
        print(f"{d['from']} -> {d['to']}: {d['band_avg_680_760']:+.4f}")
    print("flags:", cmp.flags)
