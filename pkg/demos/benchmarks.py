"""
Benchmark scenarios
===================

Stability of the stance distribution, a biased injection, archetype mixes
and topology sweeps, all on a reduced population so the script runs fast.
"""

from mass_sim import Placement, PlacementMode, SimConfig
from mass_sim.experiments import bench_heterogeneity, bench_perturbation, bench_stability, bench_topology

cfg = SimConfig(n=150, T=40, R=10)

stab = bench_stability(cfg)
print("drift (mean W1):", round(stab.summary["mean_w1"], 5))
print("last-quarter slopes:", stab.summary["last_quarter_slope"])

# ten stubborn agents at +1, wired in at step 10
pert = bench_perturbation(cfg, inject_count=10, inject_bias=1.0, at_step=10)
print("shift of mean stance at T:", round(pert.summary["mean_final_shift"], 4))
print("agents moved by more than 0.01:", pert.summary["mean_cascade_size"])

het = bench_heterogeneity(cfg, [Placement(), Placement(PlacementMode.HUBS, 10), Placement(PlacementMode.PERIPHERY, 10)])
print("final mean stance by mix:", het.summary["mean_final_phi_mean"])

topo = bench_topology(cfg, [{"kind": "BA", "m": 3}, {"kind": "WS", "k": 6, "p": 0.08}, {"kind": "ER", "p": 0.04}])
for name, h in topo.summary["time_to_half_variance"].items():
    print(f"{name:18s} time to half variance: {h['mean']}")
