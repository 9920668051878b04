"""Sideband cooling: closed form against a stochastic simulation.

The mode starts in equilibrium with its 20 mK bath (about 476 quanta) and is
cooled by a red-sideband pump; the simulated long-time occupancy is compared
with the closed-form result for several pump strengths.
"""

from dataclasses import replace

from memsim import SimConfig, bose_einstein, cooled_occupancy, load_scenario
from memsim.protocols import cooling_experiment, coupling_for_damping

sc = load_scenario("paper_device.json")
system = sc.system("write", modes=["m13"])
mode = system.modes[0]
print(f"bath occupation at {sc.temperature * 1e3:.0f} mK: {bose_einstein(mode.f_m, sc.temperature):.1f}")

cfg = SimConfig(dt=1.0, duration=1.0, seed=3, ensemble_size=200)
print(f"\n{'gamma_opt (Hz)':>15} {'closed form':>12} {'simulated':>16}")
for gopt in (0.01, 0.1, 1.0, 12.6):
    G = coupling_for_damping(gopt, sc.cavity.kappa)
    run = cooling_experiment(system, G, replace(cfg, seed=cfg.seed + int(gopt * 100)))
    n = cooled_occupancy(mode.gamma_m, gopt, mode.n_th, system.n_th_c)
    print(f"{gopt:15.2f} {n:12.3f} {run.occupancy:9.3f} +- {run.stderr:.3f}")
