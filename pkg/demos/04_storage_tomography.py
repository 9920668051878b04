"""Capture, store and retrieve a weak coherent pulse.

A 4.2-quantum pulse is written into the pre-cooled mode, stored, and read
back through the cavity. The readout gain is calibrated on the thermal
equilibrium state, then quadrature tomography splits the retrieved state
into coherent and thermal parts. The thermal part grows at Gamma_th while
the coherent part decays at gamma_m.
"""

from memsim import CoherentInput, gain_calibration, load_scenario, storage_shots
from memsim.estimators import calibrated_tomography
from memsim.linear import thermal_decoherence
from memsim.protocols import derive_seed, equilibrium_shots

sc = load_scenario("paper_device.json")
system = sc.system("write", modes=["m13"])
mode = system.modes[0]
G = sc.drive("write")[1].G

eq = equilibrium_shots(system, 20000, derive_seed(sc.seed, 0), G)
floor = equilibrium_shots(system, 20000, derive_seed(sc.seed, 1), 0.0)
cal = gain_calibration(eq, mode.n_th, reference_shots=floor)
print(f"gain {cal.value:.4f}, inferred added noise {cal.diagnostics['n_add']:.2f} quanta")

dec = thermal_decoherence(mode.gamma_m, mode.n_th)
print(f"thermal decoherence {dec.gamma_th:.2f} Hz, coherence time {dec.tau_coh * 1e3:.1f} ms\n")

print(f"{'tau (s)':>8} {'N_coh':>7} {'N_th':>8}")
for i, tau in enumerate((0.01, 0.05, 0.2, 1.0, 5.0)):
    X = storage_shots(system, CoherentInput(4.2, captured=True), tau, 5000, derive_seed(sc.seed, 10 + i))
    r = calibrated_tomography(X, cal)
    print(f"{tau:8.2f} {r.N_coh:7.2f} {r.N_th:8.2f}")
