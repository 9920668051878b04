"""Recover linewidths from a simulated output spectrum and a ringdown.

A weak probe pump reads out the thermal motion; the ensemble periodogram of
the simulated output is fitted with a Lorentzian. A ringdown of a large
coherent excitation gives the energy decay rate. Their difference is the
pure dephasing rate.
"""

from dataclasses import replace

import numpy as np

from memsim import (
    InitialState,
    PulseSequence,
    Segment,
    SimConfig,
    SimSystem,
    extract_pure_dephasing,
    fit_lorentzian,
    fit_ringdown,
    load_scenario,
    periodogram,
    simulate,
)

sc = load_scenario("paper_device.json")
mode = replace(sc.mode("m13"), gamma_phi=10 * sc.mode("m13").gamma_m)
system = SimSystem(sc.cavity, (mode,))

r = simulate(system, PulseSequence(), SimConfig(dt=0.2, duration=2000.0, seed=1, ensemble_size=100))
spec = periodogram(r.modes[:, :, 0], 0.2)
near = np.abs(spec.freq) < 1.0
line = fit_lorentzian((spec.freq[near], spec.value[near]))
print(f"spectral FWHM {line.params['fwhm_hz'] * 1e3:.2f} +- {line.stderr('fwhm_hz') * 1e3:.2f} mHz")

init = InitialState(beta=(1e4,))
r = simulate(system, PulseSequence(), SimConfig(dt=1.0, duration=480.0, seed=2, ensemble_size=20, initial=init))
energy = np.mean(np.abs(r.modes[:, :, 0]) ** 2, axis=0)
ring = fit_ringdown(r.trace.t + 0.5, energy)
print(f"ringdown rate {ring.params['rate_hz'] * 1e3:.3f} mHz (gamma_m = {mode.gamma_m * 1e3:.1f} mHz)")

gphi = extract_pure_dephasing(line.params["fwhm_hz"], ring.params["rate_hz"])
print(f"pure dephasing {gphi * 1e3:.1f} mHz (injected {mode.gamma_phi * 1e3:.1f} mHz)")

# the same fit works on the pumped output field
G = sc.drive("psd")[1].G
pumped = SimSystem(sc.cavity, (replace(mode, gamma_phi=0.0),), n_add=10.0)
seq = PulseSequence((Segment("cool", 0.0, 10000.0, amplitude=G),))
r = simulate(pumped, seq, SimConfig(dt=1.0, duration=10000.0, seed=3, ensemble_size=100, record_modes=False))
spec = periodogram(r.trace.complex, 1.0)
near = np.abs(spec.freq) < 0.25
print("output-field fit:", {k: round(float(v), 6) for k, v in fit_lorentzian((spec.freq[near], spec.value[near])).params.items()})
