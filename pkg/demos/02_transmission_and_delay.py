"""Probe transmission and group delay through the electromechanical window.

Walks the pump coupling from below the critical value Gc (absorption dip
deepens) through Gc (perfect absorption, diverging delay) to strong pumping
(transparency), then finds the couplings giving an hour-long delay and a
transparent point with a sizeable delay.
"""

from memsim import load_scenario
from memsim.linear import (
    classify_regime,
    critical_coupling,
    find_coupling_for_delay,
    find_transparent_delay,
    group_delay_at,
    zero_detuning_T,
)

sc = load_scenario("paper_device.json")
cav, mode = sc.cavity, sc.mode("m13")
gc = critical_coupling(cav.eta, cav.kappa, mode.gamma_m)
print(f"eta = {cav.eta:.2f}, kappa = {cav.kappa / 1e3:.2f} kHz, Gc = {gc:.3f} Hz\n")

print(f"{'G (Hz)':>9} {'T(0)':>10} {'tau(0) (s)':>12}  regime")
for G in (2.0, 5.0, 9.0, 9.2, 10.46, 50.0, 312.0, 961.07):
    T = zero_detuning_T(cav.eta, cav.kappa, mode.gamma_m, G)
    tau = group_delay_at(cav, mode, G, 0.0)
    print(f"{G:9.2f} {T:10.3e} {tau:12.4g}  {classify_regime(cav, mode, G).value}")

G, tau = find_coupling_for_delay(cav, mode, 3600.0)
print(f"\none-hour delay at G = {G:.5f} Hz (tau = {tau:.0f} s)")
G, T, tau = find_transparent_delay(cav, mode, 0.99)
print(f"99% transmission at G = {G:.1f} Hz with tau = {tau * 1e3:.0f} ms")
