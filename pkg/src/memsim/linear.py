"""Linearized frequency-domain electromechanics.

Every public argument and result is an ordinary frequency in Hz
(``f = omega / 2 pi``) or a time in seconds. Formulas are evaluated with
angular rates internally; the ``_w`` suffix marks angular quantities.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import h as planck_h, k as k_boltzmann
from scipy.optimize import brentq

__all__ = [
    "CavitySpec",
    "MechModeParams",
    "DriveConfig",
    "Spectrum",
    "TransmissionSpectrum",
    "Regime",
    "ThermalDecoherence",
    "optical_damping",
    "is_weak_coupling",
    "output_psd",
    "lorentzian_psd",
    "mechanical_peak_area",
    "transmission",
    "transmission_at",
    "zero_detuning_T",
    "critical_coupling",
    "group_delay",
    "group_delay_at",
    "classify_regime",
    "bare_dip",
    "find_coupling_for_delay",
    "find_transparent_delay",
    "cooled_occupancy",
    "bose_einstein",
    "thermal_decoherence",
    "coupling_from_power",
]

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class CavitySpec:
    f_c: float
    kappa_in: float
    kappa_ex: float

    def __post_init__(self):
        if not self.f_c > 0:
            raise ValueError("f_c must be > 0")
        if self.kappa_in < 0:
            raise ValueError("kappa_in must be >= 0")
        if not self.kappa_ex > 0:
            raise ValueError("kappa_ex must be > 0")

    @property
    def kappa(self) -> float:
        return self.kappa_in + self.kappa_ex

    @property
    def eta(self) -> float:
        return self.kappa_ex / self.kappa


@dataclass(frozen=True)
class MechModeParams:
    f_m: float
    gamma_m: float
    gamma_phi: float = 0.0
    n_th: float = 0.0

    def __post_init__(self):
        if not self.f_m > 0:
            raise ValueError("f_m must be > 0")
        if not self.gamma_m > 0:
            raise ValueError("gamma_m must be > 0")
        if self.gamma_phi < 0:
            raise ValueError("gamma_phi must be >= 0")
        if self.n_th < 0:
            raise ValueError("n_th must be >= 0")


@dataclass(frozen=True)
class DriveConfig:
    """A pump tone. ``n_th_ex`` is the occupation of the external-port bath
    (pump phase noise); ``None`` means it equals the cavity bath ``n_th_c``.
    The frequency-domain formulas ignore it."""

    detuning: float
    G: float
    n_th_c: float = 0.0
    n_add: float = 0.0
    n_th_ex: float | None = None

    def __post_init__(self):
        if self.G < 0:
            raise ValueError("G must be >= 0")
        if self.n_th_c < 0 or self.n_add < 0:
            raise ValueError("bath occupations and n_add must be >= 0")
        if self.n_th_ex is not None and self.n_th_ex < 0:
            raise ValueError("n_th_ex must be >= 0")

    @classmethod
    def red_sideband(cls, mode: MechModeParams, G: float, **kw) -> "DriveConfig":
        return cls(detuning=-mode.f_m, G=G, **kw)

    @property
    def bath_ex(self) -> float:
        return self.n_th_c if self.n_th_ex is None else self.n_th_ex


@dataclass
class Spectrum:
    freq: np.ndarray
    value: np.ndarray
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.freq = np.asarray(self.freq, dtype=float)
        self.value = np.asarray(self.value)
        if self.freq.ndim != 1 or self.freq.shape != self.value.shape:
            raise ValueError("freq and value must be 1-D arrays of equal length")
        if self.freq.size > 1 and np.any(np.diff(self.freq) <= 0):
            raise ValueError("freq must be strictly increasing")


@dataclass
class TransmissionSpectrum(Spectrum):
    """Complex t(delta) on a probe-detuning grid, with the model parameters
    needed for the closed-form group delay."""

    cavity: CavitySpec | None = None
    mode: MechModeParams | None = None
    G: float = 0.0

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.value) ** 2

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.value)


class Regime(str, enum.Enum):
    EMIA_DEEPENING = "EMIA-deepening"
    EMIA_RISING = "EMIA-rising"
    EMIT = "EMIT"

    @property
    def is_emia(self) -> bool:
        return self is not Regime.EMIT


@dataclass(frozen=True)
class ThermalDecoherence:
    gamma_th: float
    tau_coh: float
    t1: float


def _grid(freq) -> np.ndarray:
    f = np.atleast_1d(np.asarray(freq, dtype=float))
    if f.size == 0:
        raise ValueError("frequency grid is empty")
    return f


def optical_damping(G: float, kappa: float) -> float:
    if not kappa > 0:
        raise ValueError("kappa must be > 0")
    return 4 * G * G / kappa


def is_weak_coupling(G: float, kappa: float, ratio: float = 0.01) -> bool:
    """True when gamma_opt <= ratio * kappa, the regime of the reduced formulas."""
    return optical_damping(G, kappa) <= ratio * kappa


def cooled_occupancy(gamma_m: float, gamma_opt: float, n_th_m: float, n_th_c: float) -> float:
    if not gamma_m > 0:
        raise ValueError("gamma_m must be > 0")
    if gamma_opt < 0:
        raise ValueError("gamma_opt must be >= 0")
    if math.isinf(gamma_opt):
        return float(n_th_c)
    return (gamma_m * n_th_m + gamma_opt * n_th_c) / (gamma_opt + gamma_m)


def _check_red_sideband(mode: MechModeParams, drive: DriveConfig, cavity: CavitySpec):
    if abs(drive.detuning + mode.f_m) > 1e-9 * mode.f_m:
        raise ValueError("output_psd requires a red-sideband pump (detuning = -f_m)")
    if mode.f_m <= cavity.kappa:
        warnings.warn("unresolved sideband (f_m <= kappa): the reduced PSD is approximate", stacklevel=3)


def output_psd(cavity: CavitySpec, mode: MechModeParams, drive: DriveConfig, freq) -> Spectrum:
    """Symmetrized output PSD (quanta) for a red-sideband pump.

    ``freq`` is measured from the pump, so the mechanical sideband sits at
    ``f_m``. Sets ``flags['sideband_dip']`` when Nm < 2 Nc.
    """
    _check_red_sideband(mode, drive, cavity)
    f = _grid(freq)
    k = TWO_PI * cavity.kappa
    kex = TWO_PI * cavity.kappa_ex
    gm = TWO_PI * mode.gamma_m
    gopt = optical_damping(TWO_PI * drive.G, k)
    gtot = gm + gopt
    nc = drive.n_th_c
    nm = cooled_occupancy(gm, gopt, mode.n_th, nc)
    d = TWO_PI * (f - mode.f_m)
    s = (
        drive.n_add
        + 4 * kex * k * nc / (k * k + 4 * d * d)
        + 4 * cavity.eta * gopt * gtot * (nm - 2 * nc) / (gtot * gtot + 4 * d * d)
    )
    flags = {"n_m": nm, "gamma_tot_hz": gtot / TWO_PI, "sideband_dip": bool(nm < 2 * nc)}
    if not is_weak_coupling(drive.G, cavity.kappa):
        flags["strong_coupling"] = True
    return Spectrum(f, s, flags)


def lorentzian_psd(mode: MechModeParams, gain: float, n_add: float, freq) -> Spectrum:
    """``n_add + gain (gm/2) / ((gm/2)^2 + (w - wm)^2)`` with angular gm, w.

    ``gain`` is the angular-rate prefactor ``2 eta gamma_opt N_m`` (rad/s).
    """
    f = _grid(freq)
    hg = TWO_PI * mode.gamma_m / 2
    d = TWO_PI * (f - mode.f_m)
    return Spectrum(f, n_add + gain * hg / (hg * hg + d * d))


def mechanical_peak_area(cavity: CavitySpec, mode: MechModeParams, drive: DriveConfig) -> float:
    """Integral over the Hz grid of the mechanical term of the output PSD,
    ``eta * gamma_opt * (Nm - 2 Nc)`` with angular gamma_opt."""
    k = TWO_PI * cavity.kappa
    gm = TWO_PI * mode.gamma_m
    gopt = optical_damping(TWO_PI * drive.G, k)
    nm = cooled_occupancy(gm, gopt, mode.n_th, drive.n_th_c)
    return cavity.eta * gopt * (nm - 2 * drive.n_th_c)


def _t_parts(cavity: CavitySpec, mode: MechModeParams, G: float, delta):
    d = TWO_PI * np.asarray(delta, dtype=float)
    k = TWO_PI * cavity.kappa
    g = TWO_PI * mode.gamma_m
    G2 = (TWO_PI * G) ** 2
    A = 1j * d - g / 2
    B = 1j * d - k / 2
    D = A * B + G2
    t = 1 + cavity.eta * k * A / D
    dt = cavity.eta * k * 1j * (G2 - A * A) / (D * D)
    return t, dt


def transmission_at(cavity: CavitySpec, mode: MechModeParams, G: float, delta):
    """Complex probe transmission at probe detuning(s) ``delta`` (Hz)."""
    t, _ = _t_parts(cavity, mode, G, delta)
    return t if np.ndim(t) else complex(t)


def transmission(cavity: CavitySpec, mode: MechModeParams, G: float, delta) -> TransmissionSpectrum:
    d = _grid(delta)
    t, _ = _t_parts(cavity, mode, G, d)
    return TransmissionSpectrum(d, t, {}, cavity=cavity, mode=mode, G=G)


def zero_detuning_T(eta: float, kappa: float, gamma_m: float, G: float) -> float:
    """Closed-form |t(0)|^2. Rate units cancel, so Hz inputs are fine."""
    g4 = 4 * G * G
    kg = kappa * gamma_m
    return abs((g4 - (2 * eta - 1) * kg) / (g4 + kg)) ** 2


def critical_coupling(eta: float, kappa: float, gamma_m: float) -> float:
    """Gc in the units of the rates (Hz in, Hz out). Raises for eta < 1/2,
    where perfect absorption is impossible."""
    if eta < 0.5:
        raise ValueError("no critical coupling for eta < 1/2")
    return math.sqrt((2 * eta - 1) * kappa * gamma_m / 4)


def bare_dip(eta: float) -> float:
    """|t(0)|^2 of the bare cavity, |1 - 2 eta|^2."""
    return (1 - 2 * eta) ** 2


def group_delay_at(cavity: CavitySpec, mode: MechModeParams, G: float, delta):
    """Group delay d(arg t)/d(omega) in seconds; positive means slow light."""
    t, dt = _t_parts(cavity, mode, G, delta)
    tau = np.imag(dt / t)
    return tau if np.ndim(tau) else float(tau)


def group_delay(spec: TransmissionSpectrum) -> Spectrum:
    """Closed-form group delay on the grid of a transmission spectrum.

    Flags ``coarse_grid`` (and warns) when arg t moves by more than pi/4
    between neighbouring grid points.
    """
    if not isinstance(spec, TransmissionSpectrum) or spec.cavity is None:
        raise TypeError("group_delay needs a spectrum produced by transmission()")
    tau = group_delay_at(spec.cavity, spec.mode, spec.G, spec.freq)
    flags = {}
    if spec.freq.size > 1:
        jumps = np.abs(np.angle(spec.value[1:] / spec.value[:-1]))
        if np.any(jumps > np.pi / 4):
            flags["coarse_grid"] = True
            warnings.warn("delay grid too coarse: phase step exceeds pi/4", stacklevel=2)
    return Spectrum(spec.freq, np.atleast_1d(tau), flags)


def classify_regime(cavity: CavitySpec, mode: MechModeParams, G: float) -> Regime:
    eta, k, g = cavity.eta, cavity.kappa, mode.gamma_m
    gc = critical_coupling(eta, k, g) if eta >= 0.5 else 0.0
    if G < gc:
        return Regime.EMIA_DEEPENING
    if zero_detuning_T(eta, k, g, G) <= bare_dip(eta):
        return Regime.EMIA_RISING
    return Regime.EMIT


def find_coupling_for_delay(cavity: CavitySpec, mode: MechModeParams, tau_target: float) -> tuple[float, float]:
    """Smallest-delay G above Gc whose zero-detuning delay reaches
    ``tau_target``; returns (G, tau(0)). tau(0) diverges at Gc and falls
    monotonically above it, so the root is bracketed by Gc and a large G."""
    gc = critical_coupling(cavity.eta, cavity.kappa, mode.gamma_m)
    if gc == 0:
        raise ValueError("delay divergence requires eta > 1/2")

    def f(G):
        return group_delay_at(cavity, mode, G, 0.0) - tau_target

    lo = gc * (1 + 1e-12)
    hi = gc * 2
    while f(hi) > 0:
        hi *= 2
        if hi > 1e3 * cavity.kappa:
            raise RuntimeError("target delay not reached")
    G = brentq(f, lo, hi, xtol=1e-15 * gc, rtol=4 * np.finfo(float).eps)
    # nudge toward Gc so the returned point satisfies tau >= target exactly
    while group_delay_at(cavity, mode, G, 0.0) < tau_target:
        G = gc + (G - gc) * (1 - 1e-12)
    return G, group_delay_at(cavity, mode, G, 0.0)


def find_transparent_delay(
    cavity: CavitySpec, mode: MechModeParams, fraction: float = 0.99, baseline: float = 1.0
) -> tuple[float, float, float]:
    """Smallest G above Gc with |t(0)|^2 >= fraction * baseline.

    ``baseline`` defaults to the off-resonant unit transmission. Returns
    (G, T(0), tau(0)).
    """
    eta, k, g = cavity.eta, cavity.kappa, mode.gamma_m
    target = fraction * baseline
    if target >= 1:
        raise ValueError("fraction * baseline must be < 1")
    gc = critical_coupling(eta, k, g)

    def f(G):
        return zero_detuning_T(eta, k, g, G) - target

    hi = max(gc, 1e-30) * 2
    while f(hi) < 0:
        hi *= 2
    G = brentq(f, gc, hi, xtol=1e-14 * hi, rtol=4 * np.finfo(float).eps)
    while zero_detuning_T(eta, k, g, G) < target:
        G *= 1 + 1e-14
    return G, zero_detuning_T(eta, k, g, G), group_delay_at(cavity, mode, G, 0.0)


def bose_einstein(f_m: float, temperature: float) -> float:
    if not temperature > 0:
        raise ValueError("temperature must be > 0")
    if not f_m > 0:
        raise ValueError("f_m must be > 0")
    x = planck_h * f_m / (k_boltzmann * temperature)
    if x < 1e-6:
        return 1 / x - 0.5 + x / 12
    if x > 700:
        return 0.0
    return 1 / math.expm1(x)


def thermal_decoherence(gamma_m: float, n_th: float) -> ThermalDecoherence:
    if not gamma_m > 0:
        raise ValueError("gamma_m must be > 0")
    if n_th < 0:
        raise ValueError("n_th must be >= 0")
    gth = gamma_m * n_th
    tau = math.inf if gth == 0 else 1 / (TWO_PI * gth)
    return ThermalDecoherence(gamma_th=gth, tau_coh=tau, t1=1 / (TWO_PI * gamma_m))


def coupling_from_power(power_dbm, anchor_power_dbm: float, anchor_G: float):
    """G for a pump power, with intracavity photon number linear in power
    and calibrated by one (power, G) anchor: ``G = G_a sqrt(P / P_a)``."""
    if anchor_G < 0:
        raise ValueError("anchor_G must be >= 0")
    p = np.asarray(power_dbm, dtype=float)
    out = anchor_G * 10 ** ((p - anchor_power_dbm) / 20)
    return out if out.ndim else float(out)
