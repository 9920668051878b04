"""Parameter extraction from simulated or measured data."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .linear import Spectrum, bose_einstein
from .protocols import tomography
from .sim import Trace

__all__ = [
    "FitResult",
    "CalibrationConstant",
    "CalibrationError",
    "InconsistencyError",
    "lorentzian",
    "fit_lorentzian",
    "fit_ringdown",
    "fit_exponential_decay",
    "energy_envelope",
    "periodogram",
    "extract_pure_dephasing",
    "thermal_area_calibration",
    "linewidth_vs_temperature",
    "gamma_opt_vs_power",
    "gain_calibration",
]

MAX_ITER = 200
XTOL = 1e-10


class CalibrationError(ValueError):
    pass


class InconsistencyError(ValueError):
    pass


@dataclass
class FitResult:
    params: dict
    covariance: np.ndarray
    residual_rms: float
    converged: bool
    diagnostics: dict = field(default_factory=dict, repr=False)

    def stderr(self, name: str) -> float:
        i = list(self.params).index(name)
        return float(math.sqrt(max(self.covariance[i, i], 0.0)))

    def to_dict(self) -> dict:
        return {
            "params": {k: float(v) for k, v in self.params.items()},
            "covariance": np.asarray(self.covariance, dtype=float).tolist(),
            "residual_rms": float(self.residual_rms),
            "converged": bool(self.converged),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(dict(d["params"]), np.asarray(d["covariance"], dtype=float), d["residual_rms"], d["converged"])


@dataclass(frozen=True)
class CalibrationConstant:
    value: float
    units: str
    anchor: str
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.value > 0:
            raise CalibrationError(f"calibration constant must be > 0, got {self.value!r}")


def lorentzian(f, center_hz, fwhm_hz, area, offset):
    hw = fwhm_hz / 2
    return offset + area / math.pi * hw / (hw * hw + (np.asarray(f) - center_hz) ** 2)


def _covariance(J: np.ndarray, resid: np.ndarray) -> np.ndarray:
    n, p = J.shape
    dof = max(n - p, 1)
    s2 = float(resid @ resid) / dof
    try:
        return np.linalg.pinv(J.T @ J) * s2
    except np.linalg.LinAlgError:
        return np.full((p, p), np.nan)


def _half_max_width(x, y, i_peak, floor):
    half = floor + (y[i_peak] - floor) / 2
    lo = i_peak
    while lo > 0 and y[lo] > half:
        lo -= 1
    hi = i_peak
    while hi < y.size - 1 and y[hi] > half:
        hi += 1
    return max(x[hi] - x[lo], x[1] - x[0] if x.size > 1 else 1.0)


def fit_lorentzian(spectrum, p0: dict | None = None) -> FitResult:
    """Least-squares fit of ``offset + (area/pi) (w/2) / ((w/2)^2 + (f-f0)^2)``.

    ``spectrum`` is a :class:`Spectrum` or ``(freq, value)``. The fit runs
    on centred, scaled coordinates so that e.g. a mHz line at MHz carrier
    frequency is well conditioned; the covariance is mapped back to Hz.
    """
    f, y = (spectrum.freq, spectrum.value) if isinstance(spectrum, Spectrum) else map(np.asarray, spectrum)
    f = np.asarray(f, dtype=float)
    y = np.real(np.asarray(y)).astype(float)
    names = ("center_hz", "fwhm_hz", "area", "offset")
    diag: dict = {}
    if f.size < 5 or f.shape != y.shape:
        raise ValueError("need at least 5 matching spectrum points")

    floor0 = float(np.median(y))
    i_pk = int(np.argmax(y))
    height = float(y[i_pk] - floor0)
    if p0 is None:
        if not height > 0 or not np.isfinite(height):
            diag["reason"] = "flat spectrum"
            nan = np.full((4, 4), np.nan)
            return FitResult(dict(zip(names, [f[i_pk], 0.0, 0.0, floor0])), nan, float(np.std(y)), False, diag)
        w0 = _half_max_width(f, y, i_pk, floor0)
        p0 = {"center_hz": f[i_pk], "fwhm_hz": w0, "area": math.pi / 2 * height * w0, "offset": floor0}
    f0, w0 = float(p0["center_hz"]), abs(float(p0["fwhm_hz"]))
    if not w0 > 0:
        raise ValueError("initial fwhm must be > 0")
    ys = max(float(np.max(np.abs(y))), 1e-300)
    u = (f - f0) / w0
    v = y / ys
    q0 = np.array([0.0, 1.0, float(p0["area"]) / (w0 * ys), float(p0["offset"]) / ys])

    def resid(q):
        c, w, a, o = q
        hw = w / 2
        d = u - c
        return o + a / math.pi * hw / (hw * hw + d * d) - v

    def jac(q):
        c, w, a, o = q
        hw = w / 2
        d = u - c
        den = hw * hw + d * d
        J = np.empty((u.size, 4))
        J[:, 0] = a / math.pi * hw * 2 * d / den**2
        J[:, 1] = a / math.pi * 0.5 * (d * d - hw * hw) / den**2
        J[:, 2] = hw / (math.pi * den)
        J[:, 3] = 1.0
        return J

    sol = least_squares(resid, q0, jac=jac, method="lm", xtol=XTOL, ftol=1e-15, gtol=1e-15, max_nfev=MAX_ITER * 5)
    c, w, a, o = sol.x
    params = dict(zip(names, [f0 + c * w0, abs(w) * w0, a * w0 * ys, o * ys]))
    scale = np.diag([w0, w0, w0 * ys, ys])
    cov = scale @ _covariance(sol.jac, sol.fun) @ scale
    n_in = int(np.sum(np.abs(f - params["center_hz"]) <= params["fwhm_hz"] / 2))
    diag.update(status=int(sol.status), nfev=int(sol.nfev), points_in_fwhm=n_in)
    if n_in < 10:
        diag["undersampled"] = True
        warnings.warn(f"only {n_in} points across the FWHM", stacklevel=2)
    ok = bool(sol.success and sol.status > 0 and np.all(np.isfinite(sol.x)) and a > 0 and w != 0)
    if not a > 0:
        diag["reason"] = "non-positive area"
    rms = float(np.sqrt(np.mean(sol.fun**2))) * ys
    if ok:
        ev = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        ok = bool(np.isfinite(rms) and np.all(np.isfinite(ev)) and ev.min() >= -1e-12 * max(abs(ev.max()), 1e-300))
    return FitResult(params, cov, rms, ok, diag)


def energy_envelope(trace: Trace) -> np.ndarray:
    """``I^2 + Q^2``, averaged over trajectories for an ensemble trace."""
    e = trace.I**2 + trace.Q**2
    return e.mean(axis=0) if e.ndim == 2 else e


def fit_exponential_decay(t, y, n_iter: int = 3) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Weighted log-linear fit ``y = A exp(-k t)``; returns (k, A, cov, mask).

    Non-positive samples are masked. The weights start as ``y^2`` (inverse
    variance of ``log y`` for additive noise) and are refined with the model
    values to reduce the bias noisy weights introduce.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = np.isfinite(y) & (y > 0)
    if mask.sum() < 2:
        raise ValueError("need at least two positive samples")
    tt, yy = t[mask], y[mask]
    X = np.column_stack([np.ones_like(tt), -tt])
    ly = np.log(yy)
    w = yy**2
    for _ in range(n_iter):
        sw = np.sqrt(w)
        coef, *_ = np.linalg.lstsq(X * sw[:, None], ly * sw, rcond=None)
        w = np.exp(2 * (X @ coef))
    sw = np.sqrt(w)
    r = (ly - X @ coef) * sw
    dof = max(tt.size - 2, 1)
    s2 = float(r @ r) / dof
    cov = np.linalg.pinv((X * w[:, None]).T @ X) * s2
    return float(coef[1]), float(math.exp(coef[0])), cov, mask


def fit_ringdown(t, energy=None, refine: bool = True) -> FitResult:
    """Energy decay rate (Hz, ``E ~ exp(-2 pi rate t)``) from an envelope.

    Accepts ``(t, energy)`` arrays or a :class:`Trace` whose ``I^2 + Q^2`` is
    the energy. The log-domain weighted fit (non-positive samples masked
    with a warning) seeds a damped Gauss-Newton refinement on the linear
    envelope, which removes the bias that taking logs of noisy samples
    introduces.
    """
    if isinstance(t, Trace):
        tr = t
        t, energy = tr.t, energy_envelope(tr)
    t = np.asarray(t, dtype=float)
    energy = np.asarray(energy, dtype=float)
    if (energy <= 0).any():
        warnings.warn(f"masking {(energy <= 0).sum()} non-positive envelope samples", stacklevel=2)
    k, A, cov, mask = fit_exponential_decay(t, energy)
    diag = {"masked": int((~mask).sum()), "log_fit_rate_hz": k / (2 * math.pi)}
    ok = bool(np.isfinite(k) and np.isfinite(A))
    if refine and ok:
        t0 = float(t[0])
        tt = t - t0
        ys = float(np.max(np.abs(energy)))
        ts = max(float(tt[-1]), 1e-300)
        v = energy / ys

        def resid(q):
            return q[1] * np.exp(-q[0] * tt / ts) - v

        def jac(q):
            e = np.exp(-q[0] * tt / ts)
            return np.column_stack([-q[1] * tt / ts * e, e])

        q0 = np.array([k * ts, A * math.exp(-k * t0) / ys])
        sol = least_squares(resid, q0, jac=jac, method="lm", xtol=XTOL, ftol=1e-15, gtol=1e-15, max_nfev=MAX_ITER * 3)
        if sol.success and np.all(np.isfinite(sol.x)):
            k = sol.x[0] / ts
            A = sol.x[1] * ys * math.exp(k * t0)
            c = _covariance(sol.jac, sol.fun)
            # (q0, q1) -> (rate_hz, amplitude at t = 0)
            J = np.array([[1 / (2 * math.pi * ts), 0.0], [A * t0 / ts, ys * math.exp(k * t0)]])
            cov_p = J @ c @ J.T
            diag.update(status=int(sol.status), nfev=int(sol.nfev))
            rms = float(np.sqrt(np.mean(sol.fun**2))) * ys
            return FitResult({"rate_hz": k / (2 * math.pi), "amplitude": A}, cov_p, rms, True, diag)
        diag["refine_failed"] = True
    model = A * np.exp(-k * t[mask])
    rms = float(np.sqrt(np.mean((energy[mask] - model) ** 2)))
    J = np.diag([1 / (2 * math.pi), A])
    cov_p = J @ cov[::-1, ::-1] @ J
    return FitResult({"rate_hz": k / (2 * math.pi), "amplitude": A}, cov_p, rms, ok, diag)


def periodogram(samples, dt: float, detrend: bool = False) -> Spectrum:
    """Ensemble-averaged two-sided periodogram of complex samples.

    Normalised so white noise with ``<|x|^2> dt = S`` per sample has flat
    level S. Rows of a 2-D input are trajectories. Frequencies are sorted.
    """
    x = np.atleast_2d(np.asarray(samples))
    if detrend:
        x = x - x.mean(axis=1, keepdims=True)
    n = x.shape[1]
    S = dt / n * np.mean(np.abs(np.fft.fft(x, axis=1)) ** 2, axis=0)
    nu = np.fft.fftfreq(n, dt)
    order = np.argsort(nu)
    return Spectrum(nu[order], S[order])


def extract_pure_dephasing(spectral_fwhm: float, ringdown_rate: float, sigma: float = 0.0) -> float:
    """``max(0, fwhm - rate)``; a mismatch below ``-3 sigma`` is an error."""
    diff = spectral_fwhm - ringdown_rate
    tol = 3 * sigma + 1e-12 * max(abs(spectral_fwhm), abs(ringdown_rate))
    if diff < -tol:
        raise InconsistencyError(
            f"spectral FWHM {spectral_fwhm!r} is narrower than the ringdown rate {ringdown_rate!r}"
        )
    return max(0.0, diff)


def _linear_fit(x, y, through_origin=False):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    X = x[:, None] if through_origin else np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    cov = _covariance(X, r)
    return coef, cov, r


def thermal_area_calibration(points, f_m: float, floor_k: float = 0.02) -> CalibrationConstant:
    """Quanta per unit peak area from ``(T, area)`` pairs.

    Fits ``area = s * Nth(T) + b`` over temperatures at or above the
    thermalization floor and returns ``1/s``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (T, area) pairs")
    use = pts[pts[:, 0] >= floor_k * (1 - 1e-12)]
    if use.shape[0] < 3:
        raise CalibrationError(f"need >= 3 temperatures at or above {floor_k} K")
    nth = np.array([bose_einstein(f_m, T) for T in use[:, 0]])
    (s, b), cov, r = _linear_fit(nth, use[:, 1])
    if not s > 0:
        raise CalibrationError("peak area does not grow with temperature")
    return CalibrationConstant(
        1 / s,
        "quanta per area",
        f"{use.shape[0]} temperatures >= {floor_k} K",
        {"slope": s, "intercept": b, "intercept_quanta": b / s, "covariance": cov, "residual_rms": float(np.sqrt(np.mean(r**2)))},
    )


def linewidth_vs_temperature(points) -> FitResult:
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] < 3:
        raise ValueError("need at least 3 points")
    (s, b), cov, r = _linear_fit(pts[:, 0], pts[:, 1])
    return FitResult({"slope": s, "intercept": b}, cov, float(np.sqrt(np.mean(r**2))), True)


def gamma_opt_vs_power(points, gamma_m: float) -> FitResult:
    """Through-origin fit of ``gamma_tot - gamma_m`` against linear power.

    ``diagnostics['free_intercept']`` is the intercept of an unconstrained
    fit, a check that the optical damping vanishes at zero power.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] < 2:
        raise ValueError("need at least 2 points")
    gopt = pts[:, 1] - gamma_m
    (s,), cov, r = _linear_fit(pts[:, 0], gopt, through_origin=True)
    diag = {}
    if pts.shape[0] >= 3:
        (_, b), cov_free, _ = _linear_fit(pts[:, 0], gopt)
        diag = {"free_intercept": float(b), "free_intercept_stderr": float(math.sqrt(max(cov_free[1, 1], 0)))}
    return FitResult({"slope": s}, cov, float(np.sqrt(np.mean(r**2))), True, diag)


def gain_calibration(
    eq_shots,
    known_nth: float,
    n_add: float | None = None,
    reference_shots=None,
    n_ref: float = 0.0,
) -> CalibrationConstant:
    """Gain factor C making thermal-equilibrium shots read ``known_nth``.

    The added noise is taken from ``n_add`` (in calibrated quanta) if given,
    otherwise inferred from ``reference_shots`` of known occupation
    ``n_ref`` (e.g. the readout with the mechanics decoupled, ``n_ref=0``),
    otherwise assumed zero. Returns C with the inferred ``n_add`` in
    ``diagnostics``.
    """
    if not known_nth > 0:
        raise CalibrationError("cannot calibrate on a vacuum state (known Nth must be > 0)")
    s = np.asarray(eq_shots, dtype=float)
    if s.ndim != 2 or s.shape[0] < 2:
        raise CalibrationError("need at least 2 equilibrium shots")
    v_eq = float(s[:, 0].var() + s[:, 1].var())
    if not v_eq > 0:
        raise CalibrationError("equilibrium shots have zero variance")
    if n_add is not None:
        c2 = (known_nth + n_add) / v_eq
        nadd = float(n_add)
    elif reference_shots is not None:
        rs = np.asarray(reference_shots, dtype=float)
        v_ref = float(rs[:, 0].var() + rs[:, 1].var())
        if not v_eq > v_ref:
            raise CalibrationError("equilibrium variance does not exceed the reference variance")
        c2 = (known_nth - n_ref) / (v_eq - v_ref)
        nadd = c2 * v_ref - n_ref
    else:
        c2 = known_nth / v_eq
        nadd = 0.0
    return CalibrationConstant(
        math.sqrt(c2),
        "quanta^0.5 per raw quadrature unit",
        f"thermal equilibrium at Nth = {known_nth}",
        {"n_add": nadd, "variance_raw": v_eq},
    )


def calibrated_tomography(shots, cal: CalibrationConstant):
    """Tomography in quanta with the gain and added noise of ``cal``."""
    return tomography(shots, n_add=cal.diagnostics.get("n_add", 0.0), gain=cal.value)
