"""Analytic modal model of a tensioned square membrane read out by a
parallel-plate capacitor with a notched counter-electrode.

Mode shapes are ideal sin-products ``sin(k pi x / L) sin(l pi y / L)`` on
``[0, L]^2``. Anisotropic in-plane stress only enters through the
frequencies; shape distortion is ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.constants import hbar

__all__ = [
    "DomainError",
    "GeometryError",
    "MembraneSpec",
    "ElectrodeGeometry",
    "Capacitor",
    "ModeIndex",
    "ModeRecord",
    "mode_frequency",
    "mode_shape",
    "shape_function",
    "supermode",
    "Supermode",
    "sensing_quadrature",
    "overlap_integral",
    "effective_mass",
    "zero_point_fluctuation",
    "estimate_g0",
    "build_catalog",
]

DEFAULT_ORDER = 64
DEFAULT_THRESHOLD = 1e-3


class DomainError(ValueError):
    """Point lies outside the membrane."""


class GeometryError(ValueError):
    """Electrode geometry is inconsistent with the membrane."""


@dataclass(frozen=True)
class MembraneSpec:
    """Square membrane: geometry, density and biaxial stress (SI units).

    ``effective_density`` optionally overrides ``density`` in the mass
    calculation (e.g. to account for electrode loading).
    """

    side_length: float
    thickness: float
    density: float
    stress_x: float
    stress_y: float
    effective_density: float | None = None

    def __post_init__(self):
        for name in ("side_length", "thickness", "density", "stress_x", "stress_y"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if self.effective_density is not None and not self.effective_density > 0:
            raise ValueError("effective_density must be > 0")

    @property
    def mass_density(self) -> float:
        return self.density if self.effective_density is None else self.effective_density


@dataclass(frozen=True)
class ElectrodeGeometry:
    """Sensing region of the mechanical capacitor.

    A centred disc (the metallised top electrode) modified by a rectangular
    strip of width ``notch_width`` running from the membrane centre towards
    +y over ``notch_length``. ``notch_sign=-1`` removes the strip from the
    disc, ``+1`` adds it.
    """

    disc_radius: float = 100e-6
    notch_width: float = 40e-6
    notch_length: float = 100e-6
    notch_sign: int = -1

    def __post_init__(self):
        if not self.disc_radius > 0:
            raise GeometryError("disc_radius must be > 0")
        if self.notch_width < 0 or self.notch_length < 0:
            raise GeometryError("notch dimensions must be >= 0")
        if self.notch_sign not in (-1, 1):
            raise GeometryError("notch_sign must be +1 or -1")

    def check_fits(self, side_length: float) -> None:
        half = side_length / 2
        if self.disc_radius > half * (1 + 1e-12):
            raise GeometryError("disc_radius exceeds L/2")
        if self.notch_length > half * (1 + 1e-12):
            raise GeometryError("notch_length exceeds L/2")
        if self.notch_width / 2 > half * (1 + 1e-12):
            raise GeometryError("notch_width exceeds L")


@dataclass(frozen=True)
class Capacitor:
    """Parallel-plate reduction: vacuum gap and the fraction of cavity
    energy stored in the mechanical capacitor."""

    gap: float = 576e-9
    participation: float = 0.05

    def __post_init__(self):
        if not self.gap > 0:
            raise ValueError("capacitor gap must be > 0")
        if not 0 <= self.participation <= 1:
            raise ValueError("participation must lie in [0, 1]")


@dataclass(frozen=True, order=True)
class ModeIndex:
    k: int
    l: int

    def __post_init__(self):
        if int(self.k) != self.k or int(self.l) != self.l or self.k < 1 or self.l < 1:
            raise ValueError(f"mode numbers must be positive integers, got ({self.k}, {self.l})")

    def mirrored(self) -> "ModeIndex":
        return ModeIndex(self.l, self.k)

    def __iter__(self):
        return iter((self.k, self.l))


@dataclass(frozen=True)
class ModeRecord:
    """One catalog entry. ``supermode`` is ``'+'``/``'-'`` when the entry is
    the constructive/destructive combination of a degenerate (k,l)/(l,k)
    pair, otherwise ``None``."""

    index: ModeIndex
    frequency: float
    effective_mass: float
    x_zpf: float
    overlap: float
    g0: float
    detectable: bool
    supermode: str | None = None


def _as_index(idx) -> ModeIndex:
    return idx if isinstance(idx, ModeIndex) else ModeIndex(*idx)


def mode_frequency(spec: MembraneSpec, idx) -> float:
    """Frequency in Hz of the (k, l) mode under stresses (stress_x, stress_y).

    Reduces to the isotropic membrane formula when the stresses agree.
    """
    idx = _as_index(idx)
    return math.sqrt((spec.stress_x * idx.k**2 + spec.stress_y * idx.l**2) / spec.density) / (
        2 * spec.side_length
    )


def mode_shape(idx, x, y, side_length: float):
    """Max-normalised sin-product shape evaluated at (x, y)."""
    idx = _as_index(idx)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tol = 1e-12 * side_length
    if np.any(x < -tol) or np.any(x > side_length + tol) or np.any(y < -tol) or np.any(y > side_length + tol):
        raise DomainError("point outside the membrane [0, L]^2")
    out = np.sin(idx.k * np.pi * x / side_length) * np.sin(idx.l * np.pi * y / side_length)
    return out if out.ndim else float(out)


def shape_function(idx, side_length: float) -> Callable:
    idx = _as_index(idx)
    return lambda x, y: mode_shape(idx, x, y, side_length)


@dataclass(frozen=True)
class Supermode:
    """Normalised combination ``a*Psi(shape_a) + sign*b*Psi(shape_b)``."""

    shape_a: ModeIndex
    shape_b: ModeIndex
    a: float
    b: float
    sign: int
    side_length: float

    def __call__(self, x, y):
        return self.a * mode_shape(self.shape_a, x, y, self.side_length) + self.sign * self.b * mode_shape(
            self.shape_b, x, y, self.side_length
        )


def supermode(shape_a, shape_b, a: float, b: float, sign: int, side_length: float) -> Supermode:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if abs(a * a + b * b - 1) > 1e-12:
        raise ValueError(f"supermode weights must satisfy a^2 + b^2 = 1 (got {a * a + b * b!r})")
    return Supermode(_as_index(shape_a), _as_index(shape_b), float(a), float(b), sign, side_length)


@dataclass(frozen=True)
class _Quadrature:
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    area: float = 0.0


def _gauss(n: int, a: float, b: float):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * t + 0.5 * (b + a), 0.5 * (b - a) * w


def _disc_rule(radius: float, n: int):
    # u = R sin(phi), v = R cos(phi) s removes the sqrt edge singularity and
    # keeps the node set mirror-symmetric in both axes.
    phi, wphi = _gauss(n, -np.pi / 2, np.pi / 2)
    s, ws = _gauss(n, -1.0, 1.0)
    P, S = np.meshgrid(phi, s, indexing="ij")
    u = radius * np.sin(P)
    v = radius * np.cos(P) * S
    w = (radius * np.cos(P)) ** 2 * np.outer(wphi, ws)
    return u.ravel(), v.ravel(), w.ravel()


def _strip_rule(geom: ElectrodeGeometry, n: int):
    """Nodes for the part of the notch strip that changes the disc: the
    strip inside the disc (removed) or outside it (added)."""
    R, half_w, h = geom.disc_radius, geom.notch_width / 2, geom.notch_length
    if half_w == 0 or h == 0:
        return np.empty(0), np.empty(0), np.empty(0)

    def chord(x):
        return np.sqrt(np.clip(R * R - x * x, 0.0, None))

    breaks = {-half_w, half_w}
    if h < R:
        xk = math.sqrt(R * R - h * h)
        breaks.update(b for b in (-xk, xk) if -half_w < b < half_w)
    breaks.update(b for b in (-R, R) if -half_w < b < half_w)
    edges = sorted(breaks)

    us, vs, ws = [], [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if abs(lo) >= R * (1 - 1e-15) or abs(hi) >= R * (1 - 1e-15):
            # sqrt endpoint at |x| = R: integrate in phi with x = R sin(phi)
            plo = math.asin(max(-1.0, min(1.0, lo / R)))
            phi_hi = math.asin(max(-1.0, min(1.0, hi / R)))
            p, wp = _gauss(n, plo, phi_hi)
            x = R * np.sin(p)
            wx = wp * R * np.cos(p)
        else:
            x, wx = _gauss(n, lo, hi)
        top = np.minimum(h, chord(x))
        if geom.notch_sign < 0:
            y0, y1 = np.zeros_like(x), top
        else:
            y0, y1 = top, np.full_like(x, h)
        t, wt = np.polynomial.legendre.leggauss(n)
        for xi, wxi, a, b in zip(x, wx, y0, y1):
            if b <= a:
                continue
            us.append(np.full(n, xi))
            vs.append(0.5 * (b - a) * t + 0.5 * (b + a))
            ws.append(wxi * 0.5 * (b - a) * wt)
    if not us:
        return np.empty(0), np.empty(0), np.empty(0)
    return np.concatenate(us), np.concatenate(vs), np.concatenate(ws) * geom.notch_sign


@lru_cache(maxsize=64)
def sensing_quadrature(geom: ElectrodeGeometry, side_length: float, order: int = DEFAULT_ORDER) -> _Quadrature:
    """Signed quadrature rule over the sensing region in membrane coordinates."""
    geom.check_fits(side_length)
    du, dv, dw = _disc_rule(geom.disc_radius, order)
    su, sv, sw = _strip_rule(geom, order)
    c = side_length / 2
    x = np.concatenate([du, su]) + c
    y = np.concatenate([dv, sv]) + c
    w = np.concatenate([dw, sw])
    area = float(w.sum())
    if not area > 0:
        raise GeometryError("sensing region has zero area")
    return _Quadrature(x, y, w, area)


def _as_callable(shape, side_length: float) -> Callable:
    if callable(shape):
        return shape
    return shape_function(shape, side_length)


def overlap_integral(shape, geom: ElectrodeGeometry, spec: MembraneSpec, order: int = DEFAULT_ORDER) -> float:
    """Average of a mode shape over the sensing region.

    ``shape`` is a ``ModeIndex``, a ``(k, l)`` tuple or any vectorised
    callable ``f(x, y)`` such as a :class:`Supermode`.
    """
    q = sensing_quadrature(geom, spec.side_length, order)
    f = _as_callable(shape, spec.side_length)
    return float(np.dot(q.w, f(q.x, q.y)) / q.area)


def effective_mass(spec: MembraneSpec, idx=None) -> float:
    """rho t L^2 / 4, identical for every sin-product mode."""
    return spec.mass_density * spec.thickness * spec.side_length**2 / 4


def zero_point_fluctuation(m_eff: float, frequency: float) -> float:
    return math.sqrt(hbar / (2 * m_eff * 2 * math.pi * frequency))


def estimate_g0(x_zpf: float, overlap: float, overlap_ref: float, capacitor: Capacitor, f_c: float) -> float:
    """Vacuum coupling g0/2pi in Hz from the parallel-plate reduction
    ``(f_c / 2) * participation * (|O| / O_ref) * (x_zpf / gap)``."""
    if not capacitor.gap > 0:
        raise ValueError("gap must be > 0")
    if overlap_ref == 0:
        raise ValueError("reference overlap is zero")
    return 0.5 * f_c * capacitor.participation * abs(overlap) / abs(overlap_ref) * x_zpf / capacitor.gap


def build_catalog(
    spec: MembraneSpec,
    geom: ElectrodeGeometry,
    capacitor: Capacitor,
    f_c: float,
    k_max: int,
    l_max: int,
    threshold: float = DEFAULT_THRESHOLD,
    order: int = DEFAULT_ORDER,
    degeneracy_rtol: float = 1e-12,
) -> list[ModeRecord]:
    """All (k, l) modes up to the bounds, sorted by frequency.

    Frequency-degenerate (k, l)/(l, k) pairs are reported as supermodes with
    equal weights: the ``(k, l)`` row (k < l) holds the constructive
    combination and the ``(l, k)`` row the destructive one. A mode is
    detectable when ``|O| >= threshold * max|O|`` over the catalog.
    """
    if k_max < 1 or l_max < 1:
        raise ValueError("k_max and l_max must be >= 1")
    L = spec.side_length
    m_eff = effective_mass(spec)
    o_ref = overlap_integral(ModeIndex(1, 1), geom, spec, order)

    rows = []
    for k in range(1, k_max + 1):
        for l in range(1, l_max + 1):
            idx = ModeIndex(k, l)
            f = mode_frequency(spec, idx)
            tag = None
            shape = idx
            if k != l and l <= k_max and k <= l_max:
                f_mirror = mode_frequency(spec, idx.mirrored())
                if abs(f - f_mirror) <= degeneracy_rtol * f:
                    lo, hi = (idx, idx.mirrored()) if k < l else (idx.mirrored(), idx)
                    tag = "+" if k < l else "-"
                    shape = supermode(lo, hi, 1 / math.sqrt(2), 1 / math.sqrt(2), 1 if tag == "+" else -1, L)
            rows.append((idx, f, tag, overlap_integral(shape, geom, spec, order)))

    o_max = max(abs(r[3]) for r in rows)
    catalog = []
    for idx, f, tag, o in rows:
        xz = zero_point_fluctuation(m_eff, f)
        catalog.append(
            ModeRecord(
                index=idx,
                frequency=f,
                effective_mass=m_eff,
                x_zpf=xz,
                overlap=o,
                g0=estimate_g0(xz, o, o_ref, capacitor, f_c),
                detectable=bool(abs(o) >= threshold * o_max),
                supermode=tag,
            )
        )
    catalog.sort(key=lambda r: (r.frequency, r.index))
    return catalog


def detectable_indices(catalog: Sequence[ModeRecord]) -> set[tuple[int, int]]:
    return {(r.index.k, r.index.l) for r in catalog if r.detectable}
