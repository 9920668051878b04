"""Stochastic time-domain integration of the linearized Langevin equations.

One cavity mode ``a`` couples to one or more mechanical modes ``b_j``
through red-sideband pumps (beam-splitter interaction, rotating-wave
approximation). Both amplitudes are slowly varying envelopes in the
interaction frame: ``b_j`` in the frame of its own resonance and ``a`` in the
frame of the scattered sideband, which sits ``detuning`` away from the
cavity when the pumps are offset from the exact sidebands.

Between piecewise-constant control changes the system is linear with
additive white noise, so each interval is propagated with the exact
Ornstein-Uhlenbeck transition (mean map and covariance from Van Loan's
block exponential, computed on a short sub-step and then squared up).
That stays exact for stiff combinations like kappa*dt ~ 1e6.

Noise is classical and normally ordered: a bath of occupation N enters as
complex white noise with ``<xi*(t) xi(t')> = N delta(t - t')``.

Pure dephasing is a random walk of the mechanical phase with variance
``gamma_phi * h`` (angular) per interval of length h, so the spectral
FWHM is ``gamma_m + gamma_phi``. When a mode is not pumped its dynamics
commute with the phase kick and the kick is exact for any h; when it is
pumped the interval is split so each kick has variance below
``SimConfig.dephasing_step``.

Random streams: trajectory i uses
``Generator(PCG64(SeedSequence(seed, spawn_key=(i,))))`` and draws all of
its normals in one fixed-layout array, so results do not depend on how
trajectories are batched or scheduled.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .linear import CavitySpec, MechModeParams

__all__ = [
    "PUMP_TONES",
    "Segment",
    "PulseSequence",
    "InitialState",
    "SimSystem",
    "SimConfig",
    "Trace",
    "SimResult",
    "StabilityError",
    "simulate",
    "trajectory_rng",
    "thread_count",
]

TWO_PI = 2 * math.pi
PUMP_TONES = ("write", "read", "cool", "pump")
TONES = PUMP_TONES + ("signal", "amplify")
_BLOCK_FLOATS = 8_000_000


class StabilityError(ValueError):
    """Sampling interval cannot represent the recorded signal."""

    def __init__(self, msg: str, suggested_dt: float):
        super().__init__(f"{msg}; suggested dt <= {suggested_dt:.6g} s")
        self.suggested_dt = suggested_dt


@dataclass(frozen=True)
class Segment:
    """One tone switched on over ``[t_start, t_stop)``.

    Pump tones (write/read/cool/pump) set the coupling ``G`` (Hz) of
    mechanical mode ``mode``. ``signal`` drives the cavity with a coherent
    flux amplitude (sqrt(quanta/s)) ``amplitude * exp(i phase)`` at
    ``t_start``; with ``envelope='exponential'`` the amplitude grows as
    ``exp(pi rate t)``, i.e. the energy grows at angular rate
    ``2 pi rate``. ``amplify`` applies an ideal power gain ``amplitude`` to
    the recorded output (its added noise is part of ``n_add``).
    """

    tone: str
    t_start: float
    t_stop: float
    envelope: str = "constant"
    rate: float = 0.0
    amplitude: float = 0.0
    phase: float = 0.0
    mode: int = 0

    def __post_init__(self):
        if self.tone not in TONES:
            raise ValueError(f"unknown tone {self.tone!r}")
        if self.envelope not in ("constant", "exponential"):
            raise ValueError(f"unknown envelope {self.envelope!r}")
        if not self.t_stop > self.t_start or self.t_start < 0:
            raise ValueError("segment needs 0 <= t_start < t_stop")
        if self.tone in PUMP_TONES and self.amplitude < 0:
            raise ValueError("pump amplitude G must be >= 0")
        if self.tone == "amplify" and not self.amplitude > 0:
            raise ValueError("amplify gain must be > 0")


@dataclass(frozen=True)
class PulseSequence:
    """Segments plus the windows in which the output is sampled.

    ``record=None`` samples the whole run.
    """

    segments: tuple[Segment, ...] = ()
    record: tuple[tuple[float, float], ...] | None = None

    def validate(self, duration: float, n_modes: int) -> None:
        tol = 1e-12 * max(duration, 1.0)
        by_tone: dict = {}
        for s in self.segments:
            if s.t_stop > duration + tol:
                raise ValueError(f"{s.tone} segment ends after the run ({s.t_stop} > {duration})")
            if s.tone in PUMP_TONES and not 0 <= s.mode < n_modes:
                raise ValueError(f"segment targets mode {s.mode}, system has {n_modes}")
            key = "signal" if s.tone == "signal" else (s.tone, s.mode)
            by_tone.setdefault(key, []).append(s)
        for key, segs in by_tone.items():
            segs = sorted(segs, key=lambda s: s.t_start)
            for s0, s1 in zip(segs[:-1], segs[1:]):
                if s1.t_start < s0.t_stop - tol:
                    raise ValueError(f"overlapping segments for tone {key}")
        for w0, w1 in self.record or ():
            if not 0 <= w0 < w1 <= duration + tol:
                raise ValueError(f"record window ({w0}, {w1}) outside the run")


@dataclass(frozen=True)
class InitialState:
    """Initial coherent amplitudes (sqrt(quanta)) and thermal occupations.

    ``None`` occupations default to the bath values: each mechanical mode
    starts in equilibrium with its bath, the cavity with its ports.
    """

    beta: tuple[complex, ...] = ()
    n_mech: tuple[float, ...] | None = None
    alpha: complex = 0j
    n_cav: float | None = None


@dataclass(frozen=True)
class SimSystem:
    cavity: CavitySpec
    modes: tuple[MechModeParams, ...]
    n_th_c: float = 0.0
    n_th_ex: float | None = None
    n_add: float = 0.0
    detuning: float = 0.0
    lo_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.modes:
            raise ValueError("at least one mechanical mode is required")
        if self.n_th_c < 0 or self.n_add < 0 or (self.n_th_ex is not None and self.n_th_ex < 0):
            raise ValueError("occupations must be >= 0")

    @property
    def bath_ex(self) -> float:
        return self.n_th_c if self.n_th_ex is None else self.n_th_ex


@dataclass(frozen=True)
class SimConfig:
    dt: float
    duration: float
    seed: int = 0
    ensemble_size: int = 1
    frame: str = "rotating-at-pump"
    noise: bool = True
    record_modes: bool = True
    initial: InitialState | None = None
    dephasing_step: float = 1e-3

    def __post_init__(self):
        if not self.dt > 0 or not self.duration > 0:
            raise ValueError("dt and duration must be > 0")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if self.frame != "rotating-at-pump":
            raise ValueError("only the rotating-at-pump frame is supported")
        if not 0 < self.dephasing_step <= 0.1:
            raise ValueError("dephasing_step must lie in (0, 0.1]")


@dataclass
class Trace:
    """Uniformly sampled output quadratures. ``I``/``Q`` are 1-D for a single
    record or (trajectories, samples) for an ensemble."""

    t: np.ndarray
    I: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.I = np.asarray(self.I, dtype=float)
        self.Q = np.asarray(self.Q, dtype=float)
        if self.I.shape != self.Q.shape or self.I.shape[-1] != self.t.size:
            raise ValueError("t, I and Q lengths differ")
        if self.t.size > 2:
            d = np.diff(self.t)
            if np.max(np.abs(d - d[0])) > 1e-9 * max(abs(d[0]), 1e-300):
                raise ValueError("trace sampling must be uniform")

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else float("nan")

    @property
    def complex(self) -> np.ndarray:
        return self.I + 1j * self.Q

    def __len__(self):
        return self.t.size

    def single(self, i: int = 0) -> "Trace":
        if self.I.ndim == 1:
            return self
        return Trace(self.t, self.I[i], self.Q[i])


@dataclass
class SimResult:
    """Sampled output plus internal amplitudes at the end of each sample
    (``modes``: trajectories x samples x modes) and at the end of the run."""

    trace: Trace
    modes: np.ndarray | None
    cavity: np.ndarray | None
    final_modes: np.ndarray
    final_cavity: np.ndarray
    first_trajectory: int = 0
    info: dict = field(default_factory=dict)


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def thread_count() -> int:
    raw = os.environ.get("MEMSIM_THREADS", "1").strip() or "1"
    n = int(raw)
    if n < 0:
        raise ValueError("MEMSIM_THREADS must be >= 0")
    return (os.cpu_count() or 1) if n == 0 else n


# --- state layout -----------------------------------------------------------
# complex slots: 0 = a, 1..n = b_j, then A = int a dt, W = int xi_ex dt,
# e = signal amplitude, E = int e dt. The real vector stacks the real parts
# of all slots followed by the imaginary parts.


class _Layout:
    def __init__(self, n: int):
        self.n = n
        self.nc = n + 5
        self.m = 2 * self.nc
        self.A, self.W, self.e, self.E = n + 1, n + 2, n + 3, n + 4


def _drift(system: SimSystem, G: tuple, lam: float, lay: _Layout) -> np.ndarray:
    nc = lay.nc
    k = TWO_PI * system.cavity.kappa
    d = TWO_PI * system.detuning
    M = np.zeros((nc, nc), dtype=complex)
    M[0, 0] = -(k / 2 + 1j * d)
    for j, mode in enumerate(system.modes, start=1):
        g = TWO_PI * G[j - 1]
        M[0, j] = -1j * g
        M[j, 0] = -1j * g
        M[j, j] = -TWO_PI * mode.gamma_m / 2
    M[0, lay.e] = math.sqrt(TWO_PI * system.cavity.kappa_ex)
    M[lay.A, 0] = 1.0
    M[lay.e, lay.e] = lam
    M[lay.E, lay.e] = 1.0
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


def _diffusion(system: SimSystem, lay: _Layout, noise: bool) -> np.ndarray:
    nc = lay.nc
    D = np.zeros((nc, nc))
    if noise:
        cav = system.cavity
        kin, kex = TWO_PI * cav.kappa_in, TWO_PI * cav.kappa_ex
        D[0, 0] += kin * system.n_th_c
        sources = np.zeros(nc)
        sources[0] = math.sqrt(kex)
        sources[lay.W] = 1.0
        D += system.bath_ex * np.outer(sources, sources)
        for j, mode in enumerate(system.modes, start=1):
            D[j, j] += TWO_PI * mode.gamma_m * mode.n_th
    z = np.zeros_like(D)
    return 0.5 * np.block([[D, z], [z, D]])


def _discretize(M: np.ndarray, C: np.ndarray, h: float):
    m = M.shape[0]
    norm = float(np.abs(M).sum(axis=1).max()) * h
    k = 0 if norm <= 0.5 else int(math.ceil(math.log2(norm / 0.5)))
    h0 = h / 2**k
    big = np.zeros((2 * m, 2 * m))
    big[:m, :m] = -M
    big[:m, m:] = C
    big[m:, m:] = M.T
    F = expm(big * h0)
    Phi = F[m:, m:].T
    Q = Phi @ F[:m, m:]
    for _ in range(k):
        Q = Phi @ Q @ Phi.T + Q
        Phi = Phi @ Phi
    Q = 0.5 * (Q + Q.T)
    w, V = np.linalg.eigh(Q)
    L = V * np.sqrt(np.clip(w, 0.0, None))
    return Phi, L


@dataclass
class _Step:
    Phi: np.ndarray
    L: np.ndarray | None
    dephase: tuple  # (real index, imag index, angular variance) per mode
    n_noise: int


@dataclass
class _Interval:
    t0: float
    t1: float
    steps: list
    set_e: complex | None
    sample: int | None  # sample index closed at t1
    reset: bool  # clear accumulators at t0
    gain: float = 1.0


def _boundaries(seq: PulseSequence, cfg: SimConfig):
    """Breakpoints, the sample times, and the sample window starts."""
    T = cfg.duration
    windows = seq.record if seq.record is not None else ((0.0, T),)
    pts = {0.0, T}
    sample_ends, window_starts = [], set()
    for w0, w1 in windows:
        n = int(round((w1 - w0) / cfg.dt))
        if n < 1 or abs(n * cfg.dt - (w1 - w0)) > 1e-6 * cfg.dt:
            raise ValueError(f"record window ({w0}, {w1}) is not a whole number of dt = {cfg.dt}")
        window_starts.add(w0)
        for i in range(1, n + 1):
            sample_ends.append(w0 + i * cfg.dt)
        pts.add(w0)
    for s in seq.segments:
        pts.update((s.t_start, min(s.t_stop, T)))
    pts.update(sample_ends)
    pts = sorted(pts)
    merged = [pts[0]]
    for p in pts[1:]:
        if p - merged[-1] > 1e-12 * max(T, 1.0):
            merged.append(p)
        else:
            merged[-1] = max(merged[-1], p) if p in sample_ends else merged[-1]
    return merged, sorted(sample_ends), window_starts


class _Plan:
    def __init__(self, system: SimSystem, seq: PulseSequence, cfg: SimConfig):
        n = len(system.modes)
        seq.validate(cfg.duration, n)
        if system.lo_offset > 0 and cfg.dt > 0.25 / system.lo_offset:
            raise StabilityError(
                f"dt = {cfg.dt} s undersamples the {system.lo_offset} Hz output offset", 0.1 / system.lo_offset
            )
        self.system, self.cfg, self.lay = system, cfg, _Layout(n)
        self.C = _diffusion(system, self.lay, cfg.noise)
        self._cache: dict = {}
        pts, sample_ends, window_starts = _boundaries(seq, cfg)
        tol = 1e-9 * cfg.dt
        ends = np.array(sample_ends)
        self.sample_times = ends - cfg.dt / 2
        self.n_samples = ends.size
        self.intervals = []
        prev_sampled = True
        for t0, t1 in zip(pts[:-1], pts[1:]):
            mid = 0.5 * (t0 + t1)
            G = [0.0] * n
            lam = 0.0
            set_e = 0j
            gain = 1.0
            for s in seq.segments:
                if not s.t_start <= mid < s.t_stop:
                    continue
                if s.tone in PUMP_TONES:
                    G[s.mode] += s.amplitude
                elif s.tone == "signal":
                    lam = math.pi * s.rate if s.envelope == "exponential" else 0.0
                    set_e = s.amplitude * np.exp(1j * s.phase) if abs(s.t_start - t0) <= tol else None
                elif s.tone == "amplify":
                    gain = s.amplitude
            idx = int(np.searchsorted(ends, t1 - tol))
            sample = idx if idx < ends.size and abs(ends[idx] - t1) <= tol else None
            reset = prev_sampled or any(abs(t0 - w) <= tol for w in window_starts)
            prev_sampled = sample is not None
            steps = self._steps(tuple(G), lam, t1 - t0)
            self.intervals.append(_Interval(t0, t1, steps, set_e, sample, reset, gain))
        self.n_init = 2 * (n + 1)
        self.n_draws = self.n_init + sum(
            sum(st.n_noise + len(st.dephase) for st in iv.steps) + (2 if iv.sample is not None else 0)
            for iv in self.intervals
        )

    def _propagator(self, G, lam, h):
        key = (G, lam, h)
        if key not in self._cache:
            Phi, L = _discretize(_drift(self.system, G, lam, self.lay), self.C, h)
            keep = np.abs(L).max(axis=0) > 0 if self.cfg.noise else np.zeros(L.shape[1], bool)
            self._cache[key] = (Phi, L[:, keep] if keep.any() else None)
        return self._cache[key]

    def _steps(self, G, lam, h):
        lay = self.lay
        deph = []
        pumped = False
        for j, mode in enumerate(self.system.modes):
            if self.cfg.noise and mode.gamma_phi > 0:
                deph.append((1 + j, lay.nc + 1 + j, TWO_PI * mode.gamma_phi))
                pumped = pumped or G[j] > 0
        nsub = 1
        if deph and pumped:
            vmax = max(v for *_, v in deph) * h
            nsub = max(1, int(math.ceil(vmax / self.cfg.dephasing_step)))
        hs = h / nsub
        Phi, L = self._propagator(G, lam, hs)
        st = _Step(Phi, L, tuple((r, i, v * hs) for r, i, v in deph), 0 if L is None else L.shape[1])
        return [st] * nsub


def _initial_draw(plan: _Plan, z: np.ndarray, noise: np.ndarray):
    system, lay, cfg = plan.system, plan.lay, plan.cfg
    init = cfg.initial or InitialState()
    n = lay.n
    beta = list(init.beta) + [0j] * (n - len(init.beta))
    if len(init.beta) > n:
        raise ValueError("more initial amplitudes than mechanical modes")
    if init.n_mech is not None and len(init.n_mech) != n:
        raise ValueError("n_mech needs one occupation per mode")
    cav = system.cavity
    n_cav = init.n_cav if init.n_cav is not None else (
        (cav.kappa_in * system.n_th_c + cav.kappa_ex * system.bath_ex) / cav.kappa
    )
    occ = [n_cav] + [init.n_mech[j] if init.n_mech is not None else system.modes[j].n_th for j in range(n)]
    mean = [init.alpha] + beta
    for s in range(n + 1):
        sd = math.sqrt(occ[s] / 2) if cfg.noise else 0.0
        z[s] = mean[s].real + sd * noise[2 * s]
        z[lay.nc + s] = complex(mean[s]).imag + sd * noise[2 * s + 1]


def _run_block(plan: _Plan, first: int, count: int, want_modes: bool):
    lay, cfg, system = plan.lay, plan.cfg, plan.system
    n = lay.n
    draws = np.empty((count, plan.n_draws))
    for b in range(count):
        draws[b] = trajectory_rng(cfg.seed, first + b).standard_normal(plan.n_draws)
    draws = draws.T
    z = np.zeros((lay.m, count))
    _initial_draw(plan, z, draws[: plan.n_init])
    pos = plan.n_init
    S = plan.n_samples
    out = np.empty((count, S), dtype=complex)
    rec_b = np.empty((count, S, n), dtype=complex) if want_modes else None
    rec_a = np.empty((count, S), dtype=complex) if want_modes else None
    sq_kex = math.sqrt(TWO_PI * system.cavity.kappa_ex)
    acc = [lay.A, lay.W, lay.E, lay.nc + lay.A, lay.nc + lay.W, lay.nc + lay.E]
    for iv in plan.intervals:
        if iv.reset:
            z[acc] = 0.0
        if iv.set_e is not None:
            z[lay.e] = iv.set_e.real
            z[lay.nc + lay.e] = iv.set_e.imag
        for st in iv.steps:
            z = st.Phi @ z
            if st.L is not None:
                z += st.L @ draws[pos : pos + st.n_noise]
                pos += st.n_noise
            for r, i, var in st.dephase:
                ph = math.sqrt(var) * draws[pos]
                pos += 1
                c, s = np.cos(ph), np.sin(ph)
                re, im = z[r].copy(), z[i]
                z[r] = re * c + im * s
                z[i] = im * c - re * s
        if iv.sample is not None:
            h = plan.cfg.dt
            A = z[lay.A] + 1j * z[lay.nc + lay.A]
            W = z[lay.W] + 1j * z[lay.nc + lay.W]
            E = z[lay.E] + 1j * z[lay.nc + lay.E]
            y = (E + W - sq_kex * A) / h
            if cfg.noise and system.n_add > 0:
                sd = math.sqrt(system.n_add / (2 * h))
                y = y + sd * (draws[pos] + 1j * draws[pos + 1])
            pos += 2
            k = iv.sample
            out[:, k] = math.sqrt(iv.gain) * y
            if want_modes:
                rec_b[:, k, :] = (z[1 : n + 1] + 1j * z[lay.nc + 1 : lay.nc + n + 1]).T
                rec_a[:, k] = z[0] + 1j * z[lay.nc]
            z[acc] = 0.0
    assert pos == plan.n_draws
    final_b = (z[1 : n + 1] + 1j * z[lay.nc + 1 : lay.nc + n + 1]).T
    final_a = z[0] + 1j * z[lay.nc]
    return out, rec_b, rec_a, final_b, final_a


def simulate(
    system: SimSystem,
    seq: PulseSequence,
    cfg: SimConfig,
    first_trajectory: int = 0,
    count: int | None = None,
) -> SimResult:
    """Integrate trajectories ``first_trajectory .. first_trajectory+count-1``
    (default: the whole ensemble).

    Trace samples are averages of the output field over each ``dt`` inside
    the record windows, shifted down by ``system.lo_offset`` so a constant
    output amplitude appears as a tone at that offset.
    """
    plan = _Plan(system, seq, cfg)
    count = cfg.ensemble_size if count is None else count
    if count < 1:
        raise ValueError("count must be >= 1")
    per = max(1, _BLOCK_FLOATS // max(plan.n_draws, 1))
    blocks = [(s, min(per, count - s)) for s in range(0, count, per)]
    job = lambda b: _run_block(plan, first_trajectory + b[0], b[1], cfg.record_modes)
    threads = min(thread_count(), len(blocks))
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(job, blocks))
    else:
        parts = [job(b) for b in blocks]
    out = np.concatenate([p[0] for p in parts])
    t = plan.sample_times
    if system.lo_offset:
        out = out * np.exp(-1j * TWO_PI * system.lo_offset * t)
    rec_b = np.concatenate([p[1] for p in parts]) if cfg.record_modes else None
    rec_a = np.concatenate([p[2] for p in parts]) if cfg.record_modes else None
    if count == 1:
        trace = Trace(t, out[0].real, out[0].imag)
    else:
        trace = Trace(t, out.real, out.imag)
    return SimResult(
        trace=trace,
        modes=rec_b,
        cavity=rec_a,
        final_modes=np.concatenate([p[3] for p in parts]),
        final_cavity=np.concatenate([p[4] for p in parts]),
        first_trajectory=first_trajectory,
        info={"draws_per_trajectory": plan.n_draws, "intervals": len(plan.intervals)},
    )
