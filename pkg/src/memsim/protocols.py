"""Experiment-level protocols built on :func:`memsim.sim.simulate`.

Quadrature units: the internal mechanical amplitude ``b`` is measured in
sqrt(quanta), so ``X1 = Re b``, ``X2 = Im b`` and ``|b|^2`` is the
occupation. Output-trace quadratures are in arbitrary units until a gain
factor from :func:`memsim.estimators.gain_calibration` is applied.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .linear import CavitySpec, coupling_from_power, optical_damping, cooled_occupancy
from .sim import (
    InitialState,
    PulseSequence,
    Segment,
    SimConfig,
    SimSystem,
    Trace,
    simulate,
)

__all__ = [
    "TomographyResult",
    "InsufficientDataError",
    "StorageTiming",
    "CoherentInput",
    "StorageRun",
    "RingdownRun",
    "CoolingRun",
    "SwapPoint",
    "derive_seed",
    "coupling_for_damping",
    "demodulate",
    "tomography",
    "storage_sequence",
    "capture_store_retrieve",
    "storage_shots",
    "equilibrium_shots",
    "sequence_shots",
    "write_efficiency",
    "ringdown_experiment",
    "cooling_experiment",
    "swap_coupling",
    "adiabatic_swap_coupling",
    "swap_time",
    "swap_experiment",
]

TWO_PI = 2 * math.pi
_SHOT_BLOCK = 20_000


class InsufficientDataError(ValueError):
    pass


@dataclass
class TomographyResult:
    X1_mean: float
    X2_mean: float
    N_coh: float
    N_th: float
    n_add_used: float
    shots: int
    below_floor: bool = False
    X1: np.ndarray | None = field(default=None, repr=False)
    X2: np.ndarray | None = field(default=None, repr=False)

    @property
    def phase(self) -> float:
        return math.atan2(self.X2_mean, self.X1_mean)


def derive_seed(seed: int, *key: int) -> int:
    """Independent 63-bit seed for a named use site below a top-level seed."""
    state = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)).generate_state(2, np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


def coupling_for_damping(gamma_opt: float, kappa: float) -> float:
    """G giving optical damping ``gamma_opt`` (all Hz)."""
    if gamma_opt < 0:
        raise ValueError("gamma_opt must be >= 0")
    return math.sqrt(gamma_opt * kappa / 4)


def demodulate(trace: Trace, f_out: float, C: float | None = None):
    """Project ``V = trace.I`` onto cos and sin at ``f_out``.

    ``X1 = C sum V(t_i) cos(2 pi f_out t_i)``, ``X2 = C sum V(t_i) sin(...)``
    with ``C = 2 / N_samples`` unless given. Ensemble traces return arrays.
    """
    if not f_out > 0:
        raise ValueError("f_out must be > 0")
    V = trace.I
    n = trace.t.size
    if C is None:
        C = 2.0 / n
    w = TWO_PI * f_out * trace.t
    X1 = C * (V @ np.cos(w))
    X2 = C * (V @ np.sin(w))
    return X1, X2


def tomography(shots, n_add: float = 0.0, gain: float = 1.0) -> TomographyResult:
    """Mean / variance decomposition of quadrature shots ``(N, 2)``.

    ``N_coh = <X1>^2 + <X2>^2`` and
    ``N_th = var(X1) + var(X2) - n_add`` after scaling by ``gain``.
    """
    s = np.asarray(shots, dtype=float)
    if s.ndim != 2 or s.shape[1] != 2:
        raise ValueError("shots must have shape (N, 2)")
    if s.shape[0] < 2:
        raise InsufficientDataError("tomography needs at least 2 shots")
    X1, X2 = gain * s[:, 0], gain * s[:, 1]
    m1, m2 = float(X1.mean()), float(X2.mean())
    nth = float(X1.var() + X2.var() - n_add)
    return TomographyResult(
        X1_mean=m1,
        X2_mean=m2,
        N_coh=m1 * m1 + m2 * m2,
        N_th=nth,
        n_add_used=n_add,
        shots=s.shape[0],
        below_floor=nth < 0,
        X1=X1,
        X2=X2,
    )


def _amplitude_tomography(b: np.ndarray) -> TomographyResult:
    return tomography(np.column_stack([b.real, b.imag]))


# --- capture, storage and retrieval ----------------------------------------


@dataclass(frozen=True)
class StorageTiming:
    """Segment lengths (s): pre-cooling, write and read windows, and the
    read-window sampling interval."""

    cool: float = 0.5
    write: float = 0.06
    read: float = 0.06
    read_dt: float = 5e-4


@dataclass(frozen=True)
class CoherentInput:
    """Incident coherent pulse of ``quanta`` photons and carrier phase.

    With ``captured=True``, ``quanta`` is the coherent occupation the pulse
    leaves in the mechanical mode after a noise-free write, and the incident
    pulse is scaled up by the write efficiency.
    """

    quanta: float
    phase: float = 0.0
    captured: bool = False


@dataclass
class StorageRun:
    trace: Trace
    written: np.ndarray
    incident_quanta: float
    eta_write: float
    G_write: float
    tau_store: float
    read_start: float


def _write_drive(G_write: float, kappa: float, timing: StorageTiming, quanta: float):
    """Exponential pulse amplitude at the start of the write window, with
    energy growth rate matched to the write-tone optical damping."""
    rate = optical_damping(G_write, kappa)
    x = TWO_PI * rate * timing.write
    energy_per_amp2 = math.expm1(x) / (TWO_PI * rate) if rate > 0 else timing.write
    return rate, math.sqrt(quanta / energy_per_amp2)


def storage_sequence(
    G_write: float,
    kappa: float,
    tau_store: float,
    timing: StorageTiming = StorageTiming(),
    incident_quanta: float = 0.0,
    phase: float = 0.0,
    G_read: float | None = None,
) -> tuple[PulseSequence, float]:
    """Cool, write (with an exponentially growing signal), store, read.
    Returns the sequence and its total duration."""
    if tau_store < 0:
        raise ValueError("tau_store must be >= 0")
    G_read = G_write if G_read is None else G_read
    t1 = timing.cool
    t2 = t1 + timing.write
    t3 = t2 + tau_store
    t4 = t3 + timing.read
    segs = []
    if timing.cool > 0:
        segs.append(Segment("cool", 0.0, t1, amplitude=G_write))
    segs.append(Segment("write", t1, t2, amplitude=G_write))
    if incident_quanta > 0:
        rate, amp = _write_drive(G_write, kappa, timing, incident_quanta)
        segs.append(Segment("signal", t1, t2, envelope="exponential", rate=rate, amplitude=amp, phase=phase))
    if G_read > 0:
        segs.append(Segment("read", t3, t4, amplitude=G_read))
    return PulseSequence(tuple(segs), record=((t3, t4),)), t4


def write_efficiency(system: SimSystem, G_write: float, timing: StorageTiming = StorageTiming()) -> float:
    """Noise-free fraction of incident pulse quanta left in the mechanical
    mode at the end of the write window."""
    quiet = replace(system, lo_offset=0.0)
    seq, _ = storage_sequence(G_write, system.cavity.kappa, 0.0, timing, incident_quanta=1.0)
    t_end = timing.cool + timing.write
    seq = PulseSequence(tuple(s for s in seq.segments if s.t_start < t_end), record=((t_end - timing.read_dt, t_end),))
    cfg = SimConfig(dt=timing.read_dt, duration=t_end, noise=False, record_modes=False)
    r = simulate(quiet, seq, cfg)
    return float(abs(r.final_modes[0, 0]) ** 2)


def capture_store_retrieve(
    system: SimSystem,
    coherent_in: CoherentInput,
    tau_store: float,
    cfg: SimConfig,
    G_write: float | None = None,
    gamma_opt: float = 12.6,
    timing: StorageTiming = StorageTiming(),
    first_trajectory: int = 0,
    count: int | None = None,
) -> StorageRun:
    """Pulsed capture of a coherent pulse, storage for ``tau_store`` and
    readout. Returns the read-window output (``cfg.ensemble_size`` shots
    unless ``count`` is given) and the mechanical amplitude at the start of
    the read. ``cfg.dt``/``cfg.duration`` are replaced by the timing."""
    if tau_store < 0:
        raise ValueError("tau_store must be >= 0")
    kappa = system.cavity.kappa
    if G_write is None:
        G_write = coupling_for_damping(gamma_opt, kappa)
    eta_w = write_efficiency(system, G_write, timing)
    incident = coherent_in.quanta / eta_w if coherent_in.captured else coherent_in.quanta
    seq, T = storage_sequence(G_write, kappa, tau_store, timing, incident, coherent_in.phase)
    run_cfg = replace(cfg, dt=timing.read_dt, duration=T, record_modes=True)
    r = simulate(system, seq, run_cfg, first_trajectory=first_trajectory, count=count)
    # amplitude at the end of the first read sample approximates the stored state
    written = r.modes[:, 0, 0]
    return StorageRun(
        trace=r.trace,
        written=written,
        incident_quanta=incident,
        eta_write=eta_w,
        G_write=G_write,
        tau_store=tau_store,
        read_start=T - timing.read,
    )


def sequence_shots(
    system: SimSystem,
    seq: PulseSequence,
    duration: float,
    shots: int,
    seed: int,
    dt: float,
    C: float | None = None,
    initial: InitialState | None = None,
) -> np.ndarray:
    """Demodulated quadratures ``(shots, 2)`` of the recorded window of
    ``seq`` at ``system.lo_offset``, streamed in blocks so large shot counts
    fit in memory. Shot i uses the stream of trajectory i."""
    X = np.empty((shots, 2))
    for start in range(0, shots, _SHOT_BLOCK):
        n = min(_SHOT_BLOCK, shots - start)
        cfg = SimConfig(dt=dt, duration=duration, seed=seed, ensemble_size=shots, record_modes=False, initial=initial)
        r = simulate(system, seq, cfg, first_trajectory=start, count=n)
        tr = r.trace if r.trace.I.ndim == 2 else Trace(r.trace.t, r.trace.I[None], r.trace.Q[None])
        X[start : start + n, 0], X[start : start + n, 1] = demodulate(tr, system.lo_offset, C)
    return X


def storage_shots(
    system: SimSystem,
    coherent_in: CoherentInput,
    tau_store: float,
    shots: int,
    seed: int,
    G_write: float | None = None,
    gamma_opt: float = 12.6,
    timing: StorageTiming = StorageTiming(),
    C: float | None = None,
) -> np.ndarray:
    """Demodulated read-window quadratures ``(shots, 2)`` at
    ``system.lo_offset``, streamed in blocks so large shot counts fit in
    memory. Shot i uses the same stream as trajectory i of the ensemble."""
    if system.lo_offset <= 0:
        raise ValueError("storage readout needs a positive lo_offset")
    kappa = system.cavity.kappa
    if G_write is None:
        G_write = coupling_for_damping(gamma_opt, kappa)
    incident = coherent_in.quanta
    if coherent_in.captured:
        incident /= write_efficiency(system, G_write, timing)
    seq, T = storage_sequence(G_write, kappa, tau_store, timing, incident, coherent_in.phase)
    return sequence_shots(system, seq, T, shots, seed, timing.read_dt, C)


def equilibrium_shots(
    system: SimSystem,
    shots: int,
    seed: int,
    G_read: float,
    timing: StorageTiming = StorageTiming(),
    C: float | None = None,
) -> np.ndarray:
    """Read-window quadratures with the mode in thermal equilibrium (the
    long-storage limit). ``G_read = 0`` gives the detection noise floor."""
    segs = (Segment("read", 0.0, timing.read, amplitude=G_read),) if G_read > 0 else ()
    seq = PulseSequence(segs, record=((0.0, timing.read),))
    return sequence_shots(system, seq, timing.read, shots, seed, timing.read_dt, C)


# --- ringdown and cooling ----------------------------------------------------


@dataclass
class RingdownRun:
    power_dbm: float
    G: float
    gamma_tot_expected: float
    t: np.ndarray
    energy: np.ndarray
    trace: Trace


def ringdown_experiment(
    system: SimSystem,
    excite_amp: float,
    powers_dbm,
    anchor_dbm: float,
    anchor_G: float,
    cfg: SimConfig,
    samples: int = 400,
    efolds: float = 4.0,
) -> list[RingdownRun]:
    """Ring down mode 0 from coherent amplitude ``excite_amp`` under a
    cooling tone whose G follows the power anchor. The energy record is the
    ensemble mean of ``|b|^2``; the trace is the mode amplitude of the first
    trajectory. ``cfg.dt``/``duration`` are chosen per power."""
    mode = system.modes[0]
    kappa = system.cavity.kappa
    runs = []
    for i, p in enumerate(np.atleast_1d(powers_dbm)):
        G = coupling_from_power(float(p), anchor_dbm, anchor_G)
        gtot = mode.gamma_m + optical_damping(G, kappa)
        T = efolds / (TWO_PI * gtot)
        dt = T / samples
        segs = (Segment("cool", 0.0, T, amplitude=G),) if G > 0 else ()
        beta = (complex(excite_amp),) + (0j,) * (len(system.modes) - 1)
        init = cfg.initial or InitialState()
        run_cfg = replace(
            cfg, dt=dt, duration=T, record_modes=True, seed=derive_seed(cfg.seed, i), initial=replace(init, beta=beta)
        )
        r = simulate(replace(system, lo_offset=0.0), PulseSequence(segs), run_cfg)
        b = r.modes[:, :, 0]
        t = r.trace.t + dt / 2
        runs.append(
            RingdownRun(
                power_dbm=float(p),
                G=G,
                gamma_tot_expected=gtot,
                t=t,
                energy=np.mean(np.abs(b) ** 2, axis=0),
                trace=Trace(t, b[0].real, b[0].imag),
            )
        )
    return runs


@dataclass
class CoolingRun:
    occupancy: float
    stderr: float
    expected: float
    t: np.ndarray
    mean_energy: np.ndarray


def cooling_experiment(
    system: SimSystem,
    G: float,
    cfg: SimConfig,
    settle: float | None = None,
    window: float | None = None,
    samples: int = 50,
) -> CoolingRun:
    """Sideband cooling of mode 0 from its thermal state.

    Returns the record of ensemble-mean ``|b|^2`` and the long-time occupancy
    averaged over ``samples`` points spaced across ``window`` after
    ``settle``. Defaults: settle 20/gamma_tot, window 50/gamma_tot (angular),
    so the samples are roughly independent.
    """
    mode = system.modes[0]
    gtot = TWO_PI * (mode.gamma_m + optical_damping(G, system.cavity.kappa))
    settle = 20 / gtot if settle is None else settle
    window = 50 / gtot if window is None else window
    dt = window / samples
    T = settle + window
    seq = PulseSequence((Segment("cool", 0.0, T, amplitude=G),), record=((settle, T),))
    r = simulate(replace(system, lo_offset=0.0), seq, replace(cfg, dt=dt, duration=T, record_modes=True))
    E = np.abs(r.modes[:, :, 0]) ** 2
    per_traj = E.mean(axis=1)
    expected = cooled_occupancy(
        mode.gamma_m,
        optical_damping(G, system.cavity.kappa),
        mode.n_th,
        (system.cavity.kappa_in * system.n_th_c + system.cavity.kappa_ex * system.bath_ex) / system.cavity.kappa,
    )
    se = float(per_traj.std(ddof=1) / math.sqrt(per_traj.size)) if per_traj.size > 1 else float("nan")
    return CoolingRun(
        occupancy=float(E.mean()),
        stderr=se,
        expected=expected,
        t=r.trace.t + dt / 2,
        mean_energy=E.mean(axis=0),
    )


# --- two-mode swap -----------------------------------------------------------


def swap_coupling(G1: float, G2: float, kappa: float, detuning: float) -> float:
    """Coherent mode-mode exchange rate (Hz) after eliminating the cavity
    for pumps a common ``detuning`` off their sidebands:
    ``G1 G2 detuning / (kappa^2/4 + detuning^2)``. Zero on resonance, where
    the cavity mediates only dissipative coupling."""
    return G1 * G2 * detuning / (kappa * kappa / 4 + detuning * detuning)


def adiabatic_swap_coupling(G1: float, G2: float, kappa: float) -> float:
    """The closed-form ``2 G1 G2 / kappa`` exchange-rate estimate (Hz)."""
    return 2 * G1 * G2 / kappa


def swap_time(J: float) -> float:
    """Duration of a full transfer, pi / (2 J) with J angular; J in Hz."""
    return 1 / (4 * abs(J))


@dataclass
class SwapPoint:
    duration: float
    mode1: TomographyResult
    mode2: TomographyResult


def swap_experiment(
    system: SimSystem,
    G1: float,
    G2: float,
    durations,
    cfg: SimConfig,
    beta: complex = 2.0,
    n_initial: tuple[float, float] = (0.0, 0.0),
) -> list[SwapPoint]:
    """Transfer a coherent amplitude ``beta`` from mode 0 to mode 1.

    Both pumps act over ``[0, duration)`` with the common sideband offset
    ``system.detuning``; the modes start at occupations ``n_initial`` (the
    pre-cooled state). Tomography uses the internal amplitudes at the end.
    """
    if len(system.modes) != 2:
        raise ValueError("swap needs exactly two mechanical modes")
    m1, m2 = system.modes
    if abs(m1.f_m - m2.f_m) < 1000 * max(m1.gamma_m, m2.gamma_m):
        warnings.warn("mechanical modes are not spectrally resolved: cross terms are neglected", stacklevel=2)
    quiet = replace(system, lo_offset=0.0)
    init = InitialState(beta=(complex(beta), 0j), n_mech=tuple(n_initial))
    points = []
    for i, d in enumerate(np.atleast_1d(durations)):
        d = float(d)
        if not d > 0:
            raise ValueError("swap durations must be > 0")
        segs = tuple(
            Segment("pump", 0.0, d, amplitude=g, mode=j) for j, g in enumerate((G1, G2)) if g > 0
        )
        run_cfg = replace(cfg, dt=d, duration=d, record_modes=False, initial=init, seed=derive_seed(cfg.seed, i))
        r = simulate(quiet, PulseSequence(segs), run_cfg)
        b = r.final_modes
        if b.shape[0] < 2:
            b = np.concatenate([b, b])  # single noise-free trajectory: zero variance
        points.append(SwapPoint(d, _amplitude_tomography(b[:, 0]), _amplitude_tomography(b[:, 1])))
    return points
