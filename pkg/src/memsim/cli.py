"""Command-line entry point: ``memsim <subcommand> -c <scenario.json> ...``.

Progress goes to standard error; data goes to files or standard output.
Exit codes: 0 success, 2 validation error, 3 numerical failure, 64 unknown
subcommand.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .estimators import (
    CalibrationError,
    InconsistencyError,
    energy_envelope,
    fit_lorentzian,
    fit_ringdown,
    gain_calibration,
    calibrated_tomography,
)
from .linear import (
    classify_regime,
    critical_coupling,
    group_delay,
    optical_damping,
    output_psd,
    transmission,
)
from .modal import build_catalog
from .protocols import (
    InsufficientDataError,
    cooling_experiment,
    ringdown_experiment,
    sequence_shots,
    swap_coupling,
    swap_experiment,
    swap_time,
    tomography,
)
from .scenario import ScenarioError, load_scenario
from .sim import InitialState, PulseSequence, Segment, StabilityError

__all__ = ["main", "SUBCOMMANDS", "EXIT_OK", "EXIT_VALIDATION", "EXIT_NUMERICAL", "EXIT_USAGE"]

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_USAGE = 0, 2, 3, 64
SUBCOMMANDS = ("modes", "psd", "transmission", "delay", "cool", "ringdown", "protocol", "tomography", "swap", "fit")

log = logging.getLogger("memsim")


def _emit_json(obj, out) -> None:
    if out:
        io.write_json(out, obj)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(json.dumps(io._jsonable(obj), indent=2) + "\n")


def _tomo_dict(t) -> dict:
    return {
        "shots": t.shots,
        "x1_mean": t.X1_mean,
        "x2_mean": t.X2_mean,
        "n_coh": t.N_coh,
        "n_th": t.N_th,
        "n_add_used": t.n_add_used,
        "phase_rad": t.phase,
        "below_floor": t.below_floor,
    }


def _seed(args, sc) -> int:
    return sc.seed if args.seed is None else args.seed


def _drive(sc, args, preferred: str | None = None):
    name = args.drive
    if name is None and preferred in sc.drives:
        name = preferred
    mode_name, d = sc.drive(name)
    if args.g_hz is not None:
        d = replace(d, G=args.g_hz)
    return mode_name, d


def _grid(center: float, span: float, points: int) -> np.ndarray:
    if not span > 0:
        raise ValueError("--span-hz must be > 0")
    if points < 2:
        raise ValueError("--points must be >= 2")
    return center + np.linspace(-span / 2, span / 2, points)


# --- subcommands ---------------------------------------------------------------


def cmd_modes(args, sc) -> int:
    cat = sc.catalog
    rows = build_catalog(
        sc.membrane,
        sc.electrode,
        sc.capacitor,
        sc.cavity.f_c,
        cat.get("k_max", 8),
        cat.get("l_max", 8),
        threshold=cat.get("threshold", 1e-3),
    )
    out = args.output or "modes.csv"
    io.write_catalog(out, rows)
    log.info("wrote %d modes (%d detectable) to %s", len(rows), sum(r.detectable for r in rows), out)
    return EXIT_OK


def cmd_psd(args, sc) -> int:
    mode_name, d = _drive(sc, args, "psd")
    mode = sc.modes[mode_name]
    d = replace(d, detuning=-mode.f_m)
    gtot = mode.gamma_m + optical_damping(d.G, sc.cavity.kappa)
    span = args.span_hz if args.span_hz is not None else 40 * gtot
    spec = output_psd(sc.cavity, mode, d, _grid(mode.f_m, span, args.points or 4001))
    out = args.output or "psd.csv"
    io.write_spectrum(out, spec)
    log.info("mode %s: gamma_tot = %.6g Hz, N_m = %.6g; wrote %s", mode_name, gtot, spec.flags["n_m"], out)
    return EXIT_OK


def _probe(args, sc):
    mode_name, d = _drive(sc, args, "write")
    mode = sc.modes[mode_name]
    gtot = mode.gamma_m + optical_damping(d.G, sc.cavity.kappa)
    span = args.span_hz if args.span_hz is not None else 20 * gtot
    spec = transmission(sc.cavity, mode, d.G, _grid(0.0, span, args.points or 4001))
    log.info("mode %s, G = %.6g Hz: %s", mode_name, d.G, classify_regime(sc.cavity, mode, d.G).value)
    if sc.cavity.eta >= 0.5:
        log.info("critical coupling Gc = %.6g Hz", critical_coupling(sc.cavity.eta, sc.cavity.kappa, mode.gamma_m))
    return spec


def cmd_transmission(args, sc) -> int:
    spec = _probe(args, sc)
    out = args.output or "transmission.csv"
    io.write_spectrum(out, spec)
    log.info("wrote %s", out)
    return EXIT_OK


def cmd_delay(args, sc) -> int:
    spec = _probe(args, sc)
    tau = group_delay(spec)
    out = args.output or "delay.csv"
    io.write_delay(out, tau.freq, tau.value)
    i0 = int(np.argmin(np.abs(tau.freq)))
    log.info("tau(%.3g Hz) = %.6g s; wrote %s", tau.freq[i0], tau.value[i0], out)
    return EXIT_OK


def cmd_cool(args, sc) -> int:
    mode_name, d = _drive(sc, args, "write")
    system = sc.system(args.drive or ("write" if "write" in sc.drives else None), modes=[mode_name])
    cfg = replace(sc.sim, seed=_seed(args, sc), ensemble_size=args.shots or 200)
    run = cooling_experiment(system, d.G, cfg)
    log.info("occupancy %.6g +- %.2g (expected %.6g)", run.occupancy, run.stderr, run.expected)
    _emit_json(
        {"mode": mode_name, "g_hz": d.G, "occupancy": run.occupancy, "stderr": run.stderr, "expected": run.expected},
        args.output,
    )
    return EXIT_OK


def cmd_ringdown(args, sc) -> int:
    if sc.power_anchor is None:
        raise ScenarioError("/power_anchor", "ringdown needs a power anchor")
    anchor_dbm, anchor_g = sc.power_anchor
    powers = args.power_dbm if args.power_dbm else [anchor_dbm]
    mode_name = sc.drive(args.drive)[0] if sc.drives else sc.mode_names[0]
    system = sc.system(args.drive, modes=[mode_name])
    cfg = replace(sc.sim, seed=_seed(args, sc), ensemble_size=args.shots or 50, initial=InitialState(n_mech=(0.0,)))
    runs = ringdown_experiment(system, math.sqrt(args.excite_quanta), powers, anchor_dbm, anchor_g, cfg)
    rows = []
    for i, r in enumerate(runs):
        fit = fit_ringdown(r.t, r.energy)
        rate = fit.params["rate_hz"]
        log.info("P = %g dBm, G = %.6g Hz: rate %.6g Hz (expected %.6g)", r.power_dbm, r.G, rate, r.gamma_tot_expected)
        rows.append(
            {
                "power_dbm": r.power_dbm,
                "g_hz": r.G,
                "rate_hz": rate,
                "rate_stderr_hz": fit.stderr("rate_hz"),
                "expected_rate_hz": r.gamma_tot_expected,
            }
        )
        if args.trace_dir:
            Path(args.trace_dir).mkdir(parents=True, exist_ok=True)
            io.write_trace(Path(args.trace_dir) / f"ringdown_{i}.csv", r.trace)
    _emit_json({"mode": mode_name, "runs": rows}, args.output)
    return EXIT_OK


def cmd_protocol(args, sc) -> int:
    seed = _seed(args, sc)
    shots = args.shots or 100
    system = sc.system(args.drive or ("write" if "write" in sc.drives else None))
    if args.state == "sequence":
        seq, T = sc.sequence(args.sequence, args.tau_s or 0.0)
    else:
        read = [s for s in sc.sequence(args.sequence)[0].segments if s.tone == "read"]
        if not read:
            raise ScenarioError(f"/sequences/{args.sequence}", "sequence has no read segment")
        r0 = read[0]
        T = r0.t_stop - r0.t_start
        G = r0.amplitude if args.state == "equilibrium" else 0.0
        segs = (Segment("read", 0.0, T, amplitude=G, mode=r0.mode),) if G > 0 else ()
        seq = PulseSequence(segs, record=((0.0, T),))
    X = sequence_shots(system, seq, T, shots, seed, sc.sim.dt)
    out = args.output or "shots.csv"
    io.write_shots(out, X)
    log.info("wrote %d shots to %s", shots, out)
    _emit_json(_tomo_dict(tomography(X)), None)
    return EXIT_OK


def cmd_tomography(args, sc) -> int:
    if not args.input:
        raise ValueError("tomography needs --input shots.csv")
    X = io.read_shots(args.input)
    if args.equilibrium:
        nth = args.nth if args.nth is not None else sc.mode(sc.drive(args.drive)[0] if sc.drives else None).n_th
        ref = io.read_shots(args.reference) if args.reference else None
        cal = gain_calibration(io.read_shots(args.equilibrium), nth, n_add=args.n_add, reference_shots=ref)
        res = calibrated_tomography(X, cal)
        out = {"calibration": {"gain": cal.value, "n_add": cal.diagnostics["n_add"], "known_nth": nth}}
    else:
        res = tomography(X, n_add=args.n_add or 0.0)
        out = {}
    out["tomography"] = _tomo_dict(res)
    _emit_json(out, args.output)
    return EXIT_OK


def cmd_swap(args, sc) -> int:
    sw = sc.swap
    if sw is None:
        raise ScenarioError("/swap", "scenario has no swap block")
    names = [sw["mode_1"], sw["mode_2"]]
    g1 = args.g_hz if args.g_hz is not None else sw["g1_hz"]
    g2 = args.g_hz if args.g_hz is not None else sw["g2_hz"]
    system = sc.system(args.drive, modes=names, detuning=sw["detuning_hz"], n_add=0.0)
    J = swap_coupling(g1, g2, sc.cavity.kappa, sw["detuning_hz"])
    log.info("J = %.6g Hz, full transfer after %.6g s", J, swap_time(J) if J else math.inf)
    n0 = tuple(0.0 for _ in names)
    cfg = replace(sc.sim, seed=_seed(args, sc), ensemble_size=args.shots or 200)
    pts = swap_experiment(system, g1, g2, sw["durations_s"], cfg, beta=math.sqrt(args.excite_quanta), n_initial=n0)
    out = args.output or "swap.csv"
    io.write_csv(
        out,
        ("duration_s", "n_coh_1", "n_coh_2", "n_th_1", "n_th_2"),
        ((p.duration, p.mode1.N_coh, p.mode2.N_coh, p.mode1.N_th, p.mode2.N_th) for p in pts),
    )
    log.info("wrote %s", out)
    return EXIT_OK


def cmd_fit(args, sc) -> int:
    if not args.input:
        raise ValueError("fit needs --input")
    if args.kind == "lorentzian":
        res = fit_lorentzian(io.read_spectrum(args.input))
    else:
        tr = io.read_trace(args.input)
        res = fit_ringdown(tr.t, energy_envelope(tr))
    if not res.converged:
        log.warning("fit did not converge: %s", res.diagnostics.get("message", ""))
    _emit_json(res.to_dict(), args.output)
    return EXIT_OK


_HANDLERS = {
    "modes": cmd_modes,
    "psd": cmd_psd,
    "transmission": cmd_transmission,
    "delay": cmd_delay,
    "cool": cmd_cool,
    "ringdown": cmd_ringdown,
    "protocol": cmd_protocol,
    "tomography": cmd_tomography,
    "swap": cmd_swap,
    "fit": cmd_fit,
}
_NEEDS_SCENARIO = set(SUBCOMMANDS) - {"fit"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="memsim", description="Membrane electromechanics simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="subcommand")
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("-c", "--config", help="scenario JSON (bundled scenarios are found by name)")
        s.add_argument("-o", "--output")
        s.add_argument("--seed", type=int)
        s.add_argument("--drive", help="named drive from the scenario")
        s.add_argument("--g-hz", type=float)
        s.add_argument("--span-hz", type=float)
        s.add_argument("--points", type=int)
        s.add_argument("--tau-s", type=float)
        s.add_argument("--shots", type=int)
        s.add_argument("--power-dbm", type=float, nargs="+")
        if name == "protocol":
            s.add_argument("--sequence", default="store")
            s.add_argument("--state", choices=("sequence", "equilibrium", "floor"), default="sequence")
        if name in ("ringdown", "swap"):
            s.add_argument("--excite-quanta", type=float, default=1e6 if name == "ringdown" else 4.0)
        if name == "ringdown":
            s.add_argument("--trace-dir")
        if name == "tomography":
            s.add_argument("--input")
            s.add_argument("--equilibrium", help="equilibrium shots CSV for gain calibration")
            s.add_argument("--reference", help="noise-floor shots CSV (mechanics decoupled)")
            s.add_argument("--nth", type=float, help="known equilibrium occupation")
            s.add_argument("--n-add", type=float)
        if name == "fit":
            s.add_argument("--input")
            s.add_argument("--kind", choices=("lorentzian", "ringdown"), default="lorentzian")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    first = next((a for a in argv if not a.startswith("-")), None)
    if first is None or first not in SUBCOMMANDS:
        if first is not None:
            sys.stderr.write(f"memsim: unknown subcommand {first!r}\n")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="memsim: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    logging.captureWarnings(True)
    try:
        sc = None
        if args.command in _NEEDS_SCENARIO or args.config:
            if not args.config:
                raise ValueError("-c/--config is required")
            sc = load_scenario(args.config)
        return _HANDLERS[args.command](args, sc)
    except (StabilityError, InconsistencyError, CalibrationError, InsufficientDataError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except (ScenarioError, ValueError, KeyError, OSError) as exc:
        log.error("validation error: %s", exc)
        return EXIT_VALIDATION
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
