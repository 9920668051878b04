"""Scenario files: strict JSON schema, unit-suffixed keys, resolved references.

Signal segments in a scenario give ``amplitude`` as the incident pulse
energy in quanta; pump segments give G in Hz; ``amplify`` gives a power
gain. :meth:`Scenario.sequence` converts these to simulator segments.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema

from .linear import CavitySpec, DriveConfig, MechModeParams
from .modal import Capacitor, ElectrodeGeometry, GeometryError, MembraneSpec, mode_frequency
from .sim import PulseSequence, Segment, SimConfig, SimSystem

__all__ = ["ScenarioError", "Scenario", "SCHEMA", "load_scenario", "bundled_scenario_path", "resolve_scenario_path"]

_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_NUM = {"type": "number"}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_SEGMENT = _obj(
    {
        "tone": {"enum": ["write", "read", "cool", "pump", "signal", "amplify"]},
        "t_start_s": _NONNEG,
        "t_stop_s": _POS,
        "envelope": {"enum": ["constant", "exponential"]},
        "rate_hz": _NONNEG,
        "amplitude": _NONNEG,
        "phase_rad": _NUM,
        "mode": {"type": "string"},
    },
    ["tone", "t_start_s", "t_stop_s", "envelope", "rate_hz", "amplitude", "phase_rad"],
)

SCHEMA = _obj(
    {
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "membrane": _obj(
            {
                "side_length_m": _POS,
                "thickness_m": _POS,
                "density_kg_m3": _POS,
                "stress_x_pa": _POS,
                "stress_y_pa": _POS,
                "effective_density_kg_m3": _POS,
            },
            ["side_length_m", "thickness_m", "density_kg_m3", "stress_x_pa", "stress_y_pa"],
        ),
        "electrode": _obj(
            {
                "disc_radius_m": _POS,
                "notch_width_m": _NONNEG,
                "notch_length_m": _NONNEG,
                "notch_sign": {"enum": [-1, 1]},
            },
            ["disc_radius_m", "notch_width_m", "notch_length_m", "notch_sign"],
        ),
        "capacitor": _obj(
            {"gap_m": _POS, "participation": {"type": "number", "minimum": 0, "maximum": 1}},
            ["gap_m", "participation"],
        ),
        "catalog": _obj(
            {
                "k_max": {"type": "integer", "minimum": 1},
                "l_max": {"type": "integer", "minimum": 1},
                "threshold": {"type": "number", "minimum": 0, "maximum": 1},
            }
        ),
        "cavity": _obj(
            {"f_c_hz": _POS, "kappa_in_hz": _NONNEG, "kappa_ex_hz": _POS},
            ["f_c_hz", "kappa_in_hz", "kappa_ex_hz"],
        ),
        "modes": {
            "type": "array",
            "minItems": 1,
            "items": _obj(
                {
                    "name": {"type": "string", "minLength": 1},
                    "f_m_hz": _POS,
                    "derive": _obj(
                        {"k": {"type": "integer", "minimum": 1}, "l": {"type": "integer", "minimum": 1}}, ["k", "l"]
                    ),
                    "gamma_m_hz": _POS,
                    "gamma_phi_hz": _NONNEG,
                    "n_th": _NONNEG,
                },
                ["name", "gamma_m_hz", "gamma_phi_hz", "n_th"],
            ),
        },
        "drives": {
            "type": "array",
            "items": _obj(
                {
                    "name": {"type": "string", "minLength": 1},
                    "mode": {"type": "string"},
                    "detuning_hz": _NUM,
                    "g_hz": _NONNEG,
                    "n_th_c": _NONNEG,
                    "n_add": _NONNEG,
                    "n_th_ex": _NONNEG,
                },
                ["name", "mode", "g_hz", "n_th_c", "n_add"],
            ),
        },
        "power_anchor": _obj({"power_dbm": _NUM, "g_hz": _POS}, ["power_dbm", "g_hz"]),
        "temperature_k": _POS,
        "sim": _obj(
            {
                "dt_s": _POS,
                "duration_s": _POS,
                "ensemble_size": {"type": "integer", "minimum": 1},
                "lo_offset_hz": _NONNEG,
            },
            ["dt_s", "duration_s", "ensemble_size"],
        ),
        "sequences": {
            "type": "object",
            "additionalProperties": _obj(
                {
                    "segments": {"type": "array", "items": _SEGMENT},
                    "record": {
                        "type": "array",
                        "items": {"type": "array", "items": _NONNEG, "minItems": 2, "maxItems": 2},
                    },
                    "store_at_s": _NONNEG,
                },
                ["segments"],
            ),
        },
        "swap": _obj(
            {
                "mode_1": {"type": "string"},
                "mode_2": {"type": "string"},
                "g1_hz": _NONNEG,
                "g2_hz": _NONNEG,
                "detuning_hz": _NUM,
                "durations_s": {"type": "array", "items": _POS, "minItems": 1},
            },
            ["mode_1", "mode_2", "g1_hz", "g2_hz", "detuning_hz", "durations_s"],
        ),
    },
    ["membrane", "electrode", "cavity", "modes", "sim"],
)


class ScenarioError(ValueError):
    """Validation failure; ``pointer`` is the JSON pointer of the field."""

    def __init__(self, pointer: str, msg: str):
        super().__init__(f"{pointer or '/'}: {msg}")
        self.pointer = pointer


def _pointer(parts) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in parts)


@dataclass
class Scenario:
    membrane: MembraneSpec
    electrode: ElectrodeGeometry
    capacitor: Capacitor
    cavity: CavitySpec
    modes: dict[str, MechModeParams]
    mode_index: dict[str, tuple[int, int] | None]
    drives: dict[str, tuple[str, DriveConfig]]
    sim: SimConfig
    lo_offset: float
    sequences: dict[str, dict]
    seed: int = 0
    catalog: dict = field(default_factory=dict)
    power_anchor: tuple[float, float] | None = None
    temperature: float | None = None
    swap: dict | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def mode_names(self) -> list[str]:
        return list(self.modes)

    def mode(self, name: str | None = None) -> MechModeParams:
        return self.modes[name or self.mode_names[0]]

    def drive(self, name: str | None = None) -> tuple[str, DriveConfig]:
        if not self.drives:
            raise ScenarioError("/drives", "scenario defines no drives")
        if name is None:
            name = next(iter(self.drives))
        if name not in self.drives:
            raise ScenarioError("/drives", f"no drive named {name!r}")
        return self.drives[name]

    def system(self, drive: str | None = None, modes: list[str] | None = None, **kw) -> SimSystem:
        """Simulator system for the listed modes (default: all), with bath
        and added-noise values from ``drive``."""
        noise = {}
        if self.drives:
            _, d = self.drive(drive)
            noise = dict(n_th_c=d.n_th_c, n_add=d.n_add, n_th_ex=d.n_th_ex)
        names = modes or self.mode_names
        args = dict(cavity=self.cavity, modes=tuple(self.modes[n] for n in names), lo_offset=self.lo_offset, **noise)
        args.update(kw)
        return SimSystem(**args)

    def sequence(self, name: str, tau_store: float = 0.0, modes: list[str] | None = None) -> tuple[PulseSequence, float]:
        """Simulator sequence with a storage gap of ``tau_store`` inserted at
        the sequence's ``store_at_s``; returns it with the run duration."""
        if name not in self.sequences:
            raise ScenarioError("/sequences", f"no sequence named {name!r}")
        if tau_store < 0:
            raise ValueError("tau_store must be >= 0")
        sq = self.sequences[name]
        names = modes or self.mode_names
        at = sq.get("store_at_s")
        if tau_store > 0 and at is None:
            raise ScenarioError(f"/sequences/{name}", "sequence has no store_at_s for a storage gap")

        def moved(t0):
            # blocks starting at or after the storage point move by the gap
            return tau_store if at is not None and t0 >= at - 1e-12 else 0.0

        segs = []
        for i, s in enumerate(sq["segments"]):
            dt = moved(s["t_start_s"])
            t0, t1 = s["t_start_s"] + dt, s["t_stop_s"] + dt
            amp = s["amplitude"]
            mode = 0
            if s["tone"] == "signal":
                amp = _flux_amplitude(amp, s["envelope"], s["rate_hz"], t1 - t0)
            elif s["tone"] not in ("amplify",):
                mname = s.get("mode", names[0])
                if mname not in names:
                    raise ScenarioError(f"/sequences/{name}/segments/{i}/mode", f"mode {mname!r} not simulated")
                mode = names.index(mname)
            segs.append(Segment(s["tone"], t0, t1, s["envelope"], s["rate_hz"], amp, s["phase_rad"], mode))
        rec = sq.get("record")
        record = tuple((a + moved(a), b + moved(a)) for a, b in rec) if rec else None
        end = self.sim.duration + (moved(at) if at is not None and at < self.sim.duration else 0.0)
        end = max([end] + [s.t_stop for s in segs] + [b for _, b in record or ()])
        return PulseSequence(tuple(segs), record), end


def _flux_amplitude(quanta: float, envelope: str, rate_hz: float, length: float) -> float:
    if envelope == "exponential" and rate_hz > 0:
        x = 2 * math.pi * rate_hz
        energy = math.expm1(x * length) / x
    else:
        energy = length
    return math.sqrt(quanta / energy)


def bundled_scenario_path(name: str = "paper_device.json") -> Path:
    return Path(str(resources.files("memsim") / "data" / name))


def resolve_scenario_path(path) -> Path:
    """The given path if it exists, else a bundled scenario of that name."""
    p = Path(path)
    if p.exists():
        return p
    b = bundled_scenario_path(p.name)
    if p.parent == Path(".") and b.exists():
        return b
    raise ScenarioError("", f"scenario file not found: {path}")


def _schema_error(err: jsonschema.ValidationError) -> ScenarioError:
    parts = list(err.absolute_path)
    if err.validator == "required":
        missing = [k for k in err.validator_value if isinstance(err.instance, dict) and k not in err.instance]
        if missing:
            return ScenarioError(_pointer(parts + [missing[0]]), "required field is missing")
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = [k for k in err.instance if k not in allowed]
        if extra:
            return ScenarioError(_pointer(parts + [extra[0]]), "unknown field")
    return ScenarioError(_pointer(parts), err.message)


def _validated(data) -> dict:
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(data), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        raise _schema_error(errors[0])
    return data


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("", "scenario must be a JSON object")
    _validated(data)

    def build(pointer, fn):
        try:
            return fn()
        except GeometryError as exc:
            raise ScenarioError(pointer, str(exc)) from None
        except ValueError as exc:
            raise ScenarioError(pointer, str(exc)) from None

    m = data["membrane"]
    membrane = build(
        "/membrane",
        lambda: MembraneSpec(
            m["side_length_m"], m["thickness_m"], m["density_kg_m3"], m["stress_x_pa"], m["stress_y_pa"],
            m.get("effective_density_kg_m3"),
        ),
    )
    e = data["electrode"]
    electrode = build(
        "/electrode",
        lambda: ElectrodeGeometry(e["disc_radius_m"], e["notch_width_m"], e["notch_length_m"], e["notch_sign"]),
    )
    build("/electrode", lambda: electrode.check_fits(membrane.side_length))
    c = data.get("capacitor")
    capacitor = Capacitor(c["gap_m"], c["participation"]) if c else Capacitor()
    cv = data["cavity"]
    cavity = build("/cavity", lambda: CavitySpec(cv["f_c_hz"], cv["kappa_in_hz"], cv["kappa_ex_hz"]))

    modes, index = {}, {}
    for i, md in enumerate(data["modes"]):
        ptr = f"/modes/{i}"
        if md["name"] in modes:
            raise ScenarioError(ptr + "/name", f"duplicate mode name {md['name']!r}")
        if ("f_m_hz" in md) == ("derive" in md):
            raise ScenarioError(ptr, "give exactly one of f_m_hz or derive")
        if "derive" in md:
            kl = (md["derive"]["k"], md["derive"]["l"])
            f_m = mode_frequency(membrane, kl)
        else:
            kl, f_m = None, md["f_m_hz"]
        modes[md["name"]] = build(ptr, lambda: MechModeParams(f_m, md["gamma_m_hz"], md["gamma_phi_hz"], md["n_th"]))
        index[md["name"]] = kl

    drives = {}
    for i, d in enumerate(data.get("drives", [])):
        ptr = f"/drives/{i}"
        if d["mode"] not in modes:
            raise ScenarioError(ptr + "/mode", f"unresolved mode reference {d['mode']!r}")
        if d["name"] in drives:
            raise ScenarioError(ptr + "/name", f"duplicate drive name {d['name']!r}")
        det = d.get("detuning_hz", -modes[d["mode"]].f_m)
        drives[d["name"]] = (
            d["mode"],
            build(ptr, lambda: DriveConfig(det, d["g_hz"], d["n_th_c"], d["n_add"], d.get("n_th_ex"))),
        )

    s = data["sim"]
    seed = int(data.get("seed", 0))
    sim = build("/sim", lambda: SimConfig(s["dt_s"], s["duration_s"], seed, s["ensemble_size"]))

    sequences = data.get("sequences", {})
    for name, sq in sequences.items():
        for i, seg in enumerate(sq["segments"]):
            ptr = f"/sequences/{name}/segments/{i}"
            if seg["t_stop_s"] <= seg["t_start_s"]:
                raise ScenarioError(ptr + "/t_stop_s", "t_stop_s must exceed t_start_s")
            if "mode" in seg and seg["mode"] not in modes:
                raise ScenarioError(ptr + "/mode", f"unresolved mode reference {seg['mode']!r}")
        for i, (a, b) in enumerate(sq.get("record", [])):
            if not b > a:
                raise ScenarioError(f"/sequences/{name}/record/{i}", "record window must have positive length")

    swap = data.get("swap")
    if swap:
        for key in ("mode_1", "mode_2"):
            if swap[key] not in modes:
                raise ScenarioError(f"/swap/{key}", f"unresolved mode reference {swap[key]!r}")
        if swap["mode_1"] == swap["mode_2"]:
            raise ScenarioError("/swap/mode_2", "swap needs two distinct modes")

    pa = data.get("power_anchor")
    return Scenario(
        membrane=membrane,
        electrode=electrode,
        capacitor=capacitor,
        cavity=cavity,
        modes=modes,
        mode_index=index,
        drives=drives,
        sim=sim,
        lo_offset=float(s.get("lo_offset_hz", 0.0)),
        sequences=sequences,
        seed=seed,
        catalog=dict(data.get("catalog", {})),
        power_anchor=(pa["power_dbm"], pa["g_hz"]) if pa else None,
        temperature=data.get("temperature_k"),
        swap=swap,
        raw=data,
    )


def load_scenario(path) -> Scenario:
    p = resolve_scenario_path(path)
    text = p.read_text(encoding="utf-8")
    if not text.strip():
        raise ScenarioError("", f"{p}: empty scenario file")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("", f"{p}: invalid JSON ({exc})") from None
    return scenario_from_dict(data)
