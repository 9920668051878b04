"""CSV and JSON emission/ingestion. Floats are written with 17 significant
digits so every file round-trips exactly."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .linear import Spectrum
from .sim import Trace

__all__ = [
    "CATALOG_HEADER",
    "fmt",
    "write_csv",
    "read_csv",
    "write_catalog",
    "write_spectrum",
    "read_spectrum",
    "write_delay",
    "write_trace",
    "read_trace",
    "write_shots",
    "read_shots",
    "write_json",
]

CATALOG_HEADER = ("k", "l", "freq_hz", "overlap", "g0_hz", "x_zpf_m", "detectable")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path, required: Sequence[str]) -> dict[str, np.ndarray]:
    """Columns by header name. The header row is mandatory."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in required if c not in header]
    if missing:
        raise ValueError(f"{path}: missing column(s) {', '.join(missing)} (header: {','.join(header)})")
    body = [r for r in rows[1:] if r]
    out = {}
    for j, name in enumerate(header):
        try:
            out[name] = np.array([float(r[j]) for r in body], dtype=float)
        except (ValueError, IndexError):
            out[name] = np.array([r[j] if j < len(r) else "" for r in body], dtype=object)
    return out


def write_catalog(path, catalog) -> None:
    write_csv(
        path,
        CATALOG_HEADER,
        (
            (r.index.k, r.index.l, r.frequency, r.overlap, r.g0, r.x_zpf, bool(r.detectable))
            for r in catalog
        ),
    )


def write_spectrum(path, spec: Spectrum) -> None:
    if np.iscomplexobj(spec.value):
        write_csv(path, ("freq_hz", "re", "im"), zip(spec.freq, spec.value.real, spec.value.imag))
    else:
        write_csv(path, ("freq_hz", "psd_quanta"), zip(spec.freq, spec.value))


def read_spectrum(path) -> Spectrum:
    """Real PSD (``freq_hz,psd`` or ``freq_hz,psd_quanta``) or complex
    response (``freq_hz,re,im``)."""
    cols = read_csv(path, ["freq_hz"])
    if "re" in cols and "im" in cols:
        return Spectrum(cols["freq_hz"], cols["re"] + 1j * cols["im"])
    for name in ("psd", "psd_quanta"):
        if name in cols:
            return Spectrum(cols["freq_hz"], cols[name])
    raise ValueError(f"{path}: expected a psd, psd_quanta or re/im column")


def write_delay(path, delta_hz, tau_s) -> None:
    write_csv(path, ("delta_hz", "tau_s"), zip(delta_hz, tau_s))


def write_trace(path, trace: Trace) -> None:
    tr = trace.single(0)
    write_csv(path, ("t_s", "i", "q"), zip(tr.t, tr.I, tr.Q))


def read_trace(path) -> Trace:
    cols = read_csv(path, ["t_s", "i", "q"])
    return Trace(cols["t_s"], cols["i"], cols["q"])


def write_shots(path, shots) -> None:
    s = np.asarray(shots, dtype=float)
    write_csv(path, ("shot", "x1", "x2"), ((i, a, b) for i, (a, b) in enumerate(s)))


def read_shots(path) -> np.ndarray:
    cols = read_csv(path, ["shot", "x1", "x2"])
    return np.column_stack([cols["x1"], cols["x2"]])


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, allow_nan=True) + "\n", encoding="utf-8")
