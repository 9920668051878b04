import copy
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memsim import io
from memsim.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, main
from memsim.linear import Spectrum
from memsim.scenario import ScenarioError, bundled_scenario_path, load_scenario, scenario_from_dict
from memsim.sim import Trace

BUNDLED = json.loads(bundled_scenario_path().read_text())


def scenario_with(**edits):
    d = copy.deepcopy(BUNDLED)
    for path, value in edits.items():
        node = d
        *head, last = path.split("__")
        for k in head:
            node = node[int(k)] if isinstance(node, list) else node[k]
        if value is None:
            del node[last]
        else:
            node[int(last) if isinstance(node, list) else last] = value
    return d


# --- io --------------------------------------------------------------------------------


finite = st.floats(allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=20))
def test_shots_round_trip_exactly(tmp_path_factory, rows):
    p = tmp_path_factory.mktemp("io") / "shots.csv"
    io.write_shots(p, rows)
    assert np.array_equal(io.read_shots(p), np.asarray(rows, dtype=float))


def test_spectrum_and_trace_round_trip(tmp_path):
    f = np.linspace(-1.0, 1.0, 7) * math.pi
    s = Spectrum(f, np.exp(1j * f) / 3)
    io.write_spectrum(tmp_path / "t.csv", s)
    back = io.read_spectrum(tmp_path / "t.csv")
    assert np.array_equal(back.freq, f) and np.array_equal(back.value, s.value)
    tr = Trace(np.arange(5) * 0.1, np.sqrt(np.arange(5.0)), -np.arange(5) / 7)
    io.write_trace(tmp_path / "tr.csv", tr)
    r = io.read_trace(tmp_path / "tr.csv")
    assert np.array_equal(r.I, tr.I) and np.array_equal(r.Q, tr.Q)


def test_csv_header_errors(tmp_path):
    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(ValueError, match="empty"):
        io.read_shots(tmp_path / "empty.csv")
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="missing column"):
        io.read_shots(tmp_path / "bad.csv")
    assert io.fmt(True) == "true" and io.fmt(np.int64(3)) == "3"
    assert float(io.fmt(0.1 + 0.2)) == 0.1 + 0.2


# --- scenario ---------------------------------------------------------------------------


def test_bundled_scenario_loads():
    sc = load_scenario("paper_device.json")
    assert sc.mode_names == ["m13", "m11"]
    assert sc.cavity.eta == pytest.approx(0.6)
    assert sc.drive("write")[1].detuning == -sc.mode("m13").f_m
    seq, T = sc.sequence("store", tau_store=1.0)
    assert T == pytest.approx(1.62)
    read = [s for s in seq.segments if s.tone == "read"][0]
    assert read.t_start == pytest.approx(1.56) and seq.record[0] == pytest.approx((1.56, 1.62))
    sig = [s for s in seq.segments if s.tone == "signal"][0]
    x = 2 * math.pi * sig.rate * (sig.t_stop - sig.t_start)
    assert sig.amplitude**2 * math.expm1(x) / (2 * math.pi * sig.rate) == pytest.approx(7.066)


@pytest.mark.parametrize(
    "edits, pointer",
    [
        ({"membrane__stress_y_pa": None}, "/membrane/stress_y_pa"),
        ({"membrane__colour": "red"}, "/membrane/colour"),
        ({"cavity__kappa_ex_hz": -1.0}, "/cavity/kappa_ex_hz"),
        ({"drives__0__mode": "m99"}, "/drives/0/mode"),
        ({"modes__1__name": "m13"}, "/modes/1/name"),
        ({"swap__mode_2": "m13"}, "/swap/mode_2"),
        ({"sequences__store__segments__0__t_stop_s": 0.0}, "/sequences/store/segments/0"),
    ],
)
def test_scenario_errors_name_the_field(edits, pointer):
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(scenario_with(**edits))
    assert exc.value.pointer.startswith(pointer)
    assert pointer in str(exc.value)


def test_scenario_file_errors(tmp_path):
    (tmp_path / "empty.json").write_text("")
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "empty.json")
    (tmp_path / "bad.json").write_text("{nope")
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "bad.json")
    with pytest.raises(ScenarioError, match="not found"):
        load_scenario(tmp_path / "missing.json")


def test_derived_mode_frequency():
    d = scenario_with()
    d["modes"][0] = {"name": "m13", "derive": {"k": 1, "l": 3}, "gamma_m_hz": 8.2e-3, "gamma_phi_hz": 0.0, "n_th": 476.0}
    sc = scenario_from_dict(d)
    assert sc.mode("m13").f_m == pytest.approx(871e3, rel=0.01)
    d["modes"][0]["f_m_hz"] = 1.0
    with pytest.raises(ScenarioError):
        scenario_from_dict(d)


# --- cli --------------------------------------------------------------------------------


def test_cli_exit_codes(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["modes", "--bogus"]) == EXIT_VALIDATION
    assert main(["modes"]) == EXIT_VALIDATION
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(scenario_with(membrane__stress_y_pa=None)))
    assert main(["modes", "-c", str(bad), "-o", str(tmp_path / "m.csv")]) == EXIT_VALIDATION
    assert "/membrane/stress_y_pa" in capsys.readouterr().err
    one = tmp_path / "one.csv"
    io.write_shots(one, [(1.0, 2.0)])
    assert main(["tomography", "-c", "paper_device.json", "--input", str(one)]) == EXIT_NUMERICAL


def test_cli_modes_and_delay(tmp_path):
    out = tmp_path / "modes.csv"
    assert main(["modes", "-c", "paper_device.json", "-o", str(out)]) == EXIT_OK
    cols = io.read_csv(out, io.CATALOG_HEADER)
    assert len(cols["k"]) == 64
    out = tmp_path / "delay.csv"
    assert main(["delay", "-c", "paper_device.json", "-o", str(out), "--g-hz", "9.07", "--span-hz", "0.2", "--points", "4001"]) == EXIT_OK
    cols = io.read_csv(out, ["delta_hz", "tau_s"])
    i0 = int(np.argmin(np.abs(cols["delta_hz"])))
    assert cols["tau_s"][i0] > 4000


def test_cli_protocol_is_deterministic(tmp_path, capsys):
    args = ["protocol", "-c", "paper_device.json", "--shots", "4", "--seed", "3"]
    assert main(args + ["-o", str(tmp_path / "a.csv")]) == EXIT_OK
    first = json.loads(capsys.readouterr().out)
    assert main(args + ["-o", str(tmp_path / "b.csv")]) == EXIT_OK
    second = json.loads(capsys.readouterr().out)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert first == second and first["shots"] == 4


def test_cli_fit_round_trip(tmp_path, capsys):
    from memsim.estimators import lorentzian

    f = np.linspace(-10, 10, 401)
    io.write_spectrum(tmp_path / "psd.csv", Spectrum(f, lorentzian(f, 0.5, 2.0, 3.0, 0.0)))
    assert main(["fit", "--input", str(tmp_path / "psd.csv")]) == EXIT_OK
    res = json.loads(capsys.readouterr().out)
    assert res["converged"] and res["params"]["fwhm_hz"] == pytest.approx(2.0, rel=1e-9)
