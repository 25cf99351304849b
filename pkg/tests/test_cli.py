import csv
import io
import json

import pytest

from qgem.cli import build_parser, main

REF_TRACE = ["sg", "trace", "--mass", "2e-15 kg", "--gradient", "1e4 T/m", "--t1", "0.25 ms",
             "--pair", "0,-1"]


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _rows(text):
    assert text.endswith("\r\n")
    return list(csv.reader(io.StringIO(text, newline="")))


def test_constants_json(capsys):
    code, out, _ = run(capsys, ["constants", "--format", "json"])
    data = json.loads(out)
    assert code == 0 and data["G"] == 6.6743e-11 and "hbar" in data


def test_background_dipole_reference(capsys):
    code, out, _ = run(capsys, ["background", "dipole", "--mass", "10 pg", "--d", "100 um",
                                "--p", "1e-4 e*cm"])
    assert code == 0 and json.loads(out)["ratio_scaling"] == 3.0e6


def test_sg_trace_csv(capsys):
    code, out, _ = run(capsys, REF_TRACE)
    rows = _rows(out)
    assert code == 0 and rows[0] == ["t", "x_left", "x_right", "v_left", "v_right"]
    sep = max(abs(float(r[2]) - float(r[1])) for r in rows[1:])
    assert sep == pytest.approx(5.8e-12, rel=1e-2)


def test_sg_fringe_reports_reference(capsys):
    code, out, _ = run(capsys, ["sg", "fringe"] + REF_TRACE[2:])
    rep = json.loads(out)
    assert code == 0 and rep["reference_fringe_tilt"] == 3.5e-3
    assert "unreconciled parameters" in rep["note"]


@pytest.mark.parametrize("argv", [
    ["entangle", "phases", "--mass", "1e-14 kg"],
    ["entangle", "phases", "--mass", "1e-14 kg", "--format", "csv"],
    ["entangle", "state", "--mass", "1e-14 kg"],
    ["entangle", "state", "--mass", "1e-14 kg", "--format", "csv"],
    ["entangle", "witness", "--mass", "1e-14 kg"],
    ["background", "casimir", "--num", "5"],
    ["background", "casimir", "--num", "5", "--format", "json"],
    ["background", "detect"],
    ["background", "shield"],
    ["background", "shield", "--format", "csv"],
    ["constants", "--format", "csv"],
    ["scan", "--mass", "1e-14 kg", "--axis", "mass=1e-15,1e-14"],
    ["scan", "--mass", "1e-14 kg", "--axis", "tau=log:0.5 s:2 s:3", "--format", "json"],
    ["sg", "trace", "--format", "json"] + REF_TRACE[2:],
])
def test_outputs_are_valid(capsys, argv):
    code, out, _ = run(capsys, argv)
    assert code == 0
    sub = build_parser().parse_args(argv)
    if sub.format == "csv":
        rows = _rows(out)
        assert len({len(r) for r in rows}) == 1
    else:
        json.loads(out)


def test_casimir_header(capsys):
    _, out, _ = run(capsys, ["background", "casimir", "--num", "3"])
    assert _rows(out)[0] == ["z", "force", "regime", "freq_shift", "min_detectable"]


def test_schema_error_exit_1(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text('{"schema": 2, "mass": "1e-14 kg"}')
    code, out, err = run(capsys, ["budget", "check", "--config", str(p)])
    assert code == 1 and out == "" and "schema" in err


@pytest.mark.parametrize("argv", [
    ["budget", "check", "--mass", "1e-14 furlong"],
    ["budget", "check"],
    ["scan", "--mass", "1e-14 kg", "--axis", "geometry.q=1,2"],
    ["scan", "--mass", "1e-14 kg", "--axis", "mass="],
    ["scan", "--mass", "1e-14 kg"],
    ["constants", "--seed", "-1"],
    ["entangle", "witness", "--mass", "1e-14 kg", "--set", "unknown=3"],
    ["nonsense"],
])
def test_parse_errors_exit_1(capsys, argv):
    code, out, err = run(capsys, argv)
    assert code == 1 and out == "" and err


def test_infeasible_exit_2_still_writes_report(tmp_path, capsys):
    out_path = tmp_path / "r.json"
    code, _, err = run(capsys, ["budget", "check", "--mass", "1e-14 kg", "--p", "1e-4 e*cm",
                                "--out", str(out_path)])
    rep = json.loads(out_path.read_text())
    assert code == 2 and not rep["feasible"] and "background_ratio" in err


def test_feasible_budget_exit_0(tmp_path, capsys):
    code, out, _ = run(capsys, ["budget", "check", "--mass", "1e-13 kg", "--gradient", "2e6 T/m",
                                "--t1", "0.5 s", "--set", "coherence_time=2 s"])
    assert code == 0 and json.loads(out)["feasible"]


def test_config_file_with_set(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"schema": 1, "mass": "1e-14 kg", "geometry": {"d": "400 um"}}))
    _, out, _ = run(capsys, ["entangle", "phases", "--config", str(p), "--set", "tau=2 s"])
    assert json.loads(out)["entangling_phase"] == pytest.approx(2 * 0.0210964, rel=1e-5)


def test_byte_identical_outputs(tmp_path, capsys):
    argv = ["scan", "--mass", "1e-14 kg", "--axis", "mass=log:1e-15 kg:1e-13 kg:3",
            "--axis", "dephasing.gas=0,0.1"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(argv + ["--out", str(a)])
    main(argv + ["--out", str(b), "--workers", "2"])
    assert a.read_bytes() == b.read_bytes()


def test_optimize_json(capsys):
    code, out, _ = run(capsys, ["optimize", "--mass", "1e-13 kg", "--gradient", "2e6 T/m",
                                "--t1", "0.5 s", "--set", "coherence_time=2 s",
                                "--axis", "tau=lin:1:2:5"])
    rep = json.loads(out)
    assert code == 0 and rep["report"]["witness"] == pytest.approx(2.0, abs=1e-6)
    assert rep["config"]["schema"] == 1


def _subparsers(parser):
    for action in parser._actions:
        if action.__class__.__name__ == "_SubParsersAction":
            for name, sub in action.choices.items():
                yield from ([(name, sub)] if not any(
                    a.__class__.__name__ == "_SubParsersAction" for a in sub._actions)
                    else [(f"{name} {n}", s) for n, s in _subparsers(sub)])


@pytest.mark.parametrize("name, sub", list(_subparsers(build_parser())))
def test_help_lists_flags_and_units(name, sub):
    text = sub.format_help()
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in text
    for flag in ("--config", "--out", "--format", "--seed", "--set"):
        assert flag in text
    units = ("kg", " m", " s", "T/m", "rad", "Hz", "SI", "dimensionless", "s^-1", "C*m", "N")
    assert any(u in text for u in units), name


def test_help_exits_zero(capsys):
    assert main(["scan", "--help"]) == 0
