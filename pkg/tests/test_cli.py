import csv
import io
import json
import subprocess
import sys

import pytest

from lbtgame.cli import ResultDocument, parse_instance, run, sig12
from lbtgame.symmetric import value

from golden.regen import CASES, HERE, out_path


def cli(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, text, name="inst.json"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_two_site_document(capsys):
    code, out, _ = cli(capsys, "two-site", "--input", str(HERE / "g2.json"))
    assert code == 0
    doc = ResultDocument.from_json(out)
    assert doc.values["x_star"] == sig12(1 / 3)
    assert doc.values["value"] == sig12(8 / 9)


def test_noninfo_document(capsys):
    code, out, _ = cli(capsys, "noninfo", "--input", str(HERE / "g3.json"))
    assert code == 0
    doc = ResultDocument.from_json(out)
    assert doc.values["value"] == pytest.approx(1.84615, abs=1e-5)
    assert [e["prob"] for e in doc.strategies["mix"]] == [sig12(7 / 13), sig12(5 / 13), sig12(1 / 13)]


def test_symmetric_zero_bombs(capsys):
    code, out, _ = cli(capsys, "symmetric", "--input", str(HERE / "sym5.json"), "--m", "0")
    assert code == 0
    doc = ResultDocument.from_json(out)
    assert doc.values["value"] == 0.0
    assert doc.instance["m"] == 0


def test_symmetric_csv_rows_match_library(capsys):
    code, out, _ = cli(capsys, "symmetric", "--input", str(HERE / "sym5.json"), "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["x", "P_N", "r", "d", "l_minus", "e_minus", "l_plus", "e_plus", "v"]
    lib = value(5, 2, 10, 0.75, 0.9, 0.5)
    assert len(rows) == 6
    for row, px, xv in zip(rows, lib.minus_count_probs, lib.per_x):
        assert float(row["P_N"]) == sig12(px)
        assert float(row["v"]) == sig12(xv.value)
        lay = xv.layout
        assert [int(row[c]) for c in ("l_minus", "e_minus", "l_plus", "e_plus")] == \
            [lay.l_minus, lay.e_minus, lay.l_plus, lay.e_plus]
        if xv.r is None:
            assert row["r"] == row["d"] == ""
        else:
            assert float(row["r"]) == sig12(xv.r)
            assert int(row["d"]) == xv.d


def test_table_uses_six_digits(capsys):
    code, out, _ = cli(capsys, "two-site", "--input", str(HERE / "g2.json"), "--format", "table")
    assert code == 0
    assert "0.888889" in out and "0.888888888889" not in out


def test_output_file(capsys, tmp_path):
    target = tmp_path / "res.json"
    code, out, _ = cli(capsys, "noninfo", "--input", str(HERE / "g3.json"), "--output", str(target))
    assert code == 0 and out == ""
    assert ResultDocument.from_json(target.read_text()).solver == "noninfo"


def test_fraction_strings(tmp_path):
    spec, _ = parse_instance('{"n": 2, "locks": {"mode": "fixed", "k": 1}, "m": 1,'
                             ' "a": "7/12", "b": "3/4", "c": ["2", 1]}')
    assert spec.a == (7 / 12, 7 / 12) and spec.c == (2.0, 1.0)


@pytest.mark.parametrize("text,needle", [
    ('{"n": 2, "locks": {"mode": "fixed", "k": 1}, "m": 1, "a": 0.7, "b": 0.7, "zeta": 1}', "zeta"),
    ('{"n": 2, "locks": {"mode": "fixed", "k": 2}, "m": 1, "a": 0.7, "b": 0.7}', "k must be < n"),
    ('{"n": 2, "locks": {"mode": "fixed", "k": 1}, "m": 1, "a": 1.7, "b": 0.7}', "a:"),
    ('{"n": 2, "locks": {"mode": "maybe"}, "m": 1, "a": 0.7, "b": 0.7}', "locks.mode"),
    ('{"n": 2, "locks": {"mode": "fixed", "k": 1}, "m": 1, "a": "x/y", "b": 0.7}', "a:"),
    ('{"n": 2,\n "m": 1,,}', "line 2 column"),
])
def test_invalid_input_exits_1(capsys, tmp_path, text, needle):
    code, _, err = cli(capsys, "symmetric", "--input", write(tmp_path, text))
    assert code == 1
    assert needle in err


def test_bad_flags_exit_1(capsys):
    assert cli(capsys, "general", "--input", str(HERE / "g2.json"), "--tol", "-1")[0] == 1
    assert cli(capsys, "simulate", "--input", str(HERE / "sym2.json"), "--trials", "0")[0] == 1
    assert cli(capsys, "simulate", "--input", str(HERE / "sym2.json"), "--policy", "nope")[0] == 1


def test_missing_file_exits_1(capsys, tmp_path):
    code, _, err = cli(capsys, "symmetric", "--input", str(tmp_path / "nope.json"))
    assert code == 1 and "error" in err


def test_wrong_solver_for_instance_exits_1(capsys):
    assert cli(capsys, "noninfo", "--input", str(HERE / "g2.json"))[0] == 1
    assert cli(capsys, "two-site", "--input", str(HERE / "g3.json"))[0] == 1
    assert cli(capsys, "symmetric", "--input", str(HERE / "g3.json"))[0] == 1


def test_non_convergence_exits_2(capsys, monkeypatch):
    import lbtgame.cli as mod
    from lbtgame.equilibrium import NonConvergenceError

    def boom(spec, tol):
        raise NonConvergenceError("no convergence after 1 iterations")

    monkeypatch.setattr(mod, "solve_general", boom)
    code, _, err = cli(capsys, "general", "--input", str(HERE / "g2.json"))
    assert code == 2 and "convergence" in err


def test_oracle_mismatch_exits_2(capsys, monkeypatch):
    import lbtgame.cli as mod
    monkeypatch.setattr(mod, "exhaustive_symmetric_value", lambda *a: -1.0)
    code, out, err = cli(capsys, "oracle", "--input", str(HERE / "sym5.json"))
    assert code == 2
    assert json.loads(out)["values"]["passed"] is False


def test_simulate_is_stable(capsys):
    args = ("simulate", "--input", str(HERE / "sym2.json"), "--trials", "9000", "--seed", "3")
    first = cli(capsys, *args)[1]
    second = cli(capsys, *args, "--workers", "4")[1]
    assert first == second


def test_iid_ratios(capsys):
    code, out, _ = cli(capsys, "ratios", "--input", str(HERE / "iid4.json"))
    assert code == 0
    assert ResultDocument.from_json(out).values["r"] > 1


def test_document_round_trip():
    doc = ResultDocument(instance={"n": 2}, solver="x", values={"v": 1 / 3, "r": float("inf"), "z": None},
                         strategies={"mix": [0.25, 0.75]})
    again = ResultDocument.from_json(doc.to_json())
    assert again == doc
    assert again.values == {"v": sig12(1 / 3), "r": "inf", "z": None}


@pytest.mark.parametrize("name,command,extra", CASES, ids=[f"{n}-{c}" for n, c, _ in CASES])
def test_golden_documents(capsys, name, command, extra):
    stored = out_path(name, command).read_text()
    doc = ResultDocument.from_json(stored)
    assert ResultDocument.from_json(doc.to_json()) == doc
    parse_instance(json.dumps(doc.instance))
    code, out, _ = cli(capsys, command, "--input", str(HERE / f"{name}.json"), *extra)
    assert code == 0
    assert ResultDocument.from_json(out) == doc


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "lbtgame.cli", "two-site", "--input",
                          str(HERE / "g2.json"), "--format", "csv"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "x_star,0.333333333333" in out.stdout
