import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from quadsemigroup.cli import main, parse_directions
from quadsemigroup.ensembles import harmonic_oscillator, kramers_symbol
from quadsemigroup.errors import InputError
from quadsemigroup.symplectic_core import make_symbol, symbol_from_dict, symbol_to_dict


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def files(tmp_path):
    return {
        "ho": _write(tmp_path / "ho.json", symbol_to_dict(harmonic_oscillator())),
        "kramers": _write(tmp_path / "kramers.json", symbol_to_dict(kramers_symbol())),
        "ixi2": _write(tmp_path / "ixi2.json", symbol_to_dict(make_symbol(1, np.diag([0, 1j])))),
        "model": _write(tmp_path / "model.json", {"n": 2, "Q": [0, 0, 0, 2], "B": [0, 1, -1, -1]}),
        "zero": _write(tmp_path / "zero.json", {"n": 2, "Q": [0, 0, 0, 0], "B": [0, 1, -1, -1]}),
    }


def _report(path):
    with open(path) as fh:
        return json.load(fh)


def test_analyze_ho(files, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["analyze", "--input", files["ho"], "--N", "16", "--out-json", str(out)]) == 0
    rep = _report(out)
    assert rep["status"] == "pass"
    assert rep["results"]["chain"]["k0"] == 0
    assert "checks:" in capsys.readouterr().out


def test_analyze_kramers(files, tmp_path):
    out = tmp_path / "r.json"
    assert main(["analyze", "--input", files["kramers"], "--N", "24", "--out-json", str(out)]) == 0
    rep = _report(out)
    assert rep["results"]["chain"]["k0"] == 1
    assert rep["counts"]["fail"] == 0


def test_analyze_singular_space_is_not_a_failure(files, tmp_path):
    out = tmp_path / "r.json"
    assert main(["analyze", "--input", files["ixi2"], "--N", "8", "--out-json", str(out)]) == 0
    rep = _report(out)
    assert rep["results"]["chain"]["k0"] is None
    assert any(v["status"] == "flag" for v in rep["verdicts"])


def test_ou_round_trip(files, tmp_path):
    sym = tmp_path / "sym.json"
    rep_ou = tmp_path / "ou.json"
    rep_an = tmp_path / "an.json"
    assert main(["ou", "--input", files["model"], "--out-symbol", str(sym), "--out-json", str(rep_ou)]) == 0
    q = symbol_from_dict(json.loads(sym.read_text()))
    np.testing.assert_allclose(q.M, kramers_symbol().M, atol=1e-14)
    assert main(["analyze", "--input", str(sym), "--N", "16", "--out-json", str(rep_an)]) == 0
    ou, an = _report(rep_ou), _report(rep_an)
    assert ou["results"]["k0"] == an["results"]["chain"]["k0"] == 1


def test_ou_not_hypoelliptic_exits_zero(files, tmp_path):
    out = tmp_path / "r.json"
    assert main(["ou", "--input", files["zero"], "--out-json", str(out)]) == 0
    rep = _report(out)
    assert any(v["status"] == "flag" for v in rep["verdicts"])


def test_propagate_csv(files, tmp_path):
    out_csv = tmp_path / "n.csv"
    code = main([
        "propagate", "--input", files["kramers"], "--N", "12", "--t-lo", "1", "--t-hi", "4",
        "--t-count", "6", "--directions", "xi2,x1", "--out-csv", str(out_csv),
    ])
    assert code == 0
    with open(out_csv) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "norm", "direction_label", "N", "seed"]
    assert len(rows) == 1 + 2 * 6
    assert {r[2] for r in rows[1:]} == {"xi2", "x1"}
    assert all(r[3] == "12" and r[4] == "0" for r in rows[1:])


def test_verify_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["verify", "--ensemble", "5", "--out-json", str(a)]) == 0
    assert main(["verify", "--ensemble", "5", "--out-json", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_verify_mutation_fails(tmp_path):
    out = tmp_path / "m.json"
    assert main(["verify", "--ensemble", "5", "--self-test-mutation", "--out-json", str(out)]) == 1
    assert _report(out)["status"] == "fail"


@pytest.mark.parametrize(
    "content",
    ['{"n": 1, "M": [[1, 0]]', '{"n": 1, "M": [[1, 0], [0, 0], [0, 0]]}', '{"n": 1, "M": [[NaN, 0]]}'],
)
def test_bad_input_exit_two(tmp_path, capsys, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    assert main(["analyze", "--input", str(path)]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_missing_file_and_bad_N(files, tmp_path):
    assert main(["analyze", "--input", str(tmp_path / "none.json")]) == 2
    assert main(["analyze", "--input", files["ho"], "--N", "1"]) == 2
    assert main(["propagate", "--input", files["ho"], "--directions", "zeta"]) == 2


def test_window_with_too_few_points(files):
    assert main(["propagate", "--input", files["ho"], "--N", "8", "--t-count", "3"]) == 2


def test_parse_directions():
    dirs = parse_directions("x,xi", 1)
    assert [d[0] for d in dirs] == ["x1", "xi1"]
    np.testing.assert_array_equal(dirs[1][1], [0, 1])
    (label, vec), = parse_directions("1;1j", 1)
    np.testing.assert_array_equal(vec, [1, 1j])
    with pytest.raises(InputError):
        parse_directions("1;2;3", 1)


def test_module_entry_point(files):
    proc = subprocess.run(
        [sys.executable, "-m", "quadsemigroup", "analyze", "--input", files["ho"], "--N", "8"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "PASS" in proc.stdout
