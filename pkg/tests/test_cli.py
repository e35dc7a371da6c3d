import io
import json
import subprocess
import sys

import pytest

from mstpolya.cli import main
from mstpolya.models import protected_urn


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


@pytest.mark.parametrize("m,count", [(2, 5), (3, 19), (4, 69)])
def test_types(m, count):
    code, text = run("types", "--m", str(m), "--out", "json")
    assert code == 0
    rep = json.loads(text)
    assert rep["count"] == count and len(rep["rows"]) == count


def test_types_csv_and_bad_arity():
    code, text = run("types", "--m", "2", "--out", "csv")
    assert text.splitlines()[0] == "index,type,activity,protected,leaves"
    assert len(text.splitlines()) == 6
    assert run("types", "--m", "1")[0] == 2


def test_analyze_protected_ternary():
    code, text = run("analyze", "--m", "3", "--model", "protected", "--functional", "protected")
    rep = json.loads(text)
    assert code == 0 and rep["regime"] == "normal"
    assert rep["functionals"]["protected"] == {"mean": "57/700", "variance": "1692302314867/43692253605000"}
    assert rep["eigenvalues"][:3] == ["1", "0", "-2"]
    assert len(rep["sigma"]) == 19


def test_analyze_leaves():
    rep = json.loads(run("analyze", "--m", "3", "--model", "leaves", "--functional", "leaves")[1])
    assert rep["functionals"]["leaves"] == {"mean": "3/10", "variance": "89/2100"}


def test_analyze_not_normal_still_reports_spectrum():
    code, text = run("analyze", "--m", "27", "--model", "nodes")
    rep = json.loads(text)
    assert code == 0
    assert rep["regime"] == "not-normal"
    assert "sigma" not in rep and "NOT ASYMPTOTICALLY NORMAL" in rep["warning"]
    assert len(rep["eigenvalues"]) == 26 and len(rep["mu"]) == 26


def test_analyze_float_precision():
    rep = json.loads(run("analyze", "--m", "3", "--model", "protected", "--precision", "float", "--functional", "protected")[1])
    assert rep["precision"] == "float"
    assert abs(rep["functionals"]["protected"]["mean"] - 57 / 700) < 1e-12


def test_analyze_spec_file(tmp_path):
    path = tmp_path / "urn.json"
    path.write_text(protected_urn(2).spec.to_json(), encoding="utf-8")
    rep = json.loads(run("analyze", "--spec", str(path))[1])
    assert rep["model"] == "custom" and rep["eigenvalues"] == ["1", "0", "-2", "-3", "-4"]
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    assert run("analyze", "--spec", str(bad))[0] == 2


def test_size_caps_exit_3():
    assert run("analyze", "--m", "7", "--model", "protected")[0] == 3
    assert run("simulate", "--m", "3", "--n", "1000000000", "--trials", "10")[0] == 3
    assert run("oracle", "--m", "2", "--n-max", "12")[0] == 3


def test_simulate_csv_with_theory_and_determinism():
    argv = ("simulate", "--m", "3", "--n", "3000", "--trials", "50", "--stat", "two_protected", "--seed", "1")
    code, a = run(*argv)
    assert code == 0 and a == run(*argv)[1]
    header, row = a.splitlines()
    cols = dict(zip(header.split(","), row.split(",")))
    assert float(cols["theory_mean"]) == pytest.approx(57 / 700 * 3000)
    assert abs(float(cols["z_mean"])) < 6


def test_simulate_urn_mode():
    code, text = run("simulate", "--mode", "urn", "--model", "one-protected", "--m", "3", "--n", "500", "--trials", "20", "--stat", "leaves")
    assert code == 0 and text.startswith("statistic,")
    assert run("simulate", "--mode", "urn", "--m", "3")[0] == 2


def test_spectral():
    rep = json.loads(run("spectral", "--m", "26", "--model", "nodes", "--out", "json")[1])
    assert rep["holds"] and rep["lambda2_re"] < 0.5
    assert not json.loads(run("spectral", "--m", "27", "--model", "nodes", "--out", "json")[1])["holds"]
    rep = json.loads(run("spectral", "--m", "4", "--model", "protected", "--out", "json")[1])
    assert rep["holds"] and rep["q"] == 69 and rep["gap_map_identity"] and rep["phi_roots_contained"]
    rep = json.loads(run("spectral", "--m", "3", "--model", "protected", "--out", "json")[1])
    expected = [1, 0, -2, -3, -3] + [-4] * 4 + [-5] * 3 + [-6] * 3 + [-7] * 2 + [-8, -9]
    assert rep["eigenvalues"] == [str(x) for x in expected]


def test_oracle_json_round_trip():
    code, text = run("oracle", "--m", "2", "--n-max", "3")
    dists = json.loads(text)
    assert dists[3] == {"n": 3, "pmf": {"0": "1/3", "1": "2/3"}}


def test_verify_passes():
    code, text = run("verify")
    assert code == 0
    assert "passed: 45" in text


def test_verify_failure_exit_code(monkeypatch):
    import mstpolya.ledger as ledger

    data = json.loads(json.dumps(ledger._published()))
    data["binary_protected_variance"]["value"] = "1/2"
    monkeypatch.setattr(ledger, "_published", lambda: data)
    code, text = run("verify", "--only", "binary")
    assert code == 4 and "fail" in text


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mstpolya", "types", "--m", "2", "--out", "csv"], capture_output=True, text=True)
    assert proc.returncode == 0 and len(proc.stdout.splitlines()) == 6
