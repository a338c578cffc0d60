import json

import pytest

from gaussnet import io
from gaussnet.cli import main
from gaussnet.errors import SchemaError

from conftest import NETWORKS, ROOT

TANDEM = str(NETWORKS / "tandem.json")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_rate_matches_golden_file(capsys):
    code, out, _ = run(capsys, "rate", "--node", "2", "--b", "1.0", TANDEM)
    assert code == 0
    assert out == (ROOT / "tests" / "golden" / "rate_tandem_node2.json").read_text()
    doc = json.loads(out)
    assert doc["schema"] == 1 and doc["active_case"] == "Boundary"
    assert doc["exponent"] == pytest.approx(1.0, abs=1e-9)


def test_outputs_are_byte_identical_and_reparse(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for dest in (a, b):
        assert run(capsys, "check", "--node", "2", "--b", "1", "--samples", "500", "--out", dest, TANDEM)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    io.validate_output(doc)
    assert doc["verdict"] == "TightThm1"


def test_missing_b_is_a_usage_error(capsys):
    code, out, err = run(capsys, "rate", "--node", "2", TANDEM)
    assert code == 1 and out == ""
    assert json.loads(err[err.index("{"):])["code"] == "usage"


def test_closed_form_rejects_antipersistent_inputs(capsys):
    code, _, err = run(capsys, "closed-form", "--node", "2", "--b", "1", NETWORKS / "tandem_h025.json")
    assert code == 1
    assert json.loads(err)["code"] == "hypothesis_violated"


def test_closed_form_output(capsys):
    code, out, _ = run(capsys, "closed-form", "--node", "2", "--b", "1", TANDEM)
    doc = json.loads(out)
    assert code == 0 and doc["condition_holds"] is True
    assert doc["optimal_t"] == [-1.0, -1.0] and doc["paths"] == [[1, 2], [2]]


def test_numerical_failure_exit_status(capsys, tmp_path):
    doc = json.loads((NETWORKS / "diamond.json").read_text())
    doc["rho"] = [[1, 1, 1, 0], [1, 1, -1, 0], [1, -1, 1, 0], [0, 0, 0, 1]]
    doc.pop("eta")
    for n in doc["nodes"]:
        n["hurst"] = 0.5
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, _, err = run(capsys, "simulate", "--node", "4", "--b", "1", "--reps", "10", "--scales", "1", bad)
    assert code == 2
    assert json.loads(err)["code"] == "not_psd"


def test_unknown_fields_are_rejected(tmp_path):
    doc = json.loads((NETWORKS / "tandem.json").read_text())
    doc["nodes"][0]["muu"] = 3.0
    with pytest.raises(SchemaError):
        io.load_network(doc)
    doc = json.loads((NETWORKS / "tandem.json").read_text())
    doc["extra"] = 1
    with pytest.raises(SchemaError):
        io.load_network(doc)


def test_schema_semantics(capsys, tmp_path):
    doc = json.loads((NETWORKS / "tandem.json").read_text())
    doc["edges"][0]["to"] = 9
    with pytest.raises(SchemaError):
        io.load_network(doc)
    doc = json.loads((NETWORKS / "tandem.json").read_text())
    doc["rho"] = [[1.0]]
    with pytest.raises(SchemaError):
        io.load_network(doc)
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    code, _, err = run(capsys, "rate", "--node", "1", "--b", "1", p)
    assert code == 1 and json.loads(err)["code"] == "schema"
    code, _, err = run(capsys, "rate", "--node", "7", "--b", "1", TANDEM)
    assert code == 1


def test_scientific_notation_accepted(capsys):
    code, out, _ = run(capsys, "closed-form", "--node", "1", "--b", "1e0", NETWORKS / "single_brownian.json")
    assert code == 0 and json.loads(out)["exponent"] == pytest.approx(2.0)


def test_unstable_network_exit(capsys, tmp_path):
    doc = json.loads((NETWORKS / "tandem.json").read_text())
    doc["nodes"][1]["mu"] = 1.0
    p = tmp_path / "u.json"
    p.write_text(json.dumps(doc))
    code, _, err = run(capsys, "rate", "--node", "2", "--b", "1", p)
    assert code == 1 and json.loads(err)["code"] == "unstable"


def test_path_csv(capsys):
    code, out, _ = run(capsys, "path", "--node", "2", "--b", "1", "--start", "-2", "--step", "0.5", TANDEM)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "time,f_1,f_2"
    last = lines[-1].split(",")
    assert float(last[0]) == 0.0 and float(last[1]) == 0.0 and float(last[2]) == 0.0
    assert len(lines) == 6


def test_simulate_writes_json_and_csv(capsys, tmp_path):
    out, csv = tmp_path / "sim.json", tmp_path / "sim.csv"
    code, _, _ = run(capsys, "simulate", "--node", "1", "--b", "0.5", "--scales", "1,2", "--reps", "400", "--seed", "5",
                     "--out", out, "--csv", csv, NETWORKS / "single_brownian.json")
    assert code == 0
    doc = json.loads(out.read_text())
    io.validate_output(doc)
    assert [s["n"] for s in doc["per_scale"]] == [1, 2]
    assert csv.read_text().splitlines()[0] == "n,count,trials,p_hat,ci_lo,ci_hi"


def test_verify_lemma_command(capsys):
    code, out, _ = run(capsys, "verify-lemma", "--node", "4", "--realizations", "3", NETWORKS / "diamond.json")
    doc = json.loads(out)
    assert code == 0 and doc["passed"] is True
    assert doc["max_relative_error"] < 1e-9
    assert len(doc["checks"]) == 3 * 50


def test_dumps_formatting():
    text = io.dumps({"a": 0.1, "b": float("inf"), "c": [1, 2.0], "d": True})
    assert '"a": 0.10000000000000001' in text
    assert '"b": null' in text and '"c": [1, 2.0]' in text
    assert json.loads(text)["a"] == 0.1
