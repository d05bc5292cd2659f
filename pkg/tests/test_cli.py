import json
from pathlib import Path

import numpy as np
import pytest

from symbreak.cli import main
from symbreak.io import file_sha256, write_matrix_csv
from symbreak.presets import PRESETS, get_preset
from symbreak.relu_loss import problem_from_config

DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def load(path):
    return json.loads(Path(path).read_text())


def check_manifest(root):
    m = load(root / "manifest.json")
    for a in m["artifacts"]:
        assert file_sha256(root / a["path"]) == a["sha256"]
    return m


# ----------------------------------------------------------------- analyze


def test_analyze_spurious_golden(tmp_path, capsys):
    code, out, _ = run(capsys, "analyze", DATA / "spurious_symbolic.csv", "--tol", "1e-6", "--out", tmp_path)
    assert code == 0
    res = json.loads(out)
    assert res["catalog_match"] == "ΔS_5 × ΔS_1" and res["isotropy_order"] == 120
    rep = load(tmp_path / "report.json")
    assert rep["isotropy_order"] == 120
    assert (tmp_path / "pattern.pgm").exists() and (tmp_path / "pattern.ppm").exists()
    m = check_manifest(tmp_path)
    assert m["inputs"][0]["sha256"] == file_sha256(DATA / "spurious_symbolic.csv")


def test_analyze_identity_and_random(tmp_path, capsys):
    write_matrix_csv(tmp_path / "I.csv", np.eye(4))
    write_matrix_csv(tmp_path / "R.csv", np.random.default_rng(0).standard_normal((4, 4)))
    _, out, _ = run(capsys, "analyze", tmp_path / "I.csv", "--out", tmp_path / "a")
    assert json.loads(out)["catalog_match"] == "ΔS_4"
    _, out, _ = run(capsys, "analyze", tmp_path / "R.csv", "--tol", "1e-9", "--out", tmp_path / "b")
    assert json.loads(out)["isotropy_order"] == 1


def test_analyze_is_byte_deterministic(tmp_path, capsys):
    for sub in ("x", "y"):
        run(capsys, "analyze", DATA / "spurious_d6.csv", "--tol", "1e-6", "--out", tmp_path / sub)
    for name in ("report.json", "pattern.pgm", "manifest.json"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()


def test_parse_error_json(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,oops\n")
    code, _, err = run(capsys, "analyze", bad, "--out", tmp_path / "o")
    assert code == 1
    e = json.loads(err)
    assert e["error"] == "CSVParseError" and e["line"] == 2


# ----------------------------------------------------------------- catalog


@pytest.mark.parametrize("d,dims", [(5, [2, 5, 6]), (2, [2])])
def test_catalog_dims(capsys, d, dims):
    code, out, _ = run(capsys, "catalog", d)
    assert code == 0
    assert sorted(e["fixed_subspace_dim"] for e in json.loads(out)["entries"]) == dims


def test_catalog_d6_wreath(capsys, tmp_path):
    _, out, _ = run(capsys, "catalog", 6, "--out", tmp_path)
    entries = json.loads(out)["entries"]
    wreath = [e for e in entries if "≀" in e["name"]]
    assert wreath and all(e["fixed_subspace_dim"] == 3 for e in wreath)
    check_manifest(tmp_path)


# ----------------------------------------------------------------- train


def test_train_identity_preset(tmp_path, capsys):
    code, out, _ = run(capsys, "train", "--preset", "identity-d6", "--seed", 1, "--steps", 200, "--no-refine",
                       "--out", tmp_path)
    assert code == 0
    assert len(list(tmp_path.glob("run_*.csv"))) == 20 and len(list(tmp_path.glob("run_*.pgm"))) == 20
    s = load(tmp_path / "summary.json")
    assert s["runs"] == 20 and len(s["per_run"]) == 20
    assert (tmp_path / "isotropy_counts.csv").read_text().startswith("catalog_match,all_runs,non_global_runs\n")
    check_manifest(tmp_path)
    assert json.loads(out)["runs"] == 20


def test_train_deterministic(tmp_path, capsys):
    for sub in ("a", "b"):
        run(capsys, "train", "--preset", "identity-d6", "--runs", 2, "--steps", 100, "--seed", 3,
            "--out", tmp_path / sub)
    assert (tmp_path / "a/summary.json").read_bytes() == (tmp_path / "b/summary.json").read_bytes()
    assert (tmp_path / "a/run_001.csv").read_bytes() == (tmp_path / "b/run_001.csv").read_bytes()


def test_train_uniform_shift_sweep(tmp_path, capsys):
    code, out, _ = run(capsys, "train", "--preset", "uniform-shift", "--runs", 2, "--steps", 100, "--no-refine",
                       "--out", tmp_path)
    assert code == 0
    res = json.loads(out)
    assert sorted(res) == ["C=0", "C=0.25", "C=0.5", "C=0.75", "C=1"]
    for C in ("0", "0.25", "0.5", "0.75", "1"):
        s = load(tmp_path / f"C{C}" / "summary.json")
        assert s["problem"]["distribution"]["lo"] == -1 + float(C)


def test_train_deep_preset_layer_outputs(tmp_path, capsys):
    code, _, _ = run(capsys, "train", "--preset", "deep-4", "--runs", 1, "--steps", 50, "--out", tmp_path)
    assert code == 0
    for li in (1, 2, 3):
        assert (tmp_path / f"run_000_layer{li}.pgm").exists()
    assert (tmp_path / "run_000_layer4.csv").exists()
    s = load(tmp_path / "summary.json")
    assert "isotropy_order" in s["per_run"][0]


def test_train_problem_json(tmp_path, capsys):
    write_matrix_csv(tmp_path / "V.csv", np.eye(3))
    cfg = {"student": {"dims": [3, 3]}, "teacher": {"matrix": "V.csv"}, "distribution": {"kind": "gaussian"}}
    (tmp_path / "p.json").write_text(json.dumps(cfg))
    code, _, _ = run(capsys, "train", "--problem", tmp_path / "p.json", "--runs", 1, "--steps", 50,
                     "--out", tmp_path / "o")
    assert code == 0
    m = check_manifest(tmp_path / "o")
    assert len(m["inputs"]) == 1


def test_train_needs_source(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--out", tmp_path)
    assert code == 1 and json.loads(err)["error"] == "CLIError"


# ----------------------------------------------------------------- eta and conserve


@pytest.mark.parametrize("n", [2, 3, 4])
def test_eta_command(tmp_path, capsys, n):
    code, out, _ = run(capsys, "eta", "--n", n, "--out", tmp_path)
    assert code == 0
    s = json.loads(out)
    assert s["total"] == 3 ** n and s["extremality"]["min"] == 2 ** n and s["extremality"]["max"] == 1
    lines = (tmp_path / "critical_points.csv").read_text().splitlines()
    assert len(lines) == 3 ** n + 1


def test_conserve_command(tmp_path, capsys):
    cfg = {"student": {"dims": [4, 4, 1], "second_layer_fixed": False}, "teacher": "identity",
           "distribution": {"kind": "gaussian"}}
    (tmp_path / "p.json").write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "conserve", "--problem", tmp_path / "p.json", "--quantity", "scalar:1,2",
                       "--step", "0.01", "--steps", 100, "--out", tmp_path / "o")
    assert code == 0
    v = json.loads(out)
    assert v["first_order"] and v["ratio"] <= 0.6
    assert (tmp_path / "o/drift.csv").read_text().count("\n") == 102


def test_conserve_linear_matrix(tmp_path, capsys):
    cfg = {"student": {"dims": [3, 3, 3, 1], "activation": "linear", "second_layer_fixed": False},
           "teacher": "identity", "distribution": {"kind": "gaussian"}}
    (tmp_path / "p.json").write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "conserve", "--problem", tmp_path / "p.json", "--quantity", "matrix:1",
                       "--steps", 50, "--out", tmp_path / "o")
    assert code == 0 and json.loads(out)["first_order"]


def test_conserve_errors(tmp_path, capsys):
    code, _, err = run(capsys, "conserve", "--preset", "identity-d6", "--out", tmp_path)
    assert code == 1 and "trainable" in json.loads(err)["message"]
    code, _, err = run(capsys, "conserve", "--preset", "deep-4", "--quantity", "scalar:1", "--out", tmp_path)
    assert code == 1 and "bad quantity" in json.loads(err)["message"]


# ----------------------------------------------------------------- report and presets


def test_report_detects_tampering(tmp_path, capsys):
    run(capsys, "eta", "--n", 2, "--out", tmp_path)
    code, out, _ = run(capsys, "report", tmp_path)
    assert code == 0 and "all hashes match" in out and "9 critical points" in out
    (tmp_path / "critical_points.csv").write_text("tampered\n")
    _, out, _ = run(capsys, "report", tmp_path)
    assert "modified: critical_points.csv" in out
    code, _, _ = run(capsys, "report", tmp_path / "missing")
    assert code == 1


def test_every_preset_builds():
    for name, pr in PRESETS.items():
        p = problem_from_config(pr.problem)
        assert p.student.input_dim == pr.problem["student"]["dims"][0]
        assert pr.to_json()["name"] == name
    assert not get_preset("identity-d20").in_ci
    with pytest.raises(KeyError):
        get_preset("nope")
