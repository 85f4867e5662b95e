import json
import os
import subprocess
import sys

import pytest

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "fixtures")


def run_cli(*args):
    proc = subprocess.run([sys.executable, "-m", "semistab.cli", *args],
                          capture_output=True, text=True)
    return proc


def fx(name):
    return os.path.join(FIXTURES, name)


def test_gitnorm_two_squares(tmp_path):
    out = tmp_path / "r.json"
    proc = run_cli("gitnorm", "--input", fx("t2.json"), "--sigma", "1",
                   "--restarts", "8", "--out", str(out))
    assert proc.returncode == 0
    assert "2.000000" in proc.stdout
    report = json.loads(out.read_text())
    assert abs(report["value"] - 2.0) < 1e-9


def test_blockdecomp_verify_intro(tmp_path):
    proc = run_cli("blockdecomp", "--verify", fx("intro.json"))
    assert proc.returncode == 0
    assert "PASS" in proc.stdout
    assert "0 1 1" in proc.stdout and "0 2 3" in proc.stdout


def test_blockdecomp_eliminate_m61(tmp_path):
    out = tmp_path / "d.json"
    proc = run_cli("blockdecomp", "--input", fx("m61.json"), "--out", str(out))
    assert proc.returncode == 0
    report = json.loads(out.read_text())
    assert report["decomposition"]["D"] == [[0, 1, 2], [0, 1, 3]]
    assert report["verified"]


def test_radon_exponents():
    proc = run_cli("radon", "--exponents", "--n", "3", "--n1", "3", "--k", "2")
    assert proc.returncode == 0
    assert "5/3" in proc.stdout


def test_radon_balanced():
    proc = run_cli("radon", "--balanced", fx("balanced_parabola.json"))
    assert proc.returncode == 0
    assert "3/2" in proc.stdout and "3" in proc.stdout


def test_polytope_and_destabilize():
    proc = run_cli("polytope", "--input", fx("t2.json"), "--sigma", "1")
    assert proc.returncode == 0 and "True" in proc.stdout
    proc = run_cli("destabilize", "--input", fx("p63_degree1.json"),
                   "--sigma", "0", "--sigma-uniform")
    assert proc.returncode == 0 and "margin" in proc.stdout
    proc = run_cli("destabilize", "--input", fx("t2.json"), "--sigma", "1")
    assert proc.returncode == 0 and "none" in proc.stdout


def test_plan_61(tmp_path):
    out = tmp_path / "p.json"
    proc = run_cli("plan", "--input", fx("plan61.json"), "--out", str(out))
    assert proc.returncode == 0
    assert "9/13" in proc.stdout
    report = json.loads(out.read_text())
    assert report["tau"] == {"num": 9, "den": 13}


def test_tiles_61():
    proc = run_cli("tiles", "--input", fx("m61_decomp.json"))
    assert proc.returncode == 0
    assert "(0, 1)" in proc.stdout


def test_hsnorm():
    proc = run_cli("hsnorm", "--input", fx("t2.json"))
    assert proc.returncode == 0
    assert "2.0" in proc.stdout


def test_sublevel_line(tmp_path):
    out = tmp_path / "s.json"
    proc = run_cli("sublevel", "--input", fx("sublevel_line.json"),
                   "--samples", "20000", "--omegas", "2", "--seed", "9",
                   "--out", str(out))
    assert proc.returncode == 0
    report = json.loads(out.read_text())
    assert len(report["omegas"]) == 2
    assert report["max_estimate"] > 0


def test_semistable_tensor(tmp_path):
    path = tmp_path / "q.json"
    path.write_text(json.dumps(
        {"tensor": [[[{"num": 1, "den": 1}]]]}))
    proc = run_cli("semistable", "--input", str(path))
    assert proc.returncode == 0
    assert "positive" in proc.stdout


def test_exit_code_input_error(tmp_path):
    proc = run_cli("gitnorm", "--input", "/nonexistent.json", "--sigma", "1")
    assert proc.returncode == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    proc = run_cli("gitnorm", "--input", str(bad), "--sigma", "1")
    assert proc.returncode == 1
    assert "error" in proc.stderr


def test_unknown_verb_rejected():
    proc = run_cli("frobnicate")
    assert proc.returncode == 1


def test_byte_identical_reports(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        run_cli("sublevel", "--input", fx("sublevel_line.json"),
                "--samples", "5000", "--omegas", "1", "--seed", "4",
                "--out", str(out))
    assert a.read_bytes() == b.read_bytes()


def test_fixture_roundtrips():
    # every polynomial-matrix fixture survives parse -> serialize -> parse
    from semistab.polycore import polymatrix_from_json, polymatrix_to_json

    for name in os.listdir(FIXTURES):
        with open(fx(name)) as fh:
            obj = json.load(fh)
        candidates = []
        if "entries" in obj:
            candidates.append(obj)
        if "matrix" in obj:
            candidates.append(obj["matrix"])
        for cand in candidates:
            M = polymatrix_from_json(cand)
            again = polymatrix_from_json(polymatrix_to_json(M))
            assert again == M


def test_sublevel_stratified_flag(tmp_path):
    out = tmp_path / "s.json"
    proc = run_cli("sublevel", "--input", fx("sublevel_line.json"),
                   "--samples", "20000", "--omegas", "1", "--seed", "3",
                   "--stratified", "--out", str(out))
    assert proc.returncode == 0
    report = json.loads(out.read_text())
    assert report["omegas"][0]["estimate"] > 0
