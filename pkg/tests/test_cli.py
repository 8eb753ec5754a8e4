import json
import subprocess
import sys

import numpy as np
import pytest

from arnav.cli import main
from arnav.synthetic import generate_sphere_cloud


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    pts = generate_sphere_cloud((1, 2, 3), 6.0, 150, "cap", cap_deg=80, noise_sd=0.2, seed=1)
    (d / "verts.txt").write_text("".join(f"{x!r} {y!r} {z!r}\n" for x, y, z in pts.tolist()))
    (d / "src.csv").write_text("A,0,0,0\nB,10,0,0\nC,0,10,0\nD,0,0,10\n")
    (d / "dst.csv").write_text("A,1,0,0\nB,1,10,0\nC,-9,0,0\nD,1,0,10\nE,5,5,5\n")
    for kind, seed in (("physical_feedback", 1), ("holographic_feedback", 2)):
        assert main(["simulate", "--kind", kind, "--seed", str(seed), "--window", "10", "--user-sd", "1",
                     "--displacement", "0,0,-5", "--outdir", str(d / kind)]) == 0
        assert main(["assess", "--frames", str(d / kind / "frames.csv"), "--scene", str(d / kind / "scene.json"),
                     "--annotations", str(d / kind / "annotations.json"), "--out", str(d / f"{kind}.json")]) == 0
    return d


def test_ztest_scalars(capsys):
    code, out, _ = run(capsys, "ztest", 6.98, 3.04, 48, 11.99, 2.99, 48)
    assert code == 0
    doc = json.loads(out)
    assert 8.0 <= doc["z"] <= 8.3 and doc["p_two_sided"] < 0.001


def test_ztest_needs_six(capsys):
    assert run(capsys, "ztest", 1, 2, 3)[0] == 1


def test_ztest_zero_variance_is_numerical(capsys):
    assert run(capsys, "ztest", 1, 0, 10, 2, 0, 10)[0] == 3


def test_ztest_from_reports(capsys, workspace):
    for kind in ("physical_feedback", "holographic_feedback"):
        run(capsys, "report", workspace / f"{kind}.json", "--out", workspace / f"rep_{kind}.json")
    code, out, _ = run(capsys, "ztest", "--reports", workspace / "rep_physical_feedback.json",
                       workspace / "rep_holographic_feedback.json", "--basis", "pooled")
    assert code == 0
    assert json.loads(out)["compared"] == ["physical_feedback", "holographic_feedback"]


def test_fit_sphere(capsys, workspace):
    code, out, _ = run(capsys, "fit-sphere", workspace / "verts.txt")
    doc = json.loads(out)
    assert code == 0
    np.testing.assert_allclose(doc["fit"]["center"], [1, 2, 3], atol=0.2)
    assert "algebraic" in doc and "refined" in doc


def test_fit_sphere_degenerate_exit_3(capsys, tmp_path):
    (tmp_path / "flat.txt").write_text("0 0 0\n1 0 0\n0 1 0\n1 1 0\n2 3 0\n")
    assert run(capsys, "fit-sphere", tmp_path / "flat.txt")[0] == 3


def test_register(capsys, workspace):
    code, out, _ = run(capsys, "register", workspace / "src.csv", workspace / "dst.csv")
    doc = json.loads(out)
    assert code == 0
    assert doc["fre_mean"] < 1e-9
    assert doc["unmatched_target"] == ["E"]


def test_register_collinear_exit_3(capsys, tmp_path):
    (tmp_path / "a.csv").write_text("A,0,0,0\nB,1,1,1\nC,2,2,2\n")
    assert run(capsys, "register", tmp_path / "a.csv", tmp_path / "a.csv")[0] == 3


def test_missing_file_exit_2(capsys, tmp_path):
    assert run(capsys, "fit-sphere", tmp_path / "nope.txt")[0] == 2


def test_parse_error_exit_2(capsys, tmp_path):
    (tmp_path / "f.csv").write_text("frame,time,label,x,y,z\n0,0,A,1,2\n")
    assert run(capsys, "stability", tmp_path / "f.csv", "--strict")[0] == 2


def test_schema_error_is_validation_failure(capsys, caplog, tmp_path, workspace):
    scene = json.loads((workspace / "physical_feedback" / "scene.json").read_text())
    del scene["probe"]["markers"]["T1"]
    (tmp_path / "s.json").write_text(json.dumps(scene))
    code, _, _ = run(capsys, "simulate", "--scene", tmp_path / "s.json", "--kind", "no_feedback",
                       "--outdir", tmp_path / "o")
    assert code == 1
    assert "/probe/markers" in caplog.text


def test_assess_matches_ledger(workspace):
    doc = json.loads((workspace / "physical_feedback.json").read_text())
    ledger = json.loads((workspace / "physical_feedback" / "ledger.json").read_text())
    trial = doc["trial"]
    se = trial["error_sd"] / np.sqrt(trial["n_fiducials"])
    assert abs(trial["error_mean"] - ledger["true_error_mean"]) < 3 * se
    assert set(doc["inputs"]) == {"frames", "scene", "annotations"}


def test_report_table(capsys, workspace):
    code, out, _ = run(capsys, "report", workspace / "physical_feedback.json",
                       workspace / "holographic_feedback.json", "--format", "table")
    assert code == 0
    assert "Physical feedback" in out and "Z-test physical_feedback vs holographic_feedback" in out


def test_stability(capsys, workspace):
    code, out, _ = run(capsys, "stability", workspace / "physical_feedback" / "frames.csv",
                       "--static", "M1,M2", "--body", "M1,M2,M3")
    doc = json.loads(out)["stability"]
    assert code == 0
    assert len(doc["per_marker_sd"]) == 2 and len(doc["pairwise"]) == 3
    assert doc["max_marker_axis_sd"] < 0.5


def test_drift_sim_cancels(capsys, tmp_path):
    code, out, _ = run(capsys, "drift-sim", "--steps", 200, "--every", 20, "--seed", 3,
                       "--trace", tmp_path / "t.jsonl", "--out", tmp_path / "d.csv")
    doc = json.loads(out)
    assert code == 0
    assert doc["max_translation_at_detection_mm"] <= 1e-9
    code, out2, _ = run(capsys, "drift-sim", "--replay", tmp_path / "t.jsonl")
    assert json.loads(out2) == doc


def test_log_env_does_not_change_output(tmp_path):
    cmd = [sys.executable, "-m", "arnav", "ztest", "1", "1", "10", "2", "1", "10"]
    quiet = subprocess.run(cmd, capture_output=True, env={"ARNAV_LOG": "ERROR", "PATH": ""}, check=True)
    loud = subprocess.run(cmd, capture_output=True, env={"ARNAV_LOG": "DEBUG", "PATH": ""}, check=True)
    bogus = subprocess.run(cmd, capture_output=True, env={"ARNAV_LOG": "chatty", "PATH": ""}, check=True)
    assert quiet.stdout == loud.stdout == bogus.stdout


def _snapshot(capsys, argv, files):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    return out, [f.read_bytes() for f in files]


@pytest.mark.parametrize(
    "name",
    ["fit-sphere", "register", "assess", "stability", "ztest", "drift-sim", "simulate", "report"],
)
def test_subcommand_byte_deterministic(capsys, workspace, tmp_path, name):
    w = workspace
    phys = w / "physical_feedback"
    cases = {
        "fit-sphere": (["fit-sphere", w / "verts.txt"], []),
        "register": (["register", w / "src.csv", w / "dst.csv"], []),
        "assess": (["assess", "--frames", phys / "frames.csv", "--scene", phys / "scene.json",
                    "--annotations", phys / "annotations.json"], []),
        "stability": (["stability", phys / "frames.csv", "--body", "M1,M2,M3"], []),
        "ztest": (["ztest", 11.99, 2.99, 48, 12.75, 2.94, 48], []),
        "drift-sim": (["drift-sim", "--steps", 300, "--every", 25, "--anchor-noise", 0.2, "--seed", 5,
                       "--trace", tmp_path / "t.jsonl", "--out", tmp_path / "d.csv"],
                      [tmp_path / "t.jsonl", tmp_path / "d.csv"]),
        "simulate": (["simulate", "--kind", "no_feedback", "--seed", 8, "--window", 5, "--outdir", tmp_path / "s"],
                     [tmp_path / "s" / n for n in ("frames.csv", "scene.json", "annotations.json", "ledger.json")]),
        "report": (["report", w / "physical_feedback.json", w / "holographic_feedback.json"], []),
    }
    argv, files = cases[name]
    first = _snapshot(capsys, argv, files)
    second = _snapshot(capsys, argv, files)
    assert first == second
    assert first[0] or first[1]
