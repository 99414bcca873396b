import json
import subprocess
import sys

import pytest

from ffmarkov.cli import bundled
from ffmarkov.fiber import CAP_ENV

TABLE2 = ["1  0 0 0 0", "2  0 1 1 2", "3  0 2 2 1", "4  1 0 1 1", "5  1 1 2 0",
          "6  1 2 0 2", "7  2 0 2 2", "8  2 1 0 1", "9  2 2 1 0"]


def test_bundled_fixtures():
    assert {"3_4-1.txt", "3_4-2.txt", "2_7-3.txt", "3_5-2a.txt", "3_5-2b.txt"} <= set(bundled("designs"))
    assert len([m for m in bundled("models") if m.startswith("3_")]) == 19
    assert {"wave_solder.csv", "toy_3_3-1.csv", "toy6_3_3-1.csv"} <= set(bundled("counts"))


def test_design_aliases(run_cli):
    code, out, _ = run_cli("design", "--spec", "3_4-1", "--aliases")
    assert code == 0
    assert "I = ABCD^2" in out
    assert "A = BCD^2 = AB^2C^2D" in out
    assert "AD^2 = BC = AB^2C^2D^2" in out
    assert "clear two-factor interactions: none" in out


def test_design_table2(run_cli):
    code, out, _ = run_cli("design", "--spec", "3_4-2", "--runs-only")
    assert code == 0
    rows = [line.strip() for line in out.splitlines()[1:] if line.strip()]
    assert [" ".join(r.split()) for r in rows] == [" ".join(r.split()) for r in TABLE2]


def test_design_table1_csv(run_cli):
    code, out, _ = run_cli("--output", "csv", "design", "--spec", "2_7-3", "--runs-only")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "run,A,B,C,D,E,F,G"
    assert lines[2] == "2,0,0,0,1,1,1,1"
    assert len(lines) == 17


def test_matrix_json(run_cli):
    code, out, _ = run_cli("--output", "json", "matrix", "--spec", "3_3-1", "--model", "main: all")
    data = json.loads(out)
    assert code == 0
    assert len(data["X"]) == 9 and len(data["columns"]) == 7
    assert data["manifest"]["command"] == "matrix"


def test_basis_census_and_certify(run_cli):
    code, out, _ = run_cli("basis", "--spec", "3_4-1", "--model", "3_4-1/main", "--classify", "--certify", "4")
    assert code == 0
    assert "degree 2: 54 (0 indispensable)" in out
    assert "degree 3: 24 (0 indispensable)" in out
    assert "certified:" in out


def test_basis_unique_minimal(run_cli):
    code, out, _ = run_cli("--output", "json", "basis", "--spec", "3_5-2b", "--model", "3_5-2b/main_AxC",
                           "--classify")
    data = json.loads(out)
    assert code == 0
    assert data["census"] == {"2": [27, 27]}
    assert all(m["indispensable"] for m in data["moves"])


def test_confounded_model(run_cli):
    code, _, err = run_cli("basis", "--spec", "3_4-1", "--model", "main: all; interactions: AxB, CxD")
    assert code == 2
    assert "AB confounded with CD^2" in err


def test_missing_inputs(run_cli, tmp_path):
    code, _, err = run_cli("test", "--spec", "3_3-1", "--model", "3_3-1/main", "--data", tmp_path / "nope.csv")
    assert code == 2 and "not found" in err
    code, _, _ = run_cli("design", "--spec", tmp_path / "nope.txt")
    assert code == 2


def test_bad_counts(run_cli, tmp_path):
    short = tmp_path / "short.csv"
    short.write_text("1\n2\n3\n")
    code, _, err = run_cli("test", "--spec", "3_3-1", "--model", "3_3-1/main", "--data", short, "--exact")
    assert code == 2 and "9 runs" in err


def test_exact_toy(run_cli):
    code, out, _ = run_cli("test", "--spec", "3_3-1", "--model", "3_3-1/main", "--data", "toy6_3_3-1", "--exact")
    assert code == 0
    assert "exact 5/11" in out
    code, out, _ = run_cli("--output", "json", "test", "--spec", "3_3-1", "--model", "3_3-1/main",
                           "--data", "toy_3_3-1", "--exact", "--stat", "deviance")
    assert json.loads(out)["result"]["p_exact"] == "55/127"


def test_wave_solder_json_reproducible(run_cli, tmp_path):
    argv = ["--output", "json", "--seed", "3", "test", "--spec", "2_7-3", "--model", "2_7-3/main",
            "--data", "wave_solder", "--steps", "20000", "--burn-in", "2000"]
    code, first, _ = run_cli(*argv)
    assert code == 0
    code, second, _ = run_cli(*argv)
    assert first == second
    data = json.loads(first)
    assert data["manifest"]["seed"] == 3
    assert data["manifest"]["data"] == "wave_solder"
    assert data["result"]["observed"] > 0
    assert 0 <= data["result"]["p_value"] <= 1
    assert data["sufficient_statistic"][0] == 1417


def test_trace_file(run_cli, tmp_path):
    trace = tmp_path / "trace.txt"
    code, _, _ = run_cli("test", "--spec", "3_3-1", "--model", "3_3-1/main", "--data", "toy_3_3-1",
                         "--steps", "3000", "--burn-in", "1000", "--thin", "4", "--trace", trace)
    assert code == 0
    values = [float(v) for v in trace.read_text().split()]
    assert len(values) == 500


def test_basis_files_and_reuse(run_cli, tmp_path):
    out = tmp_path / "b"
    code, _, _ = run_cli("basis", "--spec", "3_3-1", "--model", "3_3-1/main", "--minimal", "--certify",
                         "--out", out)
    assert code == 0
    assert len((out / "basis.txt").read_text().splitlines()) == 2
    data = json.loads((out / "basis.json").read_text())
    assert data["minimal"] and data["census"] == {"3": [2, 0]}
    code, text, _ = run_cli("--output", "json", "fiber", "--spec", "3_3-1", "--model", "3_3-1/main",
                            "--data", "toy_3_3-1", "--edges", "--basis", out / "basis.json")
    assert code == 0
    fiber = json.loads(text)
    assert len(fiber["points"]) == 6
    assert fiber["connected"] and len(fiber["edges"]) >= 5


def test_certification_failure_writes_nothing(run_cli, tmp_path):
    good = tmp_path / "good"
    assert run_cli("basis", "--spec", "3_3-1", "--model", "3_3-1/main", "--minimal", "--out", good)[0] == 0
    data = json.loads((good / "basis.json").read_text())
    data["moves"] = data["moves"][:1]
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(data))
    out = tmp_path / "out"
    code, _, err = run_cli("basis", "--spec", "3_3-1", "--model", "3_3-1/main", "--basis", broken,
                           "--certify", "3", "--out", out)
    assert code == 3
    assert "disconnected" in err
    assert not out.exists()


def test_basis_for_other_matrix_rejected(run_cli, tmp_path):
    out = tmp_path / "b"
    run_cli("basis", "--spec", "3_3-1", "--model", "3_3-1/main", "--out", out)
    code, _, err = run_cli("basis", "--spec", "3_4-1", "--model", "3_4-1/main", "--basis", out / "basis.json")
    assert code == 2 and "different covariate matrix" in err


def test_fiber_cap_is_numeric_failure(run_cli, monkeypatch):
    monkeypatch.setenv(CAP_ENV, "2")
    code, _, err = run_cli("fiber", "--spec", "3_3-1", "--model", "3_3-1/main", "--data", "toy_3_3-1")
    assert code == 4 and "cap of 2" in err


def test_chain_without_moves_is_numeric_failure(run_cli, tmp_path):
    out = tmp_path / "b"
    run_cli("basis", "--spec", "3_3-1", "--model", "3_3-1/main", "--out", out)
    data = json.loads((out / "basis.json").read_text())
    data["moves"] = []
    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps(data))
    code, _, err = run_cli("test", "--spec", "3_3-1", "--model", "3_3-1/main", "--data", "toy_3_3-1",
                           "--basis", empty, "--steps", "200", "--burn-in", "10")
    assert code == 4 and "cannot mix" in err


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "ffmarkov.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip().startswith("ffmarkov")


@pytest.mark.parametrize("argv", [["design"], ["basis", "--spec", "3_3-1"], ["nope"]])
def test_usage_errors(argv, run_cli):
    with pytest.raises(SystemExit) as exc:
        run_cli(*argv)
    assert exc.value.code == 2


def test_global_flags_after_subcommand(run_cli):
    code, out, _ = run_cli("test", "--spec", "3_3-1", "--model", "3_3-1/main", "--data", "toy_3_3-1",
                           "--exact", "--seed", "4", "--output", "json")
    assert code == 0
    assert json.loads(out)["manifest"]["seed"] == 4
