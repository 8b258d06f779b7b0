import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from damlab.cli import main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

QUICK = """
[model]
name = gad
theta = 0.3
observable = excited

[apparatus]
sigma = 0.1
q_points = 512

[run]
t = {t}
n = 1
trials = 200
seed = 99
{extra}
"""


def write_cfg(tmp_path, text, name="scn.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def read_csv(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    return [dict(zip(header, l.split(","))) for l in lines[1:]]


def test_steady_outputs_match_model(tmp_path, capsys):
    code, out, _ = run_cli(
        capsys, "steady", "--config", CONFIG_DIR / "verify.ini", "--out", tmp_path
    )
    assert code == 0
    assert "dissipative gap: 0.5" in out
    rows = read_csv(tmp_path / "steady.csv")
    cell = {(r["quantity"], r["i"], r["j"]): float(r["value"]) for r in rows}
    assert cell[("rho_re", "0", "0")] == pytest.approx(0.3, abs=1e-12)
    assert cell[("rho_re", "1", "1")] == pytest.approx(0.7, abs=1e-12)
    assert cell[("gap", "", "")] == pytest.approx(0.5, abs=1e-10)
    assert cell[("backaction_re[excited]", "", "")] == pytest.approx(-0.21, abs=1e-10)


def test_steady_json_payload(tmp_path, capsys):
    code, out, _ = run_cli(
        capsys, "steady", "--config", CONFIG_DIR / "verify.ini", "--out", tmp_path,
        "--json",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["gap"] == pytest.approx(0.5)
    assert payload["rho_diag"] == pytest.approx([0.3, 0.7])


def test_dam_distribution_csv_and_svg(tmp_path, capsys):
    cfg = write_cfg(tmp_path, QUICK.format(t=300, extra=""))
    code, out, _ = run_cli(
        capsys, "dam-distribution", "--config", cfg, "--out", tmp_path / "o"
    )
    assert code == 0
    rows = read_csv(tmp_path / "o" / "dam_distribution.csv")
    assert set(rows[0]) == {"q", "pr_exact", "pr_pert", "pr_ideal",
                           "dev_exact_ideal"}
    assert len(rows) == 512
    svg = (tmp_path / "o" / "dam_distribution.svg").read_text()
    assert svg.startswith("<svg ")
    assert "scenario sha256" in svg
    assert "N&lt;A&gt;" in svg


def test_dam_distribution_rerun_is_byte_identical(tmp_path, capsys):
    cfg = write_cfg(tmp_path, QUICK.format(t=300, extra=""))
    blobs = []
    for sub in ("a", "b"):
        code, _, _ = run_cli(
            capsys, "dam-distribution", "--config", cfg, "--out", tmp_path / sub
        )
        assert code == 0
        blobs.append((tmp_path / sub / "dam_distribution.csv").read_bytes())
    assert blobs[0] == blobs[1]


def test_dam_distribution_deviation_shrinks_with_t(tmp_path, capsys):
    l1 = {}
    for t in (60, 600):
        cfg = write_cfg(tmp_path, QUICK.format(t=t, extra=""), name=f"s{t}.ini")
        code, out, _ = run_cli(
            capsys, "dam-distribution", "--config", cfg,
            "--out", tmp_path / f"o{t}", "--json",
        )
        assert code == 0
        l1[t] = json.loads(out)["l1_exact_vs_ideal"]
    assert l1[600] < 0.2 * l1[60]


def test_scaling_command_emits_all_series(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        QUICK.format(t=2000, extra="[sweep]\naxis = N\nvalues = 1, 4, 16\n")
        .replace("theta = 0.3", "theta = 0.5")
        .replace("sigma = 0.1", "sigma = 0.12"),
    )
    code, out, _ = run_cli(
        capsys, "scaling", "--config", cfg, "--out", tmp_path / "o", "--json"
    )
    assert code == 0
    payload = json.loads(out)
    assert "dam_empirical" in payload["slopes"]
    rows = read_csv(tmp_path / "o" / "scaling.csv")
    assert {r["series"] for r in rows} == {"dam", "povm", "ideal"}
    assert (tmp_path / "o" / "scaling.svg").exists()


def test_nonadiabaticity_command(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        QUICK.format(t=100, extra="[sweep]\naxis = T\nvalues = 50, 100\n")
        .replace("sigma = 0.1", "sigma = 0.2"),
    )
    code, _, _ = run_cli(
        capsys, "nonadiabaticity", "--config", cfg, "--out", tmp_path / "o"
    )
    assert code == 0
    rows = read_csv(tmp_path / "o" / "nonadiabaticity.csv")
    deltas = [float(r["delta"]) for r in rows]
    assert 0.35 < deltas[1] / deltas[0] < 0.7


def test_qfi_bound_command(tmp_path, capsys):
    code, _, _ = run_cli(
        capsys, "qfi-bound", "--config", CONFIG_DIR / "verify.ini",
        "--out", tmp_path,
    )
    assert code == 0
    rows = read_csv(tmp_path / "qfi_bound.csv")
    assert len(rows) == 25
    assert all(r["flagged"] == "no" for r in rows)
    assert all(float(r["margin"]) >= -1e-4 for r in rows)


def test_verify_subset_passes_and_reports(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path, QUICK.format(t=200, extra="[verify]\nchecks = 1, 2, 8\n")
    )
    code, out, _ = run_cli(
        capsys, "verify", "--config", cfg, "--out", tmp_path / "o"
    )
    assert code == 0
    assert "all 3 checks passed" in out
    rows = read_csv(tmp_path / "o" / "verify_report.csv")
    assert all(r["passed"] == "yes" for r in rows)
    # runtime metrics stay volatile: nan in the CSV, real numbers in the JSON
    runtime_rows = [r for r in rows if r["metric"] == "runtime_s"]
    assert runtime_rows and all(r["value"] == "nan" for r in runtime_rows)


def test_verify_json_one_object_per_check(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path, QUICK.format(t=200, extra="[verify]\nchecks = 2, 3\n")
    )
    code, out, _ = run_cli(
        capsys, "verify", "--config", cfg, "--out", tmp_path / "o", "--json"
    )
    assert code == 0
    payload = json.loads(out)
    assert [obj["check"] for obj in payload] == [2, 3]
    for obj in payload:
        assert obj["passed"] is True
        assert obj["runtime_s"] >= 0.0
        assert obj["metrics"]


def test_verify_tampered_anchor_fails_by_name(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        QUICK.format(
            t=200,
            extra="[verify]\nchecks = 5\nnonadiabatic_t_long = 5\n",
        ),
    )
    code, out, _ = run_cli(
        capsys, "verify", "--config", cfg, "--out", tmp_path / "o"
    )
    assert code == 1
    assert "FAILED: nonadiabaticity-scaling" in out
    rows = read_csv(tmp_path / "o" / "verify_report.csv")
    assert any(r["passed"] == "no" for r in rows)


def test_verify_report_identical_across_worker_counts(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path, QUICK.format(t=200, extra="[verify]\nchecks = 4, 5\n")
        .replace("sigma = 0.1", "sigma = 0.2"),
    )
    blobs = []
    for k, workers in enumerate(("1", "2")):
        code, _, _ = run_cli(
            capsys, "verify", "--config", cfg, "--out", tmp_path / f"o{k}",
            "--workers", workers,
        )
        assert code == 0
        blobs.append((tmp_path / f"o{k}" / "verify_report.csv").read_bytes())
    assert blobs[0] == blobs[1]


def test_configuration_errors_exit_2(tmp_path, capsys):
    # theta outside the domain
    cfg = write_cfg(tmp_path, QUICK.format(t=200, extra="").replace(
        "theta = 0.3", "theta = 1.5"))
    code, _, err = run_cli(capsys, "steady", "--config", cfg, "--out", tmp_path)
    assert code == 2 and "outside the model domain" in err

    # scaling without a sweep section
    cfg = write_cfg(tmp_path, QUICK.format(t=200, extra=""), name="nosweep.ini")
    code, _, err = run_cli(capsys, "scaling", "--config", cfg, "--out", tmp_path)
    assert code == 2 and "no [sweep] section" in err

    # unknown verify key
    cfg = write_cfg(
        tmp_path, QUICK.format(t=200, extra="[verify]\nbogus_knob = 1\n"),
        name="bogus.ini",
    )
    code, _, err = run_cli(capsys, "verify", "--config", cfg, "--out", tmp_path)
    assert code == 2 and "unknown [verify] key" in err

    # unreadable model file
    cfg = write_cfg(
        tmp_path,
        QUICK.format(t=200, extra="").replace("name = gad", "file = nope.json"),
        name="missing.ini",
    )
    code, _, err = run_cli(capsys, "steady", "--config", cfg, "--out", tmp_path)
    assert code == 2 and "nope.json" in err


def test_module_entry_point_runs():
    out = subprocess.run(
        [sys.executable, "-m", "damlab.cli", "steady",
         "--config", str(CONFIG_DIR / "verify.ini"), "--out", "/tmp/damlab_cli_smoke"],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0
    assert "dissipative gap" in out.stdout


def test_console_script_installed():
    exe = shutil.which("damlab")
    if exe is None:
        pytest.skip("damlab script not on PATH")
    out = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "verify" in out.stdout
