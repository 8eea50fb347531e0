"""CLI orchestration tests: exit codes, error JSON, artifacts, determinism."""

import json
import subprocess
import sys

import pytest

from pvramp.cli import emit_plot_data, main

DEMO_CONFIG = "demo:scenario_demo.json"


def run_cli(args, cwd=None):
    proc = subprocess.run(
        [sys.executable, "-m", "pvramp"] + args,
        capture_output=True,
        text=True,
        cwd=cwd,
    )
    return proc


def test_missing_config_exits_2():
    proc = run_cli(["--config", "/nonexistent/cfg.json"])
    assert proc.returncode == 2
    payload = json.loads(proc.stdout)
    assert payload["error"] == "config_not_found"
    assert payload["path"] == "/nonexistent/cfg.json"


def test_unknown_analysis_exits_2(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{}")
    proc = run_cli(["--config", str(cfg), "--analysis", "bogus", "--out", str(tmp_path / "o")])
    assert proc.returncode == 2
    payload = json.loads(proc.stdout)
    assert payload["error"] == "unknown_analysis"


def test_missing_input_file_exits_2_names_path(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "reliability": {"records": "missing_records.csv"},
            }
        )
    )
    proc = run_cli(
        ["--config", str(cfg), "--analysis", "reliability", "--out", str(tmp_path / "o")]
    )
    assert proc.returncode == 2
    payload = json.loads(proc.stdout)
    assert "missing_records.csv" in payload["detail"]


def test_malformed_config_exits_2(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    proc = run_cli(["--config", str(cfg), "--out", str(tmp_path / "o")])
    assert proc.returncode == 2
    assert json.loads(proc.stdout)["error"] == "config_parse"


def test_runtime_failure_exits_1_with_error_json(tmp_path):
    # Profiles file lacking the channels the feeder references is a runtime
    # data problem, not a config-shape problem.
    profiles = tmp_path / "profiles.csv"
    profiles.write_text("time,other\n2017-08-21 00:00,1.0\n")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "feeder": {
                    "feeder_file": "demo:feeder12.json",
                    "profiles": {"file": str(profiles)},
                }
            }
        )
    )
    proc = run_cli(["--config", str(cfg), "--analysis", "feeder", "--out", str(tmp_path / "o")])
    assert proc.returncode == 1
    payload = json.loads(proc.stdout)
    assert "ghi_wm2" in payload["detail"]


def test_perf_analysis_writes_summary(tmp_path):
    out = tmp_path / "out"
    proc = run_cli(["--config", DEMO_CONFIG, "--analysis", "perf", "--out", str(out)])
    assert proc.returncode == 0, proc.stdout + proc.stderr
    summary = json.loads((out / "perf" / "system_a" / "eclipse_summary.json").read_text())
    names = {c["name"] for c in summary["channels"]}
    assert {"power_kw", "irradiance_wm2", "ppi"} <= names
    power = next(c for c in summary["channels"] if c["name"] == "power_kw")
    assert power["drop_pct"] > 50.0
    ppi_plot = json.loads(
        (out / "perf" / "system_a" / "plots" / "ppi_system_a.json").read_text()
    )
    assert ppi_plot["name"] == "ppi_system_a"
    assert len(ppi_plot["x"]) == len(ppi_plot["y"]) > 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 42  # config default, no --seed override
    assert all("sha256" in e for e in manifest["artifacts"])


def test_feeder_analysis_writes_action_log(tmp_path):
    out = tmp_path / "out"
    proc = run_cli(["--config", DEMO_CONFIG, "--analysis", "feeder", "--out", str(out)])
    assert proc.returncode == 0, proc.stdout + proc.stderr
    actions = (out / "feeder" / "device_actions.csv").read_text().splitlines()
    assert actions[0] == "t,device,kind,phase,from,to"
    assert len(actions) > 5
    summary = json.loads((out / "feeder" / "summary.json").read_text())
    assert summary["penetration_pct"] == pytest.approx(37.0, abs=0.1)
    assert summary["audit_violations"] == []
    losses = json.loads((out / "feeder" / "plots" / "loss_p_kw.json").read_text())
    assert len(losses["y"]) == summary["steps"]


def test_quality_analysis_compliance(tmp_path):
    out = tmp_path / "out"
    proc = run_cli(["--config", DEMO_CONFIG, "--analysis", "quality", "--out", str(out)])
    assert proc.returncode == 0, proc.stdout + proc.stderr
    comp = json.loads((out / "quality" / "compliance.json").read_text())
    assert comp["overall_pass"] is True
    metrics = {(c["metric"], c["phase"]): c for c in comp["checks"]}
    assert metrics[("vthd_pct", "a")]["value"] < 5.0


def test_quality_precomputed_thd_and_flicker_pass_through(tmp_path):
    # Meters that export their own THD/Pst columns (no raw spectra) are
    # consumed as-is.
    rows = ["time,v_rms_a,vthd_a,ithd_a,tdd_a,pst_a"]
    for minute in range(20):
        rows.append(f"2017-08-21 14:{minute:02d},283.0,3.9,12.5,2.2,0.09")
    meter = tmp_path / "meter.csv"
    meter.write_text("\n".join(rows) + "\n")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {"quality": {"meter": {"file": str(meter), "v_base": 277.0, "phases": "a"}}}
        )
    )
    out = tmp_path / "out"
    proc = run_cli(["--config", str(cfg), "--analysis", "quality", "--out", str(out)])
    assert proc.returncode == 0, proc.stdout + proc.stderr
    metrics = json.loads((out / "quality" / "metrics.json").read_text())["phases"][0]
    assert metrics["vthd_pct_max"] == pytest.approx(3.9)
    assert metrics["ithd_pct_max"] == pytest.approx(12.5)
    assert metrics["tdd_pct_max"] == pytest.approx(2.2)
    assert metrics["pst_max"] == pytest.approx(0.09)
    comp = json.loads((out / "quality" / "compliance.json").read_text())
    assert comp["overall_pass"] is True


def test_toml_config_accepted(tmp_path):
    meter = tmp_path / "meter.csv"
    rows = ["time,v_rms_a"]
    for minute in range(12):
        rows.append(f"2017-08-21 14:{minute:02d},280.0")
    meter.write_text("\n".join(rows) + "\n")
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(
        "\n".join(
            [
                "seed = 3",
                "[quality.meter]",
                f'file = "{meter}"',
                "v_base = 277.0",
                'phases = "a"',
            ]
        )
    )
    out = tmp_path / "out"
    proc = run_cli(["--config", str(cfg), "--analysis", "quality", "--out", str(out)])
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert json.loads((out / "manifest.json").read_text())["seed"] == 3


def test_run_all_byte_identical_with_seed(tmp_path):
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    for out in (out1, out2):
        proc = run_cli(
            ["--config", DEMO_CONFIG, "--analysis", "all", "--seed", "42", "--out", str(out)]
        )
        assert proc.returncode == 0, proc.stdout + proc.stderr
    files1 = sorted(p.relative_to(out1) for p in out1.rglob("*") if p.is_file())
    files2 = sorted(p.relative_to(out2) for p in out2.rglob("*") if p.is_file())
    assert files1 == files2
    mismatched = [
        str(rel) for rel in files1 if (out1 / rel).read_bytes() != (out2 / rel).read_bytes()
    ]
    assert mismatched == []


def test_emit_plot_data_reliability_pairs():
    report = {
        "kind": "reliability",
        "days": ["2015-01-01", "2015-01-02"],
        "target": [3.0, 5.0],
        "predicted": [2.5, 4.5],
    }
    series = emit_plot_data(report)
    names = {s["name"] for s in series}
    assert names == {"target_interruptions", "predicted_interruptions"}


def test_emit_plot_data_unknown_kind():
    with pytest.raises(ValueError):
        emit_plot_data({"kind": "mystery"})


def test_main_callable_in_process(tmp_path):
    # Exercise main() directly for coverage of the arg-parsing path.
    out = tmp_path / "o"
    code = main(
        ["--config", DEMO_CONFIG, "--analysis", "quality", "--out", str(out), "--seed", "1"]
    )
    assert code == 0
    assert (out / "manifest.json").exists()


def test_config_dir_env_resolution(tmp_path, monkeypatch):
    cfg_dir = tmp_path / "configs"
    cfg_dir.mkdir()
    (cfg_dir / "scenario.json").write_text(json.dumps({"seed": 1}))
    monkeypatch.setenv("PVRAMP_CONFIG_DIR", str(cfg_dir))
    monkeypatch.chdir(tmp_path)
    code = main(["--config", "scenario.json", "--out", str(tmp_path / "o")])
    # Config found via the env var; it has no analysis sections -> exit 2.
    assert code == 2
