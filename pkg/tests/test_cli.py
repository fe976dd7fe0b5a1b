"""CLI: config parsing, run directories, manifests, and CSV persistence."""

import json
import os

import pytest

from stickymc.cli import main


def write_config(tmp_path, data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return str(path)


def run_dirs(parent):
    return sorted(os.path.join(parent, d) for d in os.listdir(parent))


def test_invalid_config_lists_violations(tmp_path):
    cfg = write_config(tmp_path, {"nu_total": 0.0, "bogus_key": 1})
    with pytest.raises(ValueError) as exc:
        main(["calibrate", "--config", cfg, "--out", str(tmp_path / "runs")])
    assert "nu_total" in str(exc.value)
    assert "bogus_key" in str(exc.value)


def test_she_oracle_run_writes_artifacts(tmp_path):
    out = str(tmp_path / "runs")
    code = main(["she-oracle", "--out", out, "--seed", "11", "--threads", "1"])
    assert code == 0
    (run_dir,) = run_dirs(out)
    manifest = json.loads(open(os.path.join(run_dir, "manifest.json")).read())
    assert manifest["passed"] is True
    assert manifest["master_seed"] == 11
    assert manifest["schema_version"] == 1
    report = os.path.join(run_dir, manifest["report"])
    lines = open(report).read().splitlines()
    assert lines[0] == "observable,N,t,x,y,k,estimate,stderr,oracle,z,pass"
    assert len(lines) > 1
    assert all(line.endswith(",1") for line in lines[1:])


def test_runs_never_overwrite(tmp_path):
    out = str(tmp_path / "runs")
    main(["she-oracle", "--out", out, "--seed", "1"])
    main(["she-oracle", "--out", out, "--seed", "2"])
    assert len(run_dirs(out)) == 2


def test_calibrate_rerun_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path, {
        "N_list": [64, 128],
        "replicas_calibrate": 150,
        "tolerance_scale": 3.0,
    })
    outs = []
    for tag in ("a", "b"):
        out = str(tmp_path / tag)
        code = main(["calibrate", "--config", cfg, "--out", out,
                     "--seed", "99", "--threads", "2"])
        assert code == 0
        (run_dir,) = run_dirs(out)
        outs.append(open(os.path.join(run_dir, "report_calibrate.csv")).read())
    assert outs[0] == outs[1]


def test_failing_report_exits_nonzero(tmp_path):
    # shrink every tolerance to force statistical failures
    cfg = write_config(tmp_path, {
        "N_list": [64],
        "replicas_calibrate": 50,
        "tolerance_scale": 1e-9,
    })
    code = main(["calibrate", "--config", cfg, "--out", str(tmp_path / "runs"),
                 "--seed", "5"])
    assert code == 1
