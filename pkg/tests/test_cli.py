import hashlib
import json
import os
import re
import subprocess
import sys

import numpy as np
import pytest

from inertiafit import sfr_sim
from inertiafit.cli import main
from inertiafit.plotting import parse_path

ERROR_LINE = re.compile(r"^error\[[A-Z_]+\]: \S.*$")


def _digests(directory):
    out = {}
    for name in sorted(os.listdir(directory)):
        with open(os.path.join(directory, name), "rb") as fh:
            out[name] = hashlib.sha256(fh.read()).hexdigest()
    return out


def _write_config(path, cfg):
    path.write_text(json.dumps(cfg.to_dict()))
    return str(path)


def _single_error_line(err):
    lines = err.strip().splitlines()
    assert len(lines) == 1
    assert ERROR_LINE.match(lines[0]), lines[0]
    return lines[0]


@pytest.fixture(scope="module")
def case1_export(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg_path = _write_config(d / "case1.json", sfr_sim.case1_analog())
    assert main(["--quiet", "simulate", cfg_path, "-o", str(d / "event")]) == 0
    return d / "event"


@pytest.fixture(scope="module")
def case2_export(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli2")
    cfg_path = _write_config(d / "case2.json", sfr_sim.case2_analog())
    assert main(["--quiet", "simulate", cfg_path, "-o", str(d / "event")]) == 0
    return d / "event"


# -- simulate ------------------------------------------------------------------

def test_simulate_writes_files(case1_export):
    files = os.listdir(case1_export)
    assert len(files) >= 5
    assert {"manifest.json", "truth.json", "frequency.csv", "contingency.csv"} <= set(files)


def test_simulate_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert main(["simulate", str(bad), "-o", str(tmp_path / "out")]) == 2
    line = _single_error_line(capsys.readouterr().err)
    assert "invalid JSON" in line


def test_simulate_invalid_config(tmp_path, capsys):
    cfg = sfr_sim.case1_analog().to_dict()
    cfg["dt"] = 0.5
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert main(["simulate", str(path), "-o", str(tmp_path / "out")]) == 2
    assert "INVALID_CONFIG" in _single_error_line(capsys.readouterr().err)


def test_simulate_seed_repetition_identical(tmp_path):
    cfg = sfr_sim.case1_analog(artifacts=sfr_sim.Artifacts(noise_sigma=0.003), seed=5)
    path = _write_config(tmp_path / "c.json", cfg)
    assert main(["--quiet", "simulate", path, "-o", str(tmp_path / "a")]) == 0
    assert main(["--quiet", "simulate", path, "-o", str(tmp_path / "b")]) == 0
    assert _digests(tmp_path / "a") == _digests(tmp_path / "b")


def test_simulate_prints_truth_summary(tmp_path, capsys):
    path = _write_config(tmp_path / "c.json", sfr_sim.case1_analog())
    assert main(["simulate", path, "-o", str(tmp_path / "o")]) == 0
    assert "KE=1522" in capsys.readouterr().out


# -- estimate ------------------------------------------------------------------

def test_estimate_modelfit_with_washout(case1_export, tmp_path):
    out = tmp_path / "r"
    args = ["--quiet", "--out", str(out), "estimate", str(case1_export / "manifest.json"),
            "--method", "modelfit", "--washout"]
    assert main(args) == 0
    report = json.loads((out / "report.json").read_text())
    truth = json.loads((case1_export / "truth.json").read_text())
    (block,) = report["results"]
    assert block["method"] == "model_fit"
    # the washout's lag leaves a small residual bias on machines with inertia
    assert block["ke_mws"] == pytest.approx(truth["ke_mws"], rel=0.01)
    assert (out / "fitted_frequency.csv").exists()
    assert report["washout_applied"] is True


def test_estimate_modelfit_without_machine_inertia(tmp_path):
    # clean export: machines without inertia need no washout step
    cfg = sfr_sim.case1_analog()
    cfg = sfr_sim.case1_analog(governors=tuple(
        sfr_sim.GovernorParams(**{**g.__dict__, "inertia": 0.0}) for g in cfg.governors))
    path = _write_config(tmp_path / "c.json", cfg)
    assert main(["--quiet", "simulate", path, "-o", str(tmp_path / "e")]) == 0
    assert main(["--quiet", "--out", str(tmp_path / "r"), "estimate",
                 str(tmp_path / "e" / "manifest.json"), "--method", "modelfit"]) == 0
    block = json.loads((tmp_path / "r" / "report.json").read_text())["results"][0]
    assert block["ke_mws"] == pytest.approx(1522.0, rel=1e-3)


def test_estimate_all_methods(case1_export, tmp_path):
    out = tmp_path / "r"
    assert main(["--quiet", "--out", str(out), "estimate",
                 str(case1_export / "manifest.json"), "--method", "all"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert [b["method"] for b in report["results"]] == ["sliding_window", "inoue", "model_fit"]
    assert report["table"][0] == ["Method", "KE (MW.s)", "D (%)", "Remarks"]
    assert len(report["table"]) == 4
    assert {"software_version", "input_digest", "manifest"} <= set(report)


def test_estimate_missing_trace_file(case1_export, tmp_path, capsys):
    work = tmp_path / "broken"
    work.mkdir()
    man = json.loads((case1_export / "manifest.json").read_text())
    for name in os.listdir(case1_export):
        if name != "contingency.csv":
            (work / name).write_bytes((case1_export / name).read_bytes())
    (work / "manifest.json").write_text(json.dumps(man))
    assert main(["--out", str(tmp_path / "r"), "estimate", str(work / "manifest.json")]) == 2
    line = _single_error_line(capsys.readouterr().err)
    assert str(work / "contingency.csv") in line


def test_estimate_reruns_byte_identical(case1_export, tmp_path):
    for sub in ("a", "b"):
        assert main(["--quiet", "--out", str(tmp_path / sub), "estimate",
                     str(case1_export / "manifest.json"), "--method", "all", "--washout"]) == 0
    for name in ("report.json", "fitted_frequency.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    meta = json.loads((tmp_path / "a" / "run_metadata.json").read_text())
    assert {"timestamp", "elapsed_s"} <= set(meta)


def test_estimate_missing_manifest(tmp_path, capsys):
    assert main(["estimate", str(tmp_path / "nope.json")]) == 2
    assert "nope.json" in _single_error_line(capsys.readouterr().err)


# -- sweep ---------------------------------------------------------------------

def _csv_rows(path):
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "hyperparameter,ke_mws"
    return [tuple(float(v) for v in line.split(",")) for line in lines[1:]]


def test_sweep_window_row_count(case1_export, tmp_path):
    assert main(["--quiet", "--out", str(tmp_path), "sweep", str(case1_export / "manifest.json"),
                 "--method", "sliding", "--from", "0.02", "--to", "1.0", "--step", "0.01"]) == 0
    rows = _csv_rows(tmp_path / "sweep_sliding.csv")
    assert len(rows) == 99
    assert rows[0][0] == 0.02 and rows[-1][0] == 1.0
    assert (tmp_path / "sweep_sliding.svg").exists()


def test_sweep_order_row_count(case1_export, tmp_path):
    assert main(["--quiet", "--out", str(tmp_path), "sweep", str(case1_export / "manifest.json"),
                 "--method", "inoue", "--from", "2", "--to", "30", "--step", "1"]) == 0
    rows = _csv_rows(tmp_path / "sweep_inoue.csv")
    assert len(rows) == 29
    assert [r[0] for r in rows] == list(range(2, 31))


def test_sweep_svg_knee_shape(case2_export, tmp_path):
    assert main(["--quiet", "--out", str(tmp_path), "sweep", str(case2_export / "manifest.json"),
                 "--method", "sliding", "--from", "0.02", "--to", "1.0", "--step", "0.01"]) == 0
    svg = (tmp_path / "sweep_sliding.svg").read_text()
    est = parse_path(re.search(r'<path id="estimate" d="([^"]+)"', svg).group(1))
    truth = parse_path(re.search(r'<path id="truth" d="([^"]+)"', svg).group(1))
    y_truth = truth[0][1]
    ys = np.array([p[1] for p in est])
    # SVG y grows downwards: the lowest estimate sits at the short-window end
    assert int(np.argmax(ys)) < len(ys) // 10
    gap_short = ys[0] - y_truth
    gap_long = np.abs(ys[-10:] - y_truth)
    assert gap_short > 0
    assert np.all(gap_long < 0.35 * gap_short)


def test_sweep_empty_range(case1_export, tmp_path, capsys):
    assert main(["--out", str(tmp_path), "sweep", str(case1_export / "manifest.json"),
                 "--method", "sliding", "--from", "1.0", "--to", "0.5", "--step", "0.1"]) == 2
    assert "EMPTY_SWEEP" in _single_error_line(capsys.readouterr().err)


def test_sweep_reruns_byte_identical(case1_export, tmp_path):
    for sub in ("a", "b"):
        assert main(["--quiet", "--out", str(tmp_path / sub), "sweep",
                     str(case1_export / "manifest.json"), "--method", "inoue",
                     "--from", "2", "--to", "12", "--step", "1"]) == 0
    assert _digests(tmp_path / "a") == _digests(tmp_path / "b")


# -- entry point ---------------------------------------------------------------

def test_usage_error_exit_code(capsys):
    assert main(["estimate"]) == 2
    assert main(["bogus"]) == 2


def test_console_script(case1_export, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "inertiafit.cli", "--out", str(tmp_path), "estimate",
         str(case1_export / "manifest.json"), "--method", "sliding", "--window-s", "0.06"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["results"][0]["ke_mws"] == pytest.approx(1522.0, rel=0.05)
