import json
import subprocess
import sys

import numpy as np
import pytest

from s3wkit import cli, evaluation, sphere
from cli_helpers import COMMANDS, reproduce
from s3wkit.io import CloudFormatError, format_float, load_measure, parse_spec, read_cloud, write_cloud

# cloud files --------------------------------------------------------------


def test_cloud_round_trip_is_exact(tmp_path):
    pts = sphere.sample_uniform(2, 50, 0)
    write_cloud(tmp_path / "c.csv", pts)
    back, weights = read_cloud(tmp_path / "c.csv")
    assert weights is None
    np.testing.assert_allclose(back, pts, rtol=0, atol=2e-16)


def test_weight_column_detection(tmp_path):
    pts = sphere.sample_uniform(2, 4, 1)
    write_cloud(tmp_path / "w.csv", pts, [1.0, 1.0, 2.0, 4.0])
    back, weights = read_cloud(tmp_path / "w.csv")
    np.testing.assert_allclose(weights, [0.125, 0.125, 0.25, 0.5])
    (tmp_path / "h.csv").write_text("x,y,z,weight\n1,0,0,1\n0,1,0,3\n")
    _, weights = read_cloud(tmp_path / "h.csv")
    np.testing.assert_allclose(weights, [0.25, 0.75])


@pytest.mark.parametrize(
    "text, line",
    [("1,0,0\n0,1,0\n0,0,x\n", 3), ("1,0,0\n0,1\n", 2), ("# c\n1,0,0\n0.5,0.5,0\n", 3), ("1,0,0\nnan,0,0\n", 2),
     ("x,y,z,w\n1,0,0,1\n0,1,0,-1\n", 3)],
)
def test_malformed_files_name_the_line(tmp_path, text, line):
    (tmp_path / "bad.csv").write_text(text)
    with pytest.raises(CloudFormatError, match=rf"line {line}\b"):
        read_cloud(tmp_path / "bad.csv")


def test_format_float():
    assert format_float(0.0) == "0.0"
    assert format_float(-3.0) == "-3.0"
    assert float(format_float(1 / 3)) == 1 / 3


def test_generator_specs():
    x = parse_spec("vmf:mu=0,0,2:kappa=10:n=30", 0)
    assert x.shape == (30, 3)
    assert parse_spec("uniform:d=4:n=7", 1).shape == (7, 5)
    assert parse_spec("icosa12:kappa=50:n=24", 2).shape == (24, 3)
    np.testing.assert_array_equal(parse_spec("uniform:d=2:n=5", 3), parse_spec("uniform:d=2:n=5", 3))
    for bad in ("gauss:n=3", "vmf:mu=0,0,1:n=3", "uniform:d=2:n=3:color=red", "uniform:d"):
        with pytest.raises(ValueError):
            parse_spec(bad, 0)


def test_load_measure_accepts_files_and_specs(tmp_path):
    pts = parse_spec("uniform:d=2:n=9", 4)
    write_cloud(tmp_path / "u.csv", pts)
    assert load_measure(str(tmp_path / "u.csv")).points.shape == (9, 3)
    assert load_measure("uniform:d=2:n=9", 4).points.shape == (9, 3)


# command line -------------------------------------------------------------


def run(argv, capsys=None):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr() if capsys else None
    return code, out


def test_help_lists_every_flag():
    res = subprocess.run([sys.executable, "-m", "s3wkit", "flow", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for flag in ("--seed", "--threads", "--config", "--out", "--loss", "--rot-schedule", "--batch", "--eval-subsample"):
        assert flag in res.stdout
    res = subprocess.run([sys.executable, "-m", "s3wkit", "--help"], capture_output=True, text=True)
    assert all(c in res.stdout for c in ("dist", "flow", "study", "bench", "sample"))


@pytest.mark.parametrize(
    "argv",
    [["dist", "--bogus"], ["dist", "--a", "uniform:d=2:n=5"], ["flow", "--loss", "ssw"], ["study", "colors"],
     ["dist", "--a", "uniform:d=2:n=5", "--b", "uniform:d=3:n=5"], ["bench", "--reps", "2"],
     ["flow", "--lr", "-1", "--steps", "1"], ["dist", "--a", "missing.csv", "--b", "missing.csv"]],
)
def test_usage_errors_exit_2(argv, tmp_path, capsys):
    code, _ = run([*argv, "--out", tmp_path], capsys)
    assert code == 2


def test_malformed_input_reports_line(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("1,0,0\n0,1,0\n0,0,oops\n")
    code, out = run(["dist", "--a", tmp_path / "bad.csv", "--b", "uniform:d=2:n=3", "--out", tmp_path], capsys)
    assert code == 2 and "line 3" in out.err


def test_capacity_error_exit_3(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(evaluation, "MAX_ASSIGNMENT_SIZE", 10)
    argv = ["flow", "--target", "uniform:d=2:n=40", "--steps", "1", "--L", "5", "--eval-subsample", "30",
            "--out", tmp_path]
    code, out = run(argv, capsys)
    assert code == 3 and "subsample" in out.err


def test_dist_identical_clouds_is_zero(tmp_path, capsys):
    write_cloud(tmp_path / "c.csv", sphere.sample_uniform(2, 20, 0))
    code, out = run(["dist", "--a", tmp_path / "c.csv", "--b", tmp_path / "c.csv", "--out", tmp_path], capsys)
    assert code == 0 and out.out.strip() == "0.0"
    record = json.loads((tmp_path / "dist.json").read_text())
    assert record["value"] == 0.0 and record["method"] == "s3w" and "wall_seconds" in record


def test_spec_and_file_inputs_agree(tmp_path, capsys):
    run(["sample", "--spec", "vmf:mu=1,0,0:kappa=5:n=40", "--seed", 9, "--out", tmp_path, "--file", "a.csv"])
    run(["sample", "--spec", "uniform:d=2:n=40", "--seed", 9, "--out", tmp_path, "--file", "b.csv"])
    capsys.readouterr()
    run(["dist", "--a", tmp_path / "a.csv", "--b", tmp_path / "b.csv", "--seed", 3, "--out", tmp_path])
    from_files = capsys.readouterr().out
    a = cli._streams(9, 1)[0]
    x = parse_spec("vmf:mu=1,0,0:kappa=5:n=40", a)
    np.testing.assert_allclose(read_cloud(tmp_path / "a.csv")[0], x, atol=2e-16)
    assert float(from_files) > 0


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"method": "ri_s3w", "a": "uniform:d=2:n=30", "b": "vmf:mu=0,0,1:kappa=3:n=30",
                               "rotations": 4, "L": 20}))
    code, out = run(["dist", "--config", cfg, "--out", tmp_path], capsys)
    assert code == 0
    record = json.loads((tmp_path / "dist.json").read_text())
    assert record["method"] == "ri_s3w" and record["config"]["rotations"] == 4
    run(["dist", "--config", cfg, "--rotations", 2, "--out", tmp_path], capsys)
    assert json.loads((tmp_path / "dist.json").read_text())["config"]["rotations"] == 2
    cfg.write_text(json.dumps({"colour": 1}))
    assert run(["dist", "--config", cfg, "--out", tmp_path], capsys)[0] == 2


def test_seed_from_environment(tmp_path, capsys, monkeypatch):
    argv = ["dist", "--a", "uniform:d=2:n=30", "--b", "uniform:d=2:n=30", "--L", 10, "--out", tmp_path]
    monkeypatch.setenv("S3W_SEED", "11")
    run(argv)
    env_value = capsys.readouterr().out
    run([*argv, "--seed", 11])
    assert capsys.readouterr().out == env_value


def test_flow_writes_artifacts(tmp_path, capsys):
    argv = ["flow", "--target", "icosa12", "--n-target", 60, "--steps", 6, "--L", 20, "--eval-every", 3,
            "--batch", 25, "--rot-schedule", "1:3", "--loss", "ri_s3w", "--out", tmp_path]
    code, _ = run(argv, capsys)
    assert code == 0
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0] == "step,loss,cum_seconds,nll,log_w2" and len(lines) == 7
    assert lines[1].endswith(",,") and not lines[3].endswith(",")
    assert read_cloud(tmp_path / "final_cloud.csv")[0].shape == (60, 3)
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["settings"]["batch"] == 25 and meta["settings"]["rot_schedule"] == [1, 3]


@pytest.mark.parametrize("name", sorted(COMMANDS))
def test_commands_are_reproducible(name, tmp_path, capsys):
    assert reproduce(name, tmp_path) == []
