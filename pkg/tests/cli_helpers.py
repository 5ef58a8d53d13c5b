"""Shared helpers for command-line reproducibility checks."""

import json
import re

from s3wkit import cli

TIMING_KEYS = {"wall_seconds", "finished_utc", "timing"}

# small but complete invocations of every subcommand
COMMANDS = {
    "dist": ["dist", "--method", "ari_s3w", "--a", "vmf:mu=0,0,1:kappa=10:n=80", "--b", "uniform:d=2:n=80",
             "--rotations", 5, "--pool", 20, "--L", 30],
    "flow": ["flow", "--n-target", 48, "--steps", 4, "--L", 16, "--loss", "ari_s3w", "--rotations", 3, "--pool", 8,
             "--eval-every", 2],
    "study": ["study", "angle", "--grid", "0,3.14159", "--reps", 2, "--n", 40, "--L", 10, "--rotations", 2,
              "--pool", 5],
    "bench": ["bench", "--N", 30, "--L", "5,10", "--rotations", 2, "--reps", 3, "--pool", 4],
    "sample": ["sample", "--spec", "icosa12:kappa=50:n=36"],
}


def mask_timing(path):
    """File content with wall-clock fields removed."""
    if path.suffix == ".json":
        def strip(obj):
            if isinstance(obj, dict):
                return {k: strip(v) for k, v in obj.items() if k not in TIMING_KEYS}
            return obj

        return strip(json.loads(path.read_text()))
    text = path.read_text()
    if path.name == "trace.csv":
        return [re.sub(r"^([^,]*,[^,]*,)[^,]*", r"\1", ln) for ln in text.splitlines()]
    if path.name == "bench.csv" or path.name.startswith("study_pool-gen"):
        return [ln.rsplit(",", 1)[0] for ln in text.splitlines()]
    return text


def reproduce(name, workdir, seed=5):
    """Run one command twice with a fixed seed and one thread; return the files that differ."""
    outs = []
    for k in range(2):
        out = workdir / "run"
        code = cli.main([str(a) for a in [*COMMANDS[name], "--seed", seed, "--threads", 1, "--out", out]])
        if code != 0:
            raise RuntimeError(f"{name} exited with {code}")
        outs.append(out.rename(workdir / f"{name}{k}"))
    a = sorted(p.name for p in outs[0].iterdir())
    b = sorted(p.name for p in outs[1].iterdir())
    if a != b or not a:
        return ["<file list>"]
    return [f for f in a if mask_timing(outs[0] / f) != mask_timing(outs[1] / f)]
