"""Command-line front end: ``s3w {dist,flow,study,bench,sample}``.

Every subcommand accepts ``--config FILE.json`` whose keys are the flag
names (dashes or underscores); explicit flags override file values.  The
fully resolved settings are echoed into the JSON metadata next to the
outputs.  Exit codes: 0 success, 2 usage or input error, 3 capacity error.
"""

import argparse
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, evaluation, grad, sphere
from .distances import S3WConfig, ari_s3w, max_s3w, ri_s3w, s3w, sw_ambient, vsw
from .exceptions import CapacityError
from .io import format_float, load_measure, parse_spec, read_cloud, write_cloud

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CAPACITY = 3

DIST_METHODS = ("s3w", "ri_s3w", "ari_s3w", "max_s3w", "sw", "vsw")
STUDIES = ("distortion", "eps", "pool-gen") + evaluation.EVOLUTION_KINDS


class UsageError(Exception):
    pass


def parse_grid(text, integer=False):
    """``a:b:k`` (linear), ``a:b:log:k`` (geometric) or a comma list."""
    conv = (lambda v: int(round(v))) if integer else float
    if ":" not in text:
        return [conv(float(t)) for t in text.split(",") if t]
    parts = text.split(":")
    try:
        if len(parts) == 4 and parts[2] == "log":
            vals = np.geomspace(float(parts[0]), float(parts[1]), int(parts[3]))
        elif len(parts) == 3:
            vals = np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))
        else:
            raise ValueError
    except ValueError:
        raise UsageError(f"bad grid {text!r}; use a:b:k, a:b:log:k or a comma list") from None
    # trim linspace/geomspace round-off so 1e-6 prints as 1e-06
    return [conv(float(f"{v:.12g}")) for v in vals]


def _schedule(text):
    try:
        a, b = (int(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("rotation schedule must look like 1:30") from None
    return (a, b)


def _common(p):
    p.add_argument("--config", help="JSON file with flag values (flags override it)")
    p.add_argument("--seed", type=int, default=None, help="root seed (default: $S3W_SEED, else 0)")
    p.add_argument("--threads", type=int, default=None, help="BLAS/worker threads (default: all cores)")
    p.add_argument("--out", default="s3w-out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="s3w", description="Stereographic spherical sliced Wasserstein toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("dist", help="distance between two clouds", formatter_class=fmt)
    _common(p)
    p.add_argument("--method", choices=DIST_METHODS, default="s3w", help="distance estimator")
    p.add_argument("--a", required=False, help="first cloud: CSV path or generator spec")
    p.add_argument("--b", required=False, help="second cloud: CSV path or generator spec")
    p.add_argument("--p", type=float, default=2.0, help="order p >= 1")
    p.add_argument("--L", type=int, default=100, help="number of projections")
    p.add_argument("--eps", type=float, default=sphere.DEFAULT_EPS, help="cap parameter")
    p.add_argument("--rotations", type=int, default=10, help="rotations for ri_s3w/ari_s3w")
    p.add_argument("--pool", type=int, default=100, help="rotation pool size for ari_s3w")
    p.add_argument("--candidates", type=int, default=1000, help="directions scanned by max_s3w")
    p.add_argument("--reuse-projections", action="store_true", help="share one projection set across rotations")
    p.set_defaults(handler=cmd_dist)

    p = sub.add_parser("flow", help="particle gradient flow toward a target", formatter_class=fmt)
    _common(p)
    p.add_argument("--target", default="icosa12", help="icosa12, a generator spec or a CSV path")
    p.add_argument("--kappa", type=float, default=50.0, help="concentration of the icosa12 preset")
    p.add_argument("--n-target", type=int, default=2400, help="target sample size for icosa12")
    p.add_argument("--particles", type=int, default=None, help="particle count (default: target size)")
    p.add_argument("--loss", choices=grad.LOSSES, default="s3w", help="flow loss")
    p.add_argument("--steps", type=int, default=500, help="optimizer steps")
    p.add_argument("--lr", type=float, default=0.01, help="learning rate")
    p.add_argument("--L", type=int, default=1000, help="number of projections")
    p.add_argument("--p", type=float, default=2.0, help="order p >= 1")
    p.add_argument("--eps", type=float, default=sphere.DEFAULT_EPS, help="cap parameter")
    p.add_argument("--rotations", type=int, default=1, help="rotations per step")
    p.add_argument("--rot-schedule", type=_schedule, default=None, help="linear rotation ramp a:b")
    p.add_argument("--pool", type=int, default=1000, help="rotation pool size for ari_s3w")
    p.add_argument("--batch", type=int, default=0, help="target mini-batch size (0 = full batch)")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam", help="optimizer")
    p.add_argument("--retraction", choices=("normalize", "exp_map"), default="normalize", help="retraction")
    p.add_argument("--eval-every", type=int, default=50, help="NLL / log W2 cadence in steps")
    p.add_argument("--eval-subsample", type=int, default=None, help="W2 subsample size (default: whole cloud)")
    p.set_defaults(handler=cmd_flow)

    p = sub.add_parser("study", help="parameter studies", formatter_class=fmt)
    _common(p)
    p.add_argument("kind", choices=STUDIES, help="study to run")
    p.add_argument("--grid", default=None, help="grid a:b:k, a:b:log:k or comma list (study default if omitted)")
    p.add_argument("--pairs", type=int, default=1000, help="pairs for the distortion study")
    p.add_argument("--reps", type=int, default=None,
                   help="repetitions per grid cell (distortion: 1, pool-gen: 3, others: 100)")
    p.add_argument("--n", type=int, default=None, help="samples per measure (eps: 2048, evolution: 500)")
    p.add_argument("--L", type=int, default=None, help="projections (eps: 128, evolution: 200)")
    p.add_argument("--rotations", type=int, default=10, help="rotations for ri_s3w/ari_s3w")
    p.add_argument("--pool", type=int, default=100, help="rotation pool size")
    p.add_argument("--kappa", type=float, default=None, help="vMF concentration (eps: 50, evolution: 10)")
    p.add_argument("--d", type=int, default=2, help="sphere dimension for evolution studies")
    p.add_argument("--methods", default="s3w,ri_s3w,ari_s3w", help="comma-separated distances")
    p.set_defaults(handler=cmd_study)

    p = sub.add_parser("bench", help="runtime benchmarks", formatter_class=fmt)
    _common(p)
    p.add_argument("--methods", default="s3w,ri_s3w,ari_s3w", help="comma-separated distances")
    p.add_argument("--N", default="500", help="sample-size grid")
    p.add_argument("--L", default="200", help="projection grid")
    p.add_argument("--rotations", default="10", help="rotation-count grid")
    p.add_argument("--d", type=int, default=2, help="sphere dimension")
    p.add_argument("--reps", type=int, default=5, help="timed repetitions per cell (>= 3)")
    p.add_argument("--pool", type=int, default=100, help="rotation pool size")
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("sample", help="write a generated cloud to CSV", formatter_class=fmt)
    _common(p)
    p.add_argument("--spec", required=False, help="generator spec, e.g. vmf:mu=0,0,1:kappa=10:n=500")
    p.add_argument("--file", default="cloud.csv", help="output file name inside --out")
    p.set_defaults(handler=cmd_sample)
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def resolve_args(parser, argv):
    """Parse ``argv`` with JSON config values as defaults beneath the flags."""
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        sp = _subparser(parser, args.command)
        known = {a.dest for a in sp._actions}
        values = {}
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if dest not in known or dest in ("config", "help"):
                raise UsageError(f"unknown config key {key!r} for '{args.command}'")
            if dest == "rot_schedule" and value is not None:
                value = _schedule(value) if isinstance(value, str) else tuple(value)
            values[dest] = value
        sp.set_defaults(**values)
        args = parser.parse_args(argv)
    if args.seed is None:
        env = os.environ.get("S3W_SEED")
        try:
            args.seed = int(env) if env else 0
        except ValueError:
            raise UsageError(f"S3W_SEED must be an integer, got {env!r}") from None
    if args.threads is None:
        args.threads = os.cpu_count() or 1
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    return args


def _settings(args):
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items()) if k != "handler"}


def _streams(seed, n):
    """Per-component generators spawned from the root seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _meta(args, **extra):
    return {
        "version": __version__,
        "settings": _settings(args),
        "seed": args.seed,
        "seed_scheme": "numpy SeedSequence(seed).spawn(k), component order documented per command",
        **extra,
    }


def _timing(t0):
    return {"wall_seconds": time.perf_counter() - t0,
            "finished_utc": datetime.now(timezone.utc).isoformat(timespec="seconds")}


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=evaluation._json_default)
        fh.write("\n")


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_dist(args):
    if not args.a or not args.b:
        raise UsageError("dist needs --a and --b")
    t0 = time.perf_counter()
    # streams: a, b, pool, estimator draws
    ga, gb, gpool, gdraw = _streams(args.seed, 4)
    mu = load_measure(args.a, ga)
    nu = load_measure(args.b, gb)
    if mu.dim != nu.dim:
        raise UsageError(f"dimension mismatch: S^{mu.dim} vs S^{nu.dim}")
    cfg = S3WConfig(p=args.p, n_projections=args.L, eps=args.eps, reuse_projections=args.reuse_projections)
    m = args.method
    if m == "s3w":
        value = s3w(mu, nu, cfg, cfg.projections(mu.dim, gdraw))
    elif m == "ri_s3w":
        value = ri_s3w(mu, nu, cfg, args.rotations, gdraw)
    elif m == "ari_s3w":
        if args.rotations > args.pool:
            raise UsageError("--rotations exceeds --pool")
        value = ari_s3w(mu, nu, cfg, args.rotations, sphere.build_pool(mu.dim, args.pool, gpool), gdraw)
    elif m == "max_s3w":
        value = max_s3w(mu, nu, cfg, args.candidates, gdraw)
    elif m == "sw":
        value = sw_ambient(mu, nu, args.p, args.L, gdraw)
    else:
        value = vsw(mu, nu, args.p, args.L, gdraw)
    print(format_float(value))
    record = {"method": m, "value": float(value), "config": _settings(args), "seed": args.seed, **_timing(t0)}
    _dump(_outdir(args) / "dist.json", record)
    return EXIT_OK


def _flow_target(args, rng):
    if args.target == "icosa12":
        mix = grad.icosa12(args.kappa)
        return mix.sample(args.n_target, rng, stratified=True), mix
    kind = args.target.split(":", 1)[0]
    if kind in ("vmf", "uniform", "icosa12"):
        pts = parse_spec(args.target, rng)
        mix = None
        if kind == "vmf" and pts.shape[1] == 3:
            opts = dict(part.split("=", 1) for part in args.target.split(":")[1:])
            mu = np.array([float(t) for t in opts["mu"].split(",")])
            mix = sphere.VmfMixture((sphere.VonMisesFisher(mu / np.linalg.norm(mu), float(opts["kappa"])),))
        elif kind == "icosa12":
            opts = dict(part.split("=", 1) for part in args.target.split(":")[1:])
            mix = grad.icosa12(float(opts.get("kappa", 50.0)))
        return pts, mix
    pts, weights = read_cloud(args.target)
    if weights is not None and not np.allclose(weights, weights[0]):
        raise UsageError("flow targets must have uniform weights")
    return pts, None


def cmd_flow(args):
    t0 = time.perf_counter()
    # streams: target sample, flow root
    g_target, g_flow = _streams(args.seed, 2)
    target, mixture = _flow_target(args, g_target)
    flow_seed = int(g_flow.integers(2**63 - 1))
    cfg = grad.FlowConfig(loss=args.loss, p=args.p, n_projections=args.L, eps=args.eps, n_rotations=args.rotations,
                          rot_schedule=args.rot_schedule, pool_size=args.pool, steps=args.steps, lr=args.lr,
                          batch=args.batch, optimizer=args.optimizer, retraction=args.retraction, seed=flow_seed,
                          eval_every=args.eval_every, eval_subsample=args.eval_subsample,
                          n_particles=args.particles)
    trace = grad.run_flow(cfg, target, mixture=mixture)
    out = _outdir(args)
    with open(out / "trace.csv", "w") as fh:
        fh.write(",".join(grad.TRACE_COLUMNS) + "\n")
        for row in trace.rows:
            fh.write(",".join(str(v) if i == 0 else ("" if v is None else format_float(v))
                              for i, v in enumerate(row)) + "\n")
    write_cloud(out / "final_cloud.csv", trace.cloud)
    meta = _meta(args, flow=trace.meta, final_log_w2=trace.final("log_w2"), final_nll=trace.final("nll"),
                 outputs=["trace.csv", "final_cloud.csv"], timing=_timing(t0))
    _dump(out / "meta.json", meta)
    print(f"steps={len(trace.rows)} final_log_w2={trace.final('log_w2')} out={out}")
    return EXIT_OK


_STUDY_DEFAULTS = {"eps": {"n": 2048, "L": 128, "kappa": 50.0}, "evolution": {"n": 500, "L": 200, "kappa": 10.0}}


def cmd_study(args):
    t0 = time.perf_counter()
    methods = tuple(m for m in args.methods.split(",") if m)
    kind = args.kind
    if kind == "distortion":
        rep = evaluation.distortion_study(args.pairs, args.seed, reps=args.reps or 1)
    elif kind == "pool-gen":
        sizes = parse_grid(args.grid, integer=True) if args.grid else [100, 1000]
        rep = evaluation.pool_generation_times((args.d,), sizes, reps=args.reps or 3, rng=args.seed)
    elif kind == "eps":
        dflt = _STUDY_DEFAULTS["eps"]
        grid = parse_grid(args.grid) if args.grid else list(np.geomspace(1e-6, 1e-1, 6))
        rep = evaluation.eps_stability_study(grid, args.L or dflt["L"], args.n or dflt["n"], args.seed, args.reps or 100,
                                             methods, args.kappa or dflt["kappa"], args.rotations, args.pool)
    else:
        dflt = _STUDY_DEFAULTS["evolution"]
        grid = None
        if args.grid:
            grid = parse_grid(args.grid, integer=kind in ("projections", "rotations", "pool", "samples"))
        rep = evaluation.evolution_study(kind, grid, args.seed, args.reps or 100, args.n or dflt["n"], args.L or dflt["L"],
                                         args.rotations, args.pool, args.kappa or dflt["kappa"], args.d, methods)
    out = _outdir(args)
    stem = f"study_{kind}"
    rep.meta.update(_meta(args, timing=_timing(t0)))
    rep.write(out / f"{stem}.csv", out / f"{stem}.json")
    for params, n, mean, std in rep.cells():
        label = " ".join(f"{k}={format_float(v) if isinstance(v, float) else v}" for k, v in params.items())
        print(f"{label} n={n} mean={format_float(mean)} std={'' if std is None else format_float(std)}")
    return EXIT_OK


def cmd_bench(args):
    t0 = time.perf_counter()
    methods = tuple(m for m in args.methods.split(",") if m)
    rep = evaluation.bench_runtime(methods, parse_grid(args.N, True), args.d, parse_grid(args.L, True),
                                   parse_grid(args.rotations, True), args.reps, args.pool, args.seed)
    out = _outdir(args)
    rep.meta.update(_meta(args, timing=_timing(t0)))
    rep.write(out / "bench.csv", out / "bench.json")
    for params, _, mean, _ in rep.cells():
        print(" ".join(f"{k}={v}" for k, v in params.items()), f"median_seconds={mean:.6f}")
    return EXIT_OK


def cmd_sample(args):
    if not args.spec:
        raise UsageError("sample needs --spec")
    (g,) = _streams(args.seed, 1)
    pts = parse_spec(args.spec, g)
    out = _outdir(args)
    write_cloud(out / args.file, pts)
    _dump(out / (Path(args.file).stem + ".json"), _meta(args, n=int(pts.shape[0]), dim=int(pts.shape[1] - 1)))
    print(out / args.file)
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = resolve_args(parser, argv)
        with threadpool_limits(limits=args.threads):
            return args.handler(args)
    except SystemExit as exc:
        # argparse reports usage errors with exit status 2
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"s3w: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"s3w: capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ValueError, OSError) as exc:
        print(f"s3w: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
