"""Experiment metrics and parameter studies.

Metrics: exact geodesic W2 between equal-size clouds, mixture negative
log-likelihood and the closed-form KL divergence of a vMF to the uniform
law.  Studies return a :class:`StudyReport` (long-format rows plus metadata)
and are bit-reproducible for a fixed seed.
"""

import csv
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from . import sphere
from .distances import (
    EmpiricalMeasure,
    S3WConfig,
    ari_s3w,
    ri_s3w,
    s3w,
    sw_ambient,
    vsw,
)
from .exceptions import CapacityError, UnsupportedDimensionError
from .special import log_bessel_iv

__all__ = [
    "MAX_ASSIGNMENT_SIZE",
    "exact_w2_geodesic",
    "flow_log_w2",
    "nll",
    "kl_vmf_uniform",
    "StudyReport",
    "pearson",
    "distortion_study",
    "eps_stability_study",
    "evolution_study",
    "EVOLUTION_KINDS",
    "bench_runtime",
    "pool_generation_times",
]

MAX_ASSIGNMENT_SIZE = 4096


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _cloud(m):
    if isinstance(m, EmpiricalMeasure):
        if not m.is_uniform:
            raise ValueError("exact W2 needs uniform weights")
        return m.points
    return sphere.as_points(np.atleast_2d(m))


def exact_w2_geodesic(a, b):
    """Exact 2-Wasserstein distance with geodesic ground cost.

    Both clouds must have the same size and uniform weights; the optimal
    coupling is then a permutation, found by linear assignment.

    Raises
    ------
    CapacityError
        More than ``MAX_ASSIGNMENT_SIZE`` points; subsample first.
    """
    x, y = _cloud(a), _cloud(b)
    if x.shape != y.shape:
        raise ValueError(f"clouds must have equal shape, got {x.shape} and {y.shape}")
    n = x.shape[0]
    if n > MAX_ASSIGNMENT_SIZE:
        raise CapacityError(f"{n} points exceed the assignment limit {MAX_ASSIGNMENT_SIZE}; subsample the clouds")
    cost = _geodesic_cost_matrix(x, y)
    rows, cols = linear_sum_assignment(cost)
    return math.sqrt(math.fsum(cost[rows, cols]) / n)


def _geodesic_cost_matrix(x, y, block=512):
    # atan2 form, accumulated per coordinate so that cost(x, y) == cost(y, x).T bit for bit
    out = np.empty((x.shape[0], y.shape[0]))
    for start in range(0, x.shape[0], block):
        xb = x[start:start + block]
        minus = np.zeros((xb.shape[0], y.shape[0]))
        plus = np.zeros_like(minus)
        for k in range(x.shape[1]):
            minus += (xb[:, k, None] - y[None, :, k]) ** 2
            plus += (xb[:, k, None] + y[None, :, k]) ** 2
        out[start:start + block] = (2.0 * np.arctan2(np.sqrt(minus), np.sqrt(plus))) ** 2
    return out


def flow_log_w2(x, y, subsample=None, rng=None):
    """Natural log of exact W2 between a particle cloud and a target sample.

    With ``subsample=None`` the whole clouds are used when both have the same
    size below the solver limit; otherwise ``subsample`` (or the solver limit)
    points are drawn from each without replacement.
    """
    n = min(x.shape[0], y.shape[0])
    k = subsample
    if k is None and (x.shape[0] != y.shape[0] or n > MAX_ASSIGNMENT_SIZE):
        k = min(n, MAX_ASSIGNMENT_SIZE)
    if k is not None:
        rng = _rng(rng)
        x = x[rng.choice(x.shape[0], size=min(k, x.shape[0]), replace=False)]
        y = y[rng.choice(y.shape[0], size=min(k, y.shape[0]), replace=False)]
    return math.log(max(exact_w2_geodesic(x, y), 1e-300))


def nll(cloud, mixture):
    """Summed negative log-likelihood of the particles under a vMF mixture on S^2."""
    x = _cloud(cloud)
    if x.shape[1] != 3:
        raise UnsupportedDimensionError("mixture NLL is only available on S^2")
    logs = np.stack([sphere.vmf_log_density(c, x) for c in mixture.components])
    logw = np.log(np.asarray(mixture.weights))[:, None]
    with np.errstate(divide="ignore"):
        return float(-np.sum(logsumexp(logs + logw, axis=0)))


def kl_vmf_uniform(kappa, d):
    """KL divergence from ``vMF(mu, kappa)`` on S^d to the uniform law.

    ``KL = kappa A(kappa) + log C_d(kappa) + log |S^d|`` where
    ``A = I_{(d+1)/2} / I_{(d-1)/2}`` is the mean resultant length.
    """
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if d < 1:
        raise ValueError("d must be >= 1")
    if kappa == 0:
        return 0.0
    nu = 0.5 * (d - 1)
    log_i_nu = float(log_bessel_iv(nu, kappa))
    log_i_nu1 = float(log_bessel_iv(nu + 1.0, kappa))
    if kappa < 1e-3:
        # cancellation regime: KL = kappa^2 / (2 (d+1)) + O(kappa^4)
        return kappa * kappa / (2.0 * (d + 1)) * (1.0 - kappa * kappa / (2.0 * (d + 1) * (d + 3)))
    mean_resultant = math.exp(log_i_nu1 - log_i_nu)
    # log C_d = nu log kappa - (nu+1) log(2 pi) - log I_nu; log |S^d| = log 2 + (nu+1) log pi - lgamma(nu+1)
    log_c = nu * math.log(kappa) - (nu + 1.0) * math.log(2.0 * math.pi) - log_i_nu
    log_area = math.log(2.0) + (nu + 1.0) * math.log(math.pi) - math.lgamma(nu + 1.0)
    return max(kappa * mean_resultant + log_c + log_area, 0.0)


@dataclass
class StudyReport:
    """Long-format results of a parameter sweep.

    ``rows`` holds ``(params_dict, rep, value)`` triples where ``params``
    carries the grid coordinates (including the metric or method name).
    """

    study: str
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, params, rep, value):
        self.rows.append((dict(params), int(rep), float(value)))

    @property
    def param_names(self):
        names = []
        for params, _, _ in self.rows:
            for k in params:
                if k not in names:
                    names.append(k)
        return names

    def cells(self):
        """Per-cell summary: list of ``(params, n, mean, std)``; std is None for n=1."""
        groups = {}
        for params, _, value in self.rows:
            key = tuple(sorted(params.items(), key=lambda kv: kv[0]))
            groups.setdefault(key, (params, []))[1].append(value)
        out = []
        for params, vals in groups.values():
            vals = np.asarray(vals)
            std = float(np.std(vals, ddof=1)) if vals.size >= 2 else None
            out.append((params, vals.size, float(np.mean(vals)), std))
        return out

    def values(self, **match):
        return np.array([v for p, _, v in self.rows if all(p.get(k) == m for k, m in match.items())])

    def summary(self, **match):
        vals = self.values(**match)
        if vals.size == 0:
            raise KeyError(f"no rows match {match}")
        return float(np.mean(vals)), (float(np.std(vals, ddof=1)) if vals.size >= 2 else None)

    def write(self, csv_path, json_path=None):
        names = self.param_names
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["study", *names, "rep", "value"])
            for params, rep, value in self.rows:
                w.writerow([self.study, *(_fmt(params.get(k, "")) for k in names), rep, _fmt(value)])
        if json_path is not None:
            with open(json_path, "w") as fh:
                json.dump({"study": self.study, **self.meta}, fh, indent=2, sort_keys=True, default=_json_default)
                fh.write("\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return v


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def pearson(a, b):
    return float(np.corrcoef(a, b)[0, 1])


def _cell_seeds(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def distortion_study(n_pairs=1000, rng=0, reps=1):
    """Correlation between geodesic and embedded distances of uniform pairs on S^2.

    Metrics: ``stereo`` (raw projection), ``embed`` (equidistant embedding)
    and ``embed_wrapped`` (``min(D, 2 pi - D)`` of the embedded distance).
    """
    seed = _seed_of(rng)
    rep = StudyReport("distortion", meta={"seed": seed, "n_pairs": n_pairs, "reps": reps})
    for r, g in enumerate(_cell_seeds(seed, reps)):
        a = sphere.sample_uniform(2, n_pairs, g)
        b = sphere.sample_uniform(2, n_pairs, g)
        geo = sphere.geodesic_distance(a, b)
        raw = np.linalg.norm(sphere.stereo_project(a) - sphere.stereo_project(b), axis=1)
        emb = np.linalg.norm(sphere.embed(a) - sphere.embed(b), axis=1)
        wrapped = np.minimum(emb, 2 * np.pi - emb)
        rep.add({"metric": "stereo"}, r, pearson(geo, raw))
        rep.add({"metric": "embed"}, r, pearson(geo, emb))
        rep.add({"metric": "embed_wrapped"}, r, pearson(geo, wrapped))
    return rep


def _seed_of(rng):
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(2**63 - 1))
    return 0 if rng is None else int(rng)


def _antipodal_pair(d, kappa, n, g):
    north = np.zeros(d + 1)
    north[-1] = 1.0
    src = sphere.sample_vmf(sphere.VonMisesFisher(-north, kappa), n, g)
    tgt = sphere.sample_vmf(sphere.VonMisesFisher(north, kappa), n, g)
    return EmpiricalMeasure(src), EmpiricalMeasure(tgt)


def _methods_eval(methods, mu, nu, cfg, g, n_rotations, pool):
    out = {}
    for m in methods:
        if m == "s3w":
            out[m] = s3w(mu, nu, cfg, cfg.projections(mu.dim, g))
        elif m == "ri_s3w":
            out[m] = ri_s3w(mu, nu, cfg, n_rotations, g)
        elif m == "ari_s3w":
            out[m] = ari_s3w(mu, nu, cfg, n_rotations, pool, g)
        elif m == "sw":
            out[m] = sw_ambient(mu, nu, cfg.p, cfg.n_projections, g)
        elif m == "vsw":
            out[m] = vsw(mu, nu, cfg.p, cfg.n_projections, g)
        else:
            raise ValueError(f"unknown method {m!r}")
    return out


def eps_stability_study(eps_grid, n_projections=128, n=2048, rng=0, reps=100,
                        methods=("s3w", "ri_s3w", "ari_s3w"), kappa=50.0, n_rotations=10, pool_size=100):
    """Distances between antipodal vMFs (south source, north target) across cap sizes.

    The same samples, projections and rotations are reused for every eps in
    a repetition so the sweep isolates the effect of the cap.
    """
    eps_grid = [float(e) for e in eps_grid]
    if not eps_grid or any(not 0.0 < e < 0.5 for e in eps_grid):
        raise ValueError("eps grid must be non-empty and inside (0, 0.5)")
    seed = _seed_of(rng)
    rep = StudyReport("eps", meta=dict(seed=seed, n_projections=n_projections, n=n, reps=reps, kappa=kappa,
                                       n_rotations=n_rotations, pool_size=pool_size, methods=list(methods),
                                       reuse_projections_across_rotations=False))
    pool = sphere.build_pool(2, pool_size, np.random.default_rng([seed, 1])) if "ari_s3w" in methods else None
    for r, g in enumerate(_cell_seeds(seed, reps)):
        mu, nu = _antipodal_pair(2, kappa, n, g)
        draw_seed = int(g.integers(2**63 - 1))
        for eps in eps_grid:
            cfg = S3WConfig(n_projections=n_projections, eps=eps)
            vals = _methods_eval(methods, mu, nu, cfg, np.random.default_rng(draw_seed), n_rotations, pool)
            for m, v in vals.items():
                rep.add({"method": m, "eps": eps}, r, v)
    return rep


EVOLUTION_KINDS = ("kappa", "angle", "projections", "rotations", "pool", "samples")

_EVOLUTION_DEFAULTS = {
    "kappa": [0.1, 1, 5, 10, 50, 100, 250],
    "angle": [k * np.pi / 6 for k in range(7)],
    "projections": [10, 50, 100, 200, 500],
    "rotations": [1, 5, 10, 20, 50],
    "pool": [5, 10, 20, 50, 100],
    "samples": [50, 100, 200, 500, 1000],
}


def evolution_study(kind, grid=None, rng=0, reps=100, n=500, n_projections=200, n_rotations=10,
                    pool_size=100, kappa=10.0, d=2, methods=("s3w", "ri_s3w", "ari_s3w")):
    """Sweep one parameter and record the distance family at each grid value.

    ``kappa``
        vMF(mu, kappa) against the uniform law (``kappa=0``); also records
        the closed-form KL as method ``kl``.
    ``angle``
        vMF(mu0, kappa) against vMF(R_theta mu0, kappa), rotation in the
        plane of the first two axes; ``mu0 = e_1``.
    ``projections`` / ``rotations`` / ``pool``
        Fixed pair vMF(e_1, kappa) vs vMF(-e_1, kappa); sweeps ``L``, ``N_R``
        or the pool size.
    ``samples``
        Two independent samples of the same vMF; the value shrinks with ``n``.
    """
    if kind not in EVOLUTION_KINDS:
        raise ValueError(f"unknown evolution kind {kind!r}; choose from {EVOLUTION_KINDS}")
    grid = list(_EVOLUTION_DEFAULTS[kind] if grid is None else grid)
    if not grid:
        raise ValueError("grid must be non-empty")
    seed = _seed_of(rng)
    meta = dict(kind=kind, grid=grid, seed=seed, reps=reps, n=n, n_projections=n_projections,
                n_rotations=n_rotations, pool_size=pool_size, kappa=kappa, d=d, methods=list(methods))
    rep = StudyReport(f"evolution_{kind}", meta=meta)
    e1 = np.zeros(d + 1)
    e1[0] = 1.0

    shared_pool = None
    if "ari_s3w" in methods and kind != "pool":
        shared_pool = sphere.build_pool(d, pool_size, np.random.default_rng([seed, 1]))

    for r, g in enumerate(_cell_seeds(seed, reps)):
        for value in grid:
            cell = np.random.default_rng([seed, r, grid.index(value)])
            cfg = S3WConfig(n_projections=n_projections)
            n_rot, pool, size = n_rotations, shared_pool, n
            if kind == "kappa":
                mu = sphere.sample_vmf(sphere.VonMisesFisher(e1, float(value)), n, cell)
                nu = sphere.sample_uniform(d, n, cell)
                if r == 0:
                    rep.add({"method": "kl", kind: value}, r, kl_vmf_uniform(float(value), d))
            elif kind == "angle":
                target = e1.copy()
                target[0], target[1] = math.cos(value), math.sin(value)
                mu = sphere.sample_vmf(sphere.VonMisesFisher(e1, kappa), n, cell)
                nu = sphere.sample_vmf(sphere.VonMisesFisher(target, kappa), n, cell)
            elif kind == "samples":
                size = int(value)
                mu = sphere.sample_vmf(sphere.VonMisesFisher(e1, kappa), size, cell)
                nu = sphere.sample_vmf(sphere.VonMisesFisher(e1, kappa), size, cell)
            else:
                mu = sphere.sample_vmf(sphere.VonMisesFisher(e1, kappa), n, cell)
                nu = sphere.sample_vmf(sphere.VonMisesFisher(-e1, kappa), n, cell)
                if kind == "projections":
                    cfg = S3WConfig(n_projections=int(value))
                elif kind == "rotations":
                    n_rot = int(value)
                    if shared_pool is not None and n_rot > len(shared_pool):
                        raise ValueError("rotation count exceeds the pool size")
                elif kind == "pool":
                    pool = sphere.build_pool(d, int(value), cell)
                    n_rot = min(n_rotations, int(value))
            vals = _methods_eval(methods, EmpiricalMeasure(mu), EmpiricalMeasure(nu), cfg, cell, n_rot, pool)
            for m, v in vals.items():
                rep.add({"method": m, kind: value}, r, v)
    return rep


def _median_times(fns, reps):
    """Median wall time of each callable, timed round-robin so drift hits all alike."""
    for fn in fns:
        fn()  # warm-up, discarded
    times = [[] for _ in fns]
    for _ in range(reps):
        for fn, bucket in zip(fns, times):
            t0 = time.perf_counter()
            fn()
            bucket.append(time.perf_counter() - t0)
    return [float(np.median(t)) for t in times]


def bench_runtime(methods=("s3w", "ri_s3w", "ari_s3w"), n_grid=(500,), d=2, l_grid=(200,), r_grid=(10,),
                  reps=5, pool_size=100, rng=0, kappa=10.0):
    """Median wall time per call over a grid of sample sizes, projections and rotations.

    The ARI pool is generated once per cell outside the timed region.
    """
    if reps < 3:
        raise ValueError("reps must be >= 3")
    seed = _seed_of(rng)
    rep = StudyReport("bench", meta=dict(methods=list(methods), n_grid=list(n_grid), d=d, l_grid=list(l_grid),
                                         r_grid=list(r_grid), reps=reps, pool_size=pool_size, seed=seed,
                                         clock="perf_counter", statistic="median", order="round-robin across methods",
                                         reuse_projections_across_rotations=False, pool_time_excluded=True))
    e1 = np.zeros(d + 1)
    e1[0] = 1.0
    g = np.random.default_rng(seed)
    pool = sphere.build_pool(d, pool_size, g) if "ari_s3w" in methods else None
    for n in n_grid:
        mu = EmpiricalMeasure(sphere.sample_vmf(sphere.VonMisesFisher(e1, kappa), int(n), g))
        nu = EmpiricalMeasure(sphere.sample_vmf(sphere.VonMisesFisher(-e1, kappa), int(n), g))
        for n_proj in l_grid:
            cfg = S3WConfig(n_projections=int(n_proj))
            for n_rot in r_grid:
                active = [m for m in methods if m not in ("s3w", "sw", "vsw") or n_rot == r_grid[0]]
                cell = np.random.default_rng([seed, int(n), int(n_proj), int(n_rot)])
                calls = [lambda m=m: _methods_eval([m], mu, nu, cfg, cell, int(n_rot), pool) for m in active]
                for m, t in zip(active, _median_times(calls, reps)):
                    rep.add({"method": m, "N": int(n), "L": int(n_proj), "N_R": int(n_rot)}, 0, t)
    return rep


def pool_generation_times(d_grid=(2, 10, 100), sizes=(100, 1000), reps=3, rng=0):
    """Median wall time of building a rotation pool."""
    seed = _seed_of(rng)
    rep = StudyReport("pool_generation", meta=dict(d_grid=list(d_grid), sizes=list(sizes), reps=reps, seed=seed))
    for d in d_grid:
        for size in sizes:
            g = np.random.default_rng([seed, int(d), int(size)])
            (t,) = _median_times([lambda: sphere.build_pool(int(d), int(size), g)], reps)
            rep.add({"d": int(d), "pool": int(size)}, 0, t)
    return rep
