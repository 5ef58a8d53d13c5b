"""Sliced Wasserstein distances between discrete measures on S^d.

The stereographic family (S3W, RI-S3W, ARI-S3W, Max-S3W) slices the
azimuthal equidistant embedding :func:`s3wkit.sphere.embed` of each measure
along random directions of R^d and averages one-dimensional Wasserstein
costs.  ``sw_ambient`` and ``vsw`` are the usual baselines that slice the
ambient coordinates directly.

All estimators take explicit random generators or projection sets and are
deterministic given them.
"""

from dataclasses import dataclass

import numpy as np

from . import sphere
from .ot1d import WeightedSamples1D, uniform_cost_pp, weighted_cost_pp
from .exceptions import UnsupportedDimensionError

__all__ = [
    "EmpiricalMeasure",
    "ProjectionSet",
    "S3WConfig",
    "slice_measure",
    "sliced_cost_pp",
    "s3w",
    "s3w_pp",
    "s3w_over_rotations",
    "ri_s3w",
    "ari_s3w",
    "max_s3w",
    "sw_ambient",
    "vsw",
]


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Weighted point cloud on the sphere; uniform weights when omitted."""

    points: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        pts = sphere.as_points(np.atleast_2d(self.points))
        n = pts.shape[0]
        if n == 0:
            raise ValueError("empty measure")
        if self.weights is None:
            w = np.full(n, 1.0 / n)
            uniform = True
        else:
            w = WeightedSamples1D(np.zeros(n), self.weights).weights
            uniform = bool(np.all(w == w[0]))
        pts.setflags(write=False)
        w = np.array(w)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_uniform", uniform)

    @property
    def dim(self):
        return self.points.shape[1] - 1

    def __len__(self):
        return self.points.shape[0]

    @property
    def is_uniform(self):
        return self._uniform

    def rotated(self, rotation):
        """Pushforward by a rotation matrix, ``x -> R x``."""
        return EmpiricalMeasure(self.points @ np.asarray(rotation).T, None if self._uniform else self.weights)


def _as_measure(m):
    return m if isinstance(m, EmpiricalMeasure) else EmpiricalMeasure(m)


@dataclass(frozen=True, eq=False)
class ProjectionSet:
    """``L`` unit slicing directions in R^(d')."""

    dirs: np.ndarray
    seed: object = None

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.dirs, dtype=float))
        norms = np.linalg.norm(d, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("projection directions must be unit vectors")
        d.setflags(write=False)
        object.__setattr__(self, "dirs", d)

    @classmethod
    def sample(cls, dim, n_projections, rng=None):
        """Uniform directions on the unit sphere of R^dim."""
        seed = rng if isinstance(rng, (int, np.integer)) else None
        g = _rng(rng).standard_normal((n_projections, dim))
        return cls(g / np.linalg.norm(g, axis=1, keepdims=True), seed)

    def __len__(self):
        return self.dirs.shape[0]

    @property
    def dim(self):
        return self.dirs.shape[1]


@dataclass(frozen=True)
class S3WConfig:
    """Estimator settings.  ``d_prime`` defaults to the sphere dimension ``d``
    (the embedding keeps the dimension); it is carried for pluggable
    embeddings of higher output dimension."""

    p: float = 2.0
    n_projections: int = 100
    eps: float = sphere.DEFAULT_EPS
    d_prime: int = None
    reuse_projections: bool = False

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError("p must be >= 1")
        if self.n_projections < 1:
            raise ValueError("need at least one projection")
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")

    def embedding_dim(self, d):
        return d if self.d_prime is None else self.d_prime

    def projections(self, d, rng):
        return ProjectionSet.sample(self.embedding_dim(d), self.n_projections, rng)


def _check_pair(mu, nu):
    mu, nu = _as_measure(mu), _as_measure(nu)
    if mu.dim != nu.dim:
        raise ValueError(f"sphere dimension mismatch: {mu.dim} vs {nu.dim}")
    return mu, nu


def slice_measure(m, theta, eps=sphere.DEFAULT_EPS):
    """One-dimensional pushforward ``<embed(x), theta>`` carrying the weights."""
    m = _as_measure(m)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (m.dim,):
        raise ValueError(f"direction must have shape ({m.dim},)")
    return WeightedSamples1D(sphere.embed(m.points, eps) @ theta, m.weights)


def sliced_cost_pp(u, a, v, b, dirs, p, uniform):
    """Per-direction ``W_p^p`` between feature clouds ``u`` (n, k), ``v`` (m, k).

    Uses sort-and-match when ``uniform`` (uniform weights, n == m) and the
    quantile coupling otherwise.
    """
    pu = dirs @ u.T
    pv = dirs @ v.T
    if uniform:
        return uniform_cost_pp(pu, pv, p)
    return weighted_cost_pp(pu, a, pv, b, p)


def _fast(mu, nu):
    return mu.is_uniform and nu.is_uniform and len(mu) == len(nu)


def _s3w_slices(mu, nu, cfg, proj):
    if proj.dim != mu.dim:
        raise ValueError(f"projection dimension {proj.dim} does not match embedding dimension {mu.dim}")
    u = sphere.embed(mu.points, cfg.eps)
    v = sphere.embed(nu.points, cfg.eps)
    return sliced_cost_pp(u, mu.weights, v, nu.weights, proj.dirs, cfg.p, _fast(mu, nu))


def s3w_pp(mu, nu, cfg, proj):
    """Monte-Carlo estimate of ``S3W_p^p`` over the directions in ``proj``."""
    mu, nu = _check_pair(mu, nu)
    return float(np.mean(_s3w_slices(mu, nu, cfg, proj)))


def s3w(mu, nu, cfg, proj):
    """Stereographic spherical sliced Wasserstein distance ``S3W_p``.

    Parameters
    ----------
    mu, nu : EmpiricalMeasure or array_like (n, d+1)
        Measures on the same sphere S^d.
    cfg : S3WConfig
        Order ``p`` and cap ``eps``; ``n_projections`` is ignored here.
    proj : ProjectionSet
        Slicing directions in R^d.  Sharing one set between calls makes the
        estimate a pseudo-metric in its own right.

    Returns
    -------
    float
        ``((1/L) sum_l W_p^p(slice_l(mu), slice_l(nu)))^(1/p)``.
    """
    return max(s3w_pp(mu, nu, cfg, proj), 0.0) ** (1.0 / cfg.p)


def s3w_over_rotations(mu, nu, cfg, rotations, rng=None, proj=None):
    """Average of ``S3W_p(R mu, R nu)`` over the given rotation matrices.

    Fresh projections are drawn for every rotation unless ``proj`` is given or
    ``cfg.reuse_projections`` is set (then one set is drawn and shared).
    """
    mu, nu = _check_pair(mu, nu)
    rng = _rng(rng)
    if proj is None and cfg.reuse_projections:
        proj = cfg.projections(mu.dim, rng)
    vals = np.empty(len(rotations))
    for r, rot in enumerate(rotations):
        pr = proj if proj is not None else cfg.projections(mu.dim, rng)
        vals[r] = s3w(mu.rotated(rot), nu.rotated(rot), cfg, pr)
    return float(np.mean(vals))


def ri_s3w(mu, nu, cfg, n_rotations, rng=None):
    """Rotationally invariant S3W with ``n_rotations`` Haar rotations."""
    mu, nu = _check_pair(mu, nu)
    rng = _rng(rng)
    rots = sphere.sample_rotations(mu.dim, n_rotations, rng)
    return s3w_over_rotations(mu, nu, cfg, rots, rng)


def ari_s3w(mu, nu, cfg, n_rotations, pool, rng=None):
    """Amortized RI-S3W: rotations subsampled (without replacement) from a
    pregenerated :class:`~s3wkit.sphere.RotationPool`."""
    mu, nu = _check_pair(mu, nu)
    if pool.dim != mu.dim:
        raise ValueError("rotation pool dimension does not match the measures")
    rng = _rng(rng)
    rots = pool.subsample(n_rotations, rng)
    return s3w_over_rotations(mu, nu, cfg, rots, rng)


def max_s3w(mu, nu, cfg, candidates=None, rng=None, proj=None):
    """Best-of-candidates lower bound on ``sup_theta W_p(slice_theta)``.

    Either ``candidates`` directions are sampled from ``rng`` or a fixed
    ``proj`` is scanned.
    """
    mu, nu = _check_pair(mu, nu)
    if proj is None:
        if candidates is None or candidates < 1:
            raise ValueError("need candidates >= 1 or a projection set")
        proj = ProjectionSet.sample(cfg.embedding_dim(mu.dim), candidates, _rng(rng))
    best = float(np.max(_s3w_slices(mu, nu, cfg, proj)))
    return max(best, 0.0) ** (1.0 / cfg.p)


def _ambient(mu, nu, p, dirs):
    costs = sliced_cost_pp(mu.points, mu.weights, nu.points, nu.weights, dirs, p, _fast(mu, nu))
    return max(float(np.mean(costs)), 0.0) ** (1.0 / p)


def ambient_directions(d, n_projections, rng=None):
    g = _rng(rng).standard_normal((n_projections, d + 1))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def equator_directions(d, n_projections, rng=None):
    if d < 2:
        raise UnsupportedDimensionError("vertical slicing needs d >= 2")
    g = _rng(rng).standard_normal((n_projections, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.concatenate([g, np.zeros((n_projections, 1))], axis=1)


def sw_ambient(mu, nu, p=2.0, n_projections=100, rng=None):
    """Classic sliced Wasserstein distance in the ambient R^(d+1)."""
    mu, nu = _check_pair(mu, nu)
    return _ambient(mu, nu, p, ambient_directions(mu.dim, n_projections, rng))


def vsw(mu, nu, p=2.0, n_projections=100, rng=None):
    """Vertical sliced Wasserstein: directions uniform on the equator.

    A pseudo-metric only; measures that differ along the polar axis alone are
    at distance zero.
    """
    mu, nu = _check_pair(mu, nu)
    return _ambient(mu, nu, p, equator_directions(mu.dim, n_projections, rng))
