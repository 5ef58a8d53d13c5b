"""Geometry and sampling on the unit hypersphere S^d in R^(d+1).

Points are plain ``numpy`` arrays whose last axis holds the d+1 ambient
coordinates; a batch of points is an array of shape ``(n, d+1)``.  The last
coordinate is the polar axis: the north pole is ``[0, ..., 0, 1]`` and the
south pole ``[0, ..., 0, -1]``.

The stereographic projection used here maps onto the equator plane
(``s[:d] / (1 - s[d])``), and the distortion-correcting map ``h1`` turns its
image into the azimuthal equidistant chart centred at the south pole.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateStepError, DomainError, UnsupportedDimensionError

__all__ = [
    "as_points",
    "geodesic_distance",
    "stereo_project",
    "stereo_inverse",
    "epsilon_cap",
    "h1",
    "embed",
    "sample_uniform",
    "VonMisesFisher",
    "VmfMixture",
    "sample_vmf",
    "vmf_log_density",
    "sample_rotation",
    "sample_rotations",
    "RotationPool",
    "build_pool",
    "project_tangent",
    "exp_map",
    "retract_normalize",
    "icosahedron_vertices",
    "DEFAULT_EPS",
]

DEFAULT_EPS = 1e-6
UNIT_TOL = 1e-6
TANGENT_TOL = 1e-10


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def as_points(x, tol=UNIT_TOL):
    """Validate a (batch of) sphere point(s) and renormalize to unit norm.

    Raises ``ValueError`` if the array has fewer than 2 ambient coordinates,
    contains non-finite values, or any norm deviates from 1 by more than
    ``tol``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] < 2:
        raise ValueError("sphere points need at least 2 ambient coordinates (d >= 1)")
    if not np.all(np.isfinite(x)):
        raise ValueError("sphere points must be finite")
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(np.abs(norms - 1.0) > tol):
        raise ValueError(f"points are not unit norm within {tol}")
    return x / norms


def geodesic_distance(a, b):
    """Great-circle distance ``arccos(<a, b>)`` in ``[0, pi]``.

    Evaluated as ``2 atan2(|a - b|, |a + b|)``, which agrees with the arccos
    form for unit vectors but stays accurate for nearly equal or nearly
    antipodal points.  Broadcasts over leading axes.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return 2.0 * np.arctan2(np.linalg.norm(a - b, axis=-1), np.linalg.norm(a + b, axis=-1))


def stereo_project(s):
    """Stereographic projection from the north pole onto the equator plane."""
    s = np.asarray(s, dtype=float)
    top = s[..., -1]
    if np.any(top >= 1.0):
        raise DomainError("stereographic projection is undefined at the north pole; apply epsilon_cap first")
    return s[..., :-1] / (1.0 - top)[..., None]


def stereo_inverse(x):
    """Inverse of :func:`stereo_project`; maps R^d onto S^d minus the north pole."""
    x = np.asarray(x, dtype=float)
    sq = np.sum(x * x, axis=-1)
    # 1 - s_{d+1} = 2 / (|x|^2 + 1); avoids cancellation for large |x|
    scale = 2.0 / (sq + 1.0)
    top = (sq - 1.0) / (sq + 1.0)
    return np.concatenate([scale[..., None] * x, top[..., None]], axis=-1)


def epsilon_cap(s, eps=DEFAULT_EPS):
    """Clamp points above height ``1 - eps`` onto the circle at that height.

    The horizontal part keeps its direction and is rescaled so the result stays
    on the sphere.  At the exact north pole the direction ``e_1`` is used.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    s = np.array(s, dtype=float, copy=True)
    level = 1.0 - eps
    hit = s[..., -1] > level
    if not np.any(hit):
        return s
    horiz = s[..., :-1]
    r = np.linalg.norm(horiz, axis=-1)
    flat = hit & (r == 0.0)
    if np.any(flat):
        horiz[flat] = 0.0
        horiz[flat, 0] = 1.0
        r = np.where(flat, 1.0, r)
    target = np.sqrt(1.0 - level * level)
    factor = np.where(hit, target / np.where(r == 0.0, 1.0, r), 1.0)
    s[..., :-1] = horiz * factor[..., None]
    s[..., -1] = np.where(hit, level, s[..., -1])
    return s


def h1(x):
    """Distortion-correcting radial map ``arccos(-s_{d+1}) x / |x|``.

    Here ``s_{d+1} = (|x|^2 - 1) / (|x|^2 + 1)`` is the height of the
    preimage of ``x``, so the output radius is the angle between that
    preimage and the south pole.  ``arccos((1 - t^2) / (1 + t^2)) = 2 atan(t)``
    is used for accuracy near the origin; ``h1(0) = 0``.
    """
    x = np.asarray(x, dtype=float)
    t = np.linalg.norm(x, axis=-1, keepdims=True)
    safe = np.where(t == 0.0, 1.0, t)
    return np.where(t == 0.0, 0.0, 2.0 * np.arctan(t) * x / safe)


def embed(s, eps=DEFAULT_EPS):
    """Azimuthal equidistant embedding ``h1(stereo_project(epsilon_cap(s)))``.

    Equals ``angle(s, south pole) * s[:d] / |s[:d]|``.  Computed directly from
    the sphere coordinates, which avoids the overflow-prone intermediate
    stereographic image near the north pole.  The formula is invariant to
    positive rescaling of ``s``.

    Parameters
    ----------
    s : array_like, shape (..., d+1)
        Points on the sphere.
    eps : float
        Cap parameter in (0, 1).

    Returns
    -------
    ndarray, shape (..., d)
    """
    s = epsilon_cap(s, eps)
    horiz = s[..., :-1]
    r = np.linalg.norm(horiz, axis=-1, keepdims=True)
    angle = np.arctan2(r, -s[..., -1:])
    return np.where(r == 0.0, 0.0, angle * horiz / np.where(r == 0.0, 1.0, r))


def sample_uniform(d, n, rng=None):
    """Draw ``n`` points uniformly on S^d (normalized Gaussians)."""
    if d < 1 or n < 1:
        raise ValueError("need d >= 1 and n >= 1")
    g = _rng(rng).standard_normal((n, d + 1))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class VonMisesFisher:
    """von Mises-Fisher law with mean direction ``mu`` and concentration ``kappa``.

    ``kappa == 0`` is the uniform distribution.
    """

    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        mu = as_points(self.mu)
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @property
    def dim(self):
        return self.mu.shape[-1] - 1


@dataclass(frozen=True, eq=False)
class VmfMixture:
    components: tuple
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        w = np.full(len(comps), 1.0 / len(comps)) if self.weights is None else np.asarray(self.weights, float)
        if w.shape != (len(comps),) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.components[0].dim

    def sample(self, n, rng=None, stratified=False):
        """Draw ``n`` points.  With ``stratified`` each component receives
        ``round(n * w_j)`` points (used by the 12-vMF benchmark target)."""
        rng = _rng(rng)
        if stratified:
            counts = np.floor(n * self.weights).astype(int)
            counts[: n - counts.sum()] += 1
        else:
            counts = rng.multinomial(n, self.weights)
        parts = [sample_vmf(c, k, rng) for c, k in zip(self.components, counts) if k > 0]
        return np.concatenate(parts, axis=0)


def _wood_cosines(kappa, m, n, rng):
    """Sample ``w = <mu, x>`` for vMF on S^(m-1) by Wood's rejection scheme."""
    if kappa == 0.0:
        return 1.0 - 2.0 * rng.beta((m - 1) / 2.0, (m - 1) / 2.0, size=n)
    # b written in the cancellation-free form
    b = (m - 1) / (2.0 * kappa + np.sqrt(4.0 * kappa * kappa + (m - 1) ** 2))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + (m - 1) * np.log(1.0 - x0 * x0)
    out = np.empty(n)
    filled = 0
    while filled < n:
        k = max(2 * (n - filled), 16)
        z = rng.beta((m - 1) / 2.0, (m - 1) / 2.0, size=k)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.uniform(size=k)
        ok = kappa * w + (m - 1) * np.log(1.0 - x0 * w) - c >= np.log(u)
        acc = w[ok][: n - filled]
        out[filled : filled + acc.size] = acc
        filled += acc.size
    return out


def sample_vmf(dist, n, rng=None):
    """Draw ``n`` i.i.d. points from a :class:`VonMisesFisher`.

    The cosine to the mean comes from Wood's rejection sampler; the tangential
    part is a uniform direction; a Householder reflection then carries the
    north pole onto ``mu``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(rng)
    m = dist.mu.shape[-1]
    w = _wood_cosines(float(dist.kappa), m, n, rng)
    v = rng.standard_normal((n, m - 1))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    x = np.concatenate([np.sqrt(np.clip(1.0 - w * w, 0.0, None))[:, None] * v, w[:, None]], axis=1)
    north = np.zeros(m)
    north[-1] = 1.0
    u = north - dist.mu
    nu = np.dot(u, u)
    if nu > 1e-30:
        x = x - 2.0 * np.outer(x @ u, u) / nu
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _log_sinh(k):
    return k + np.log1p(-np.exp(-2.0 * k)) - np.log(2.0)


def vmf_log_density(dist, s):
    """Log-density of a vMF on S^2 with respect to surface area.

    ``log(kappa / (4 pi sinh kappa)) + kappa <mu, s>``; the ``kappa -> 0``
    limit gives ``-log(4 pi)``.
    """
    if dist.dim != 2:
        raise UnsupportedDimensionError("closed-form vMF density is implemented for S^2 only")
    s = np.asarray(s, dtype=float)
    k = float(dist.kappa)
    if k < 1e-8:
        # log(k / sinh k) = -k^2/6 + O(k^4)
        log_c = -np.log(4.0 * np.pi) - k * k / 6.0
    else:
        log_c = np.log(k) - np.log(4.0 * np.pi) - _log_sinh(k)
    return log_c + k * (s @ dist.mu)


def sample_rotations(d, n, rng=None):
    """Draw ``n`` Haar-distributed rotations of SO(d+1), shape ``(n, d+1, d+1)``.

    QR of a Gaussian matrix, columns sign-corrected so that the triangular
    factor has a positive diagonal, then the first column negated where the
    determinant is -1.
    """
    if d < 1 or n < 1:
        raise ValueError("need d >= 1 and n >= 1")
    g = _rng(rng).standard_normal((n, d + 1, d + 1))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diagonal(r, axis1=1, axis2=2))
    signs[signs == 0] = 1.0
    q = q * signs[:, None, :]
    flip = np.linalg.det(q) < 0
    q[flip, :, 0] *= -1.0
    return q


def sample_rotation(d, rng=None):
    """Draw one Haar-distributed rotation of SO(d+1)."""
    return sample_rotations(d, 1, rng)[0]


class RotationPool:
    """Immutable bank of pregenerated rotations, subsampled without replacement.

    Build with :func:`build_pool`.  The pool holds no generator of its own;
    each :meth:`subsample` call takes the caller's RNG.
    """

    def __init__(self, rotations, seed=None):
        rot = np.array(rotations, dtype=float)
        if rot.ndim != 3 or rot.shape[1] != rot.shape[2]:
            raise ValueError("rotations must have shape (N, d+1, d+1)")
        rot.setflags(write=False)
        self._rotations = rot
        self.seed = seed

    @property
    def rotations(self):
        return self._rotations

    @property
    def dim(self):
        return self._rotations.shape[1] - 1

    def __len__(self):
        return self._rotations.shape[0]

    def subsample_indices(self, n_rotations, rng=None):
        if n_rotations < 1 or n_rotations > len(self):
            raise ValueError(f"cannot subsample {n_rotations} rotations from a pool of {len(self)}")
        return _rng(rng).choice(len(self), size=n_rotations, replace=False)

    def subsample(self, n_rotations, rng=None):
        return self._rotations[self.subsample_indices(n_rotations, rng)]


def build_pool(d, n_total, rng=None):
    """Pregenerate ``n_total`` Haar rotations of SO(d+1)."""
    rng = _rng(rng)
    return RotationPool(sample_rotations(d, n_total, rng))


def project_tangent(s, g):
    """Remove the radial component: ``g - <g, s> s``."""
    s = np.asarray(s, dtype=float)
    g = np.asarray(g, dtype=float)
    return g - np.sum(g * s, axis=-1, keepdims=True) * s


def exp_map(base, direction):
    """Exponential map ``cos|v| x + sin|v| v/|v|``; a zero step returns ``base``."""
    base = np.asarray(base, dtype=float)
    v = np.asarray(direction, dtype=float)
    nv = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(np.abs(np.sum(base * v, axis=-1, keepdims=True)) > TANGENT_TOL * (1.0 + nv)):
        raise ValueError("direction is not tangent to the base point; use project_tangent first")
    safe = np.where(nv == 0.0, 1.0, nv)
    out = np.cos(nv) * base + np.sin(nv) * v / safe
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def retract_normalize(s, step):
    """Retraction ``(s + step) / |s + step|``.

    Raises :class:`DegenerateStepError` if any ``s + step`` vanishes.
    """
    y = np.asarray(s, dtype=float) + np.asarray(step, dtype=float)
    n = np.linalg.norm(y, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise DegenerateStepError("step cancels the base point")
    return y / n


def icosahedron_vertices():
    """The 12 unit vertices of a regular icosahedron (golden-ratio construction)."""
    g = (1.0 + np.sqrt(5.0)) / 2.0
    v = []
    for a in (-1.0, 1.0):
        for b in (-1.0, 1.0):
            v += [(0.0, a, b * g), (a, b * g, 0.0), (b * g, 0.0, a)]
    v = np.array(v)
    return v / np.linalg.norm(v, axis=1, keepdims=True)
