"""Analytic gradients of sliced losses and particle gradient flows on S^d.

Gradients hold the Monte-Carlo draws (projections, rotations) fixed and use
the monotone matching of each slice as if it were constant, which is exact
away from sort ties.  The embedding is differentiated through its
scale-invariant ambient extension, so the Euclidean gradient of the S3W loss
is already tangent to the sphere.
"""

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import sphere
from .distances import ambient_directions, equator_directions
from .exceptions import DegenerateStepError
from .ot1d import quantile_coupling

__all__ = [
    "CLAMPED_CAP",
    "CLAMPED_SOUTH",
    "embed_with_jacobian",
    "embed_jacobian",
    "LossGrad",
    "sliced_loss_grad",
    "s3w_grad",
    "rotated_s3w_grad",
    "ambient_grad",
    "pgd_step",
    "AdamState",
    "adam_step_projected",
    "FlowConfig",
    "FlowTrace",
    "rotation_count",
    "run_flow",
    "icosa12",
]

CLAMPED_CAP = 1
CLAMPED_SOUTH = 2
TIE_TOL = 1e-12
SLICE_BLOCK = 16
LOSSES = ("s3w", "ri_s3w", "ari_s3w", "sw", "vsw")


def embed_with_jacobian(x, eps=sphere.DEFAULT_EPS):
    """Embedding of each point and its ``d x (d+1)`` Jacobian.

    Returns
    -------
    e : ndarray (n, d)
    jac : ndarray (n, d, d+1)
    flags : ndarray (n,) of int
        ``CLAMPED_CAP`` where the point lies in the eps-cap (the Jacobian is
        set to zero there), ``CLAMPED_SOUTH`` at the south pole (the
        continuous limit ``[I/|z|, 0]`` is returned), 0 otherwise.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, m = x.shape
    d = m - 1
    e = sphere.embed(x, eps)
    w = x[:, :-1]
    z = x[:, -1]
    r = np.linalg.norm(w, axis=1)
    q = r * r + z * z
    capped = z > (1.0 - eps) * np.sqrt(q)
    south = (r == 0.0) & ~capped
    ok = ~(capped | south)

    jac = np.zeros((n, d, m))
    rs = np.where(ok, r, 1.0)
    u = w / rs[:, None]
    angle = np.arctan2(r, -z)
    da_dr = -z / q
    da_dz = r / q
    radial = np.einsum("ni,nj->nij", u, u)
    eye = np.eye(d)
    jw = da_dr[:, None, None] * radial + (angle / rs)[:, None, None] * (eye - radial)
    jac[:, :, :d] = np.where(ok[:, None, None], jw, 0.0)
    jac[:, :, d] = np.where(ok[:, None], da_dz[:, None] * u, 0.0)
    if np.any(south):
        jac[south, :, :d] = eye / np.abs(z[south])[:, None, None]

    flags = np.zeros(n, dtype=int)
    flags[capped] = CLAMPED_CAP
    flags[south] = CLAMPED_SOUTH
    return e, jac, flags


def embed_jacobian(s, eps=sphere.DEFAULT_EPS):
    """Jacobian of :func:`s3wkit.sphere.embed` at a single point.

    Returns ``(jac, flag)``; see :func:`embed_with_jacobian` for the flag
    values.  Never raises on singular points so flows can proceed.
    """
    _, jac, flags = embed_with_jacobian(np.asarray(s, dtype=float)[None, :], eps)
    return jac[0], int(flags[0])


@dataclass
class LossGrad:
    """Monte-Carlo loss (mean of per-slice ``W_p^p``) with its gradient."""

    value: float
    grad: np.ndarray
    ties: int = 0
    clamped: int = 0


def _dpow(diff, p):
    if p == 2:
        return 2.0 * diff
    if p == 1:
        return np.sign(diff)
    return p * np.abs(diff) ** (p - 1) * np.sign(diff)


def _pow(diff, p):
    if p == 2:
        return diff * diff
    return np.abs(diff) ** p


def sliced_loss_grad(u, v, dirs, p):
    """Loss ``mean_l W_p^p(<u, theta_l>, <v, theta_l>)`` and its gradient in ``u``.

    ``u`` (n, k) and ``v`` (m, k) carry uniform weights; ``n != m`` goes
    through the quantile coupling.

    Returns
    -------
    value : float
    grad_u : ndarray (n, k)
    ties : int
        Adjacent sorted values of ``u`` closer than ``TIE_TOL`` (points where
        the matching, hence the gradient, is ambiguous).
    """
    n, m = u.shape[0], v.shape[0]
    n_slices = dirs.shape[0]
    if n != m:
        iu, iv, dz = quantile_coupling(np.arange(1, n + 1) / n, np.arange(1, m + 1) / m)
    total = 0.0
    ties = 0
    grad_u = np.zeros((n, dirs.shape[1]))
    offsets = (np.arange(SLICE_BLOCK) * n)[:, None]
    # blocks of slices keep the working set in cache
    for start in range(0, n_slices, SLICE_BLOCK):
        block = dirs[start : start + SLICE_BLOCK]
        b = block.shape[0]
        pu = block @ u.T
        sv = block @ v.T
        sv.sort(axis=1)
        # flat indices into the row-major (b, n) array; cheaper than *_along_axis
        flat = np.argsort(pu, axis=1)
        flat += offsets[:b]
        flat = flat.ravel()
        su = pu.ravel().take(flat).reshape(b, n)
        ties += int(np.count_nonzero(su[:, 1:] - su[:, :-1] <= TIE_TOL))
        if n == m:
            diff = su - sv
            total += float(np.sum(_pow(diff, p))) / n
            dsorted = _dpow(diff, p) / n
        else:
            diff = su[:, iu] - sv[:, iv]
            total += float(np.sum(_pow(diff, p) * dz))
            contrib = _dpow(diff, p) * dz
            dsorted = np.empty((b, n))
            for row in range(b):
                dsorted[row] = np.bincount(iu, weights=contrib[row], minlength=n)
        g = np.empty_like(pu)
        g.ravel()[flat] = dsorted.ravel()
        grad_u += g.T @ block
    return total / n_slices, grad_u / n_slices, ties


def s3w_grad(x, y, cfg, proj, rotation=None):
    """Gradient of the S3W loss ``S3W_p^p`` w.r.t. the particles ``x``.

    Parameters
    ----------
    x : ndarray (n, d+1)
        Particles (uniform weights).
    y : ndarray (m, d+1) or EmpiricalMeasure
        Target sample; must have uniform weights.
    cfg : S3WConfig
    proj : ProjectionSet
        Directions held fixed.
    rotation : ndarray, optional
        Evaluate at ``(R x, R y)``; the gradient is pulled back through ``R^T``.

    Returns
    -------
    LossGrad
    """
    x, y = _uniform_arrays(x, y)
    if rotation is not None:
        x = x @ rotation.T
        y = y @ rotation.T
    ex, jac, flags = embed_with_jacobian(x, cfg.eps)
    ey = sphere.embed(y, cfg.eps)
    value, ge, ties = sliced_loss_grad(ex, ey, proj.dirs, cfg.p)
    gx = np.einsum("nk,nkj->nj", ge, jac)
    if rotation is not None:
        gx = gx @ rotation
    return LossGrad(value, gx, ties, int(np.count_nonzero(flags)))


def rotated_s3w_grad(x, y, cfg, rotations, rng=None, projections=None):
    """Gradient of the rotation-averaged loss ``mean_r S3W_p^p(R_r x, R_r y)``.

    Fresh projections per rotation are drawn from ``rng`` unless a list of
    ``projections`` (one per rotation) is supplied.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    x, y = _uniform_arrays(x, y)
    total = np.zeros_like(x)
    value = 0.0
    ties = clamped = 0
    for k, rot in enumerate(rotations):
        proj = projections[k] if projections is not None else cfg.projections(x.shape[1] - 1, rng)
        lg = s3w_grad(x, y, cfg, proj, rotation=rot)
        total += lg.grad
        value += lg.value
        ties += lg.ties
        clamped += lg.clamped
    k = len(rotations)
    return LossGrad(value / k, total / k, ties, clamped)


def ambient_grad(x, y, dirs, p):
    """Gradient of the ambient sliced loss (SW or VSW, depending on ``dirs``)."""
    x, y = _uniform_arrays(x, y)
    value, gx, ties = sliced_loss_grad(x, y, dirs, p)
    return LossGrad(value, gx, ties, 0)


def _uniform_arrays(x, y):
    for m in (x, y):
        w = getattr(m, "weights", None)
        if w is not None and not np.all(w == w[0]):
            raise NotImplementedError("gradients are implemented for uniform weights only")
    x = np.asarray(getattr(x, "points", x), dtype=float)
    y = np.asarray(getattr(y, "points", y), dtype=float)
    if x.shape[1] != y.shape[1]:
        raise ValueError("dimension mismatch between particles and target")
    return x, y


def pgd_step(x, grads, lr, retraction="normalize"):
    """One projected gradient step on the sphere.

    ``normalize``: ``x' = (x - lr g) / |x - lr g|``.  ``exp_map``: the
    Riemannian gradient ``g - <g, x> x`` is followed along the geodesic.

    Returns
    -------
    x_new : ndarray
    skipped : int
        Particles left in place because their step was degenerate.
    """
    x = np.asarray(x, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if grads.shape != x.shape:
        raise ValueError("gradient shape does not match the particles")
    if retraction == "exp_map":
        return sphere.exp_map(x, -lr * sphere.project_tangent(x, grads)), 0
    if retraction != "normalize":
        raise ValueError(f"unknown retraction {retraction!r}")
    y = x - lr * grads
    nrm = np.linalg.norm(y, axis=1, keepdims=True)
    bad = nrm[:, 0] == 0.0
    out = np.where(bad[:, None], x, y / np.where(bad[:, None], 1.0, nrm))
    return out, int(np.count_nonzero(bad))


@dataclass
class AdamState:
    """Adam moment estimates for every particle coordinate."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, shape, **kw):
        return cls(np.zeros(shape), np.zeros(shape), **kw)


def adam_step_projected(x, grads, state, lr, retraction="normalize"):
    """Adam update in ambient coordinates followed by a retraction.

    Returns ``(x_new, new_state)``; the input state is not modified.
    """
    if state.m.shape != x.shape:
        raise ValueError("Adam state does not match the particle cloud")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    mhat = m / (1.0 - state.beta1**t)
    vhat = v / (1.0 - state.beta2**t)
    step = -lr * mhat / (np.sqrt(vhat) + state.eps)
    new_state = AdamState(m, v, t, state.beta1, state.beta2, state.eps)
    if retraction == "exp_map":
        return sphere.exp_map(x, sphere.project_tangent(x, step)), new_state
    try:
        return sphere.retract_normalize(x, step), new_state
    except DegenerateStepError:
        y = x + step
        nrm = np.linalg.norm(y, axis=1, keepdims=True)
        bad = nrm[:, 0] == 0.0
        return np.where(bad[:, None], x, y / np.where(bad[:, None], 1.0, nrm)), new_state


@dataclass
class FlowConfig:
    """Settings of a particle gradient flow.

    ``rot_schedule=(a, b)`` ramps the rotation count linearly from ``a`` at
    the first step to ``b`` at the last (rounded to the nearest integer);
    otherwise ``n_rotations`` is used throughout.  ``batch=0`` is full batch.
    ``eval_subsample=None`` evaluates W2 on the whole cloud when particle and
    target sizes agree and fit the exact solver.
    """

    loss: str = "s3w"
    p: float = 2.0
    n_projections: int = 1000
    eps: float = sphere.DEFAULT_EPS
    n_rotations: int = 1
    rot_schedule: tuple = None
    pool_size: int = 1000
    steps: int = 500
    lr: float = 0.01
    batch: int = 0
    optimizer: str = "adam"
    retraction: str = "normalize"
    seed: int = 0
    eval_every: int = 50
    eval_subsample: int = None
    n_particles: int = None
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}; choose from {LOSSES}")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")
        if self.retraction not in ("normalize", "exp_map"):
            raise ValueError("retraction must be 'normalize' or 'exp_map'")
        if self.batch < 0 or self.eval_every < 1:
            raise ValueError("batch must be >= 0 and eval_every >= 1")
        if self.rot_schedule is not None:
            self.rot_schedule = tuple(int(k) for k in self.rot_schedule)
            if len(self.rot_schedule) != 2 or min(self.rot_schedule) < 1:
                raise ValueError("rot_schedule must be a pair of positive counts")
        if self.loss == "ari_s3w" and self.max_rotations() > self.pool_size:
            raise ValueError("rotation count exceeds the pool size")

    def max_rotations(self):
        return max(self.rot_schedule) if self.rot_schedule else self.n_rotations

    def to_dict(self):
        d = asdict(self)
        d["rot_schedule"] = list(self.rot_schedule) if self.rot_schedule else None
        return d


def rotation_count(cfg, step):
    """Rotations used at ``step`` (0-based) under the config's schedule."""
    if cfg.rot_schedule is None:
        return cfg.n_rotations
    a, b = cfg.rot_schedule
    if cfg.steps <= 1:
        return a
    return int(np.rint(a + (b - a) * step / (cfg.steps - 1)))


TRACE_COLUMNS = ("step", "loss", "cum_seconds", "nll", "log_w2")


@dataclass
class FlowTrace:
    """Per-step record of a flow; ``nll``/``log_w2`` are ``None`` off-cadence."""

    rows: list
    cloud: np.ndarray
    initial: np.ndarray
    meta: dict = field(default_factory=dict)

    def column(self, name):
        i = TRACE_COLUMNS.index(name)
        return np.array([np.nan if r[i] is None else r[i] for r in self.rows], dtype=float)

    def final(self, name):
        vals = [r[TRACE_COLUMNS.index(name)] for r in self.rows]
        vals = [v for v in vals if v is not None]
        return vals[-1] if vals else None


def icosa12(kappa=50.0):
    """Equal-weight mixture of 12 vMFs centred on the icosahedron vertices."""
    return sphere.VmfMixture(tuple(sphere.VonMisesFisher(v, kappa) for v in sphere.icosahedron_vertices()))


def _loss_and_grad(cfg, step, x, y, draw_rng, pool):
    d = x.shape[1] - 1
    if cfg.loss == "s3w":
        scfg = _s3w_cfg(cfg)
        return s3w_grad(x, y, scfg, scfg.projections(d, draw_rng))
    if cfg.loss == "sw":
        return ambient_grad(x, y, ambient_directions(d, cfg.n_projections, draw_rng), cfg.p)
    if cfg.loss == "vsw":
        return ambient_grad(x, y, equator_directions(d, cfg.n_projections, draw_rng), cfg.p)
    k = rotation_count(cfg, step)
    if cfg.loss == "ri_s3w":
        rots = sphere.sample_rotations(d, k, draw_rng)
    else:
        rots = pool.subsample(k, draw_rng)
    return rotated_s3w_grad(x, y, _s3w_cfg(cfg), rots, draw_rng)


def _s3w_cfg(cfg):
    from .distances import S3WConfig

    return S3WConfig(p=cfg.p, n_projections=cfg.n_projections, eps=cfg.eps)


def run_flow(cfg, target, rng=None, mixture=None, init=None, progress=None):
    """Drive particles toward ``target`` by descending a sliced loss.

    Parameters
    ----------
    cfg : FlowConfig
    target : EmpiricalMeasure or ndarray (m, d+1)
        Target sample (uniform weights).
    rng : Generator or int, optional
        Overrides ``cfg.seed`` as the root of all randomness.  Independent
        streams are spawned for the initial cloud, the loss draws, target
        batching, the rotation pool and W2 subsampling.
    mixture : VmfMixture, optional
        Enables the NLL column.
    init : ndarray, optional
        Initial cloud; uniform on the sphere otherwise.
    progress : callable, optional
        Called as ``progress(step, row)`` after every step.

    Returns
    -------
    FlowTrace
    """
    from .evaluation import flow_log_w2, nll

    y_all = np.asarray(getattr(target, "points", target), dtype=float)
    if y_all.ndim != 2 or y_all.shape[0] == 0:
        raise ValueError("target must be a non-empty (m, d+1) array")
    d = y_all.shape[1] - 1
    root = cfg.seed if rng is None else _rng_root(rng)
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(root).spawn(5)]
    init_rng, draw_rng, batch_rng, pool_rng, eval_rng = streams

    n = cfg.n_particles or y_all.shape[0]
    x = sphere.sample_uniform(d, n, init_rng) if init is None else sphere.as_points(init).copy()
    x0 = x.copy()
    pool = sphere.build_pool(d, cfg.pool_size, pool_rng) if cfg.loss == "ari_s3w" else None
    adam = AdamState.zeros(x.shape, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)

    m_all = y_all.shape[0]
    batch = cfg.batch if 0 < cfg.batch < m_all else 0
    perm = batch_rng.permutation(m_all) if batch else None
    cursor = 0

    rows = []
    elapsed = 0.0
    skipped = ties = clamped = 0
    for step in range(cfg.steps):
        t0 = time.perf_counter()
        if batch:
            if cursor + batch > m_all:
                perm = batch_rng.permutation(m_all)
                cursor = 0
            y = y_all[perm[cursor : cursor + batch]]
            cursor += batch
        else:
            y = y_all
        lg = _loss_and_grad(cfg, step, x, y, draw_rng, pool)
        if cfg.optimizer == "adam":
            x, adam = adam_step_projected(x, lg.grad, adam, cfg.lr, cfg.retraction)
        else:
            x, bad = pgd_step(x, lg.grad, cfg.lr, cfg.retraction)
            skipped += bad
        elapsed += time.perf_counter() - t0
        ties += lg.ties
        clamped += lg.clamped

        nll_v = lw2 = None
        if (step + 1) % cfg.eval_every == 0 or step == cfg.steps - 1:
            lw2 = flow_log_w2(x, y_all, cfg.eval_subsample, eval_rng)
            if mixture is not None:
                nll_v = nll(x, mixture)
        row = (step, lg.value, elapsed, nll_v, lw2)
        rows.append(row)
        if progress is not None:
            progress(step, row)

    meta = {
        "config": cfg.to_dict(),
        "root_seed": int(root),
        "n_particles": int(n),
        "n_target": int(m_all),
        "dimension": int(d),
        "eval_subsample": cfg.eval_subsample,
        "skipped_steps": skipped,
        "sort_ties": ties,
        "clamped_jacobians": clamped,
    }
    return FlowTrace(rows, x, x0, meta)


def _rng_root(rng):
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(2**63 - 1))
    return int(rng)
