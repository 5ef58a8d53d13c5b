import math

import numpy as np
import pytest
from scipy import stats

from s3wkit import sphere
from s3wkit.distances import (
    EmpiricalMeasure,
    ProjectionSet,
    S3WConfig,
    ari_s3w,
    max_s3w,
    ri_s3w,
    s3w,
    s3w_over_rotations,
    s3w_pp,
    slice_measure,
    sw_ambient,
    vsw,
)
from s3wkit.exceptions import UnsupportedDimensionError
from s3wkit.ot1d import WeightedSamples1D, w1d_weighted

SOUTH = np.array([0.0, 0.0, -1.0])
EQUATOR = np.array([1.0, 0.0, 0.0])


def reference_s3w(x, a, y, b, dirs, p, eps):
    """Slice-by-slice estimate through the explicit cap/projection/h1 chain."""
    ex = sphere.h1(sphere.stereo_project(sphere.epsilon_cap(x, eps)))
    ey = sphere.h1(sphere.stereo_project(sphere.epsilon_cap(y, eps)))
    costs = [w1d_weighted(WeightedSamples1D(ex @ t, a), WeightedSamples1D(ey @ t, b), p) ** p for t in dirs]
    return float(np.mean(costs)) ** (1 / p)


def cloud(n, rng, kappa=None, mu=(0, 0, 1.0)):
    if kappa is None:
        return sphere.sample_uniform(2, n, rng)
    return sphere.sample_vmf(sphere.VonMisesFisher(np.array(mu), kappa), n, rng)


def test_identical_measures_are_at_zero():
    rng = np.random.default_rng(0)
    x = cloud(50, rng)
    cfg = S3WConfig(n_projections=20)
    assert s3w(x, x, cfg, cfg.projections(2, rng)) == 0.0
    assert ri_s3w(x, x, cfg, 5, rng) == 0.0
    assert ari_s3w(x, x, cfg, 5, sphere.build_pool(2, 10, rng), rng) == 0.0
    assert max_s3w(x, x, cfg, 30, rng) == 0.0
    assert sw_ambient(x, x, 2, 20, rng) == 0.0
    assert vsw(x, x, 2, 20, rng) == 0.0


def test_point_masses_closed_form():
    cfg = S3WConfig(n_projections=100_000)
    value = s3w([SOUTH], [EQUATOR], cfg, cfg.projections(2, 0))
    assert value == pytest.approx(math.pi / (2 * math.sqrt(2)), rel=0.01)


def test_symmetry_with_shared_projections():
    rng = np.random.default_rng(1)
    x, y = cloud(40, rng), cloud(40, rng, 5.0)
    cfg = S3WConfig(n_projections=64)
    proj = cfg.projections(2, rng)
    assert s3w(x, y, cfg, proj) == s3w(y, x, cfg, proj)


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_matches_reference_uniform(p):
    rng = np.random.default_rng(2)
    x, y = cloud(30, rng, 3.0), cloud(30, rng)
    cfg = S3WConfig(p=p, n_projections=25, eps=1e-3)
    proj = cfg.projections(2, rng)
    a = np.full(30, 1 / 30)
    assert s3w(x, y, cfg, proj) == pytest.approx(reference_s3w(x, a, y, a, proj.dirs, p, 1e-3), rel=1e-12)


def test_matches_reference_weighted():
    rng = np.random.default_rng(3)
    x, y = cloud(17, rng, 3.0), cloud(29, rng)
    a = rng.uniform(0.1, 1, 17)
    b = rng.uniform(0.1, 1, 29)
    a, b = a / a.sum(), b / b.sum()
    cfg = S3WConfig(n_projections=25)
    proj = cfg.projections(2, rng)
    ours = s3w(EmpiricalMeasure(x, a), EmpiricalMeasure(y, b), cfg, proj)
    assert ours == pytest.approx(reference_s3w(x, a, y, b, proj.dirs, 2.0, cfg.eps), rel=1e-12)


def test_weighted_path_equals_duplicated_atoms():
    rng = np.random.default_rng(4)
    x, y = cloud(3, rng), cloud(3, rng)
    cfg = S3WConfig(n_projections=50)
    proj = cfg.projections(2, rng)
    weighted = s3w(EmpiricalMeasure(x, [0.5, 0.25, 0.25]), EmpiricalMeasure(y[:2], [0.5, 0.5]), cfg, proj)
    duplicated = s3w(x[[0, 0, 1, 2]], y[[0, 0, 1, 1]], cfg, proj)
    assert weighted == pytest.approx(duplicated, rel=1e-12)


def test_slice_examples():
    theta = np.array([1.0, 0.0])
    s = slice_measure(EmpiricalMeasure([SOUTH]), theta)
    np.testing.assert_array_equal(s.values, [0.0])
    s = slice_measure(EmpiricalMeasure([EQUATOR]), theta)
    assert s.values[0] == pytest.approx(math.pi / 2, rel=1e-15)
    m = EmpiricalMeasure([SOUTH, EQUATOR], [0.3, 0.7])
    np.testing.assert_array_equal(slice_measure(m, theta).weights, m.weights)
    with pytest.raises(ValueError):
        slice_measure(m, np.ones(3) / math.sqrt(3))


def test_dimension_checks():
    cfg = S3WConfig(n_projections=4)
    with pytest.raises(ValueError):
        s3w([SOUTH], [[1.0, 0.0]], cfg, cfg.projections(2, 0))
    with pytest.raises(ValueError):
        s3w([SOUTH], [EQUATOR], cfg, cfg.projections(3, 0))


@pytest.mark.parametrize("kwargs", [dict(p=0.5), dict(n_projections=0), dict(eps=0.0), dict(eps=1.0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        S3WConfig(**kwargs)


def test_measure_validation_and_immutability():
    with pytest.raises(ValueError):
        EmpiricalMeasure([[1.0, 1.0, 0.0]])
    with pytest.raises(ValueError):
        EmpiricalMeasure([SOUTH, EQUATOR], [0.5, 0.6])
    m = EmpiricalMeasure([SOUTH, EQUATOR])
    with pytest.raises(ValueError):
        m.points[0, 0] = 1.0
    with pytest.raises(ValueError):
        ProjectionSet([[1.0, 1.0]])


def test_triangle_inequality_small():
    rng = np.random.default_rng(5)
    cfg = S3WConfig(n_projections=64)
    proj = cfg.projections(2, rng)
    for _ in range(30):
        x, y, z = (cloud(32, rng, float(rng.uniform(0, 20)), sphere.sample_uniform(2, 1, rng)[0]) for _ in range(3))
        assert s3w(x, z, cfg, proj) <= s3w(x, y, cfg, proj) + s3w(y, z, cfg, proj) + 1e-9


def test_separated_point_masses_are_positive():
    rng = np.random.default_rng(6)
    a, b = sphere.sample_uniform(2, 2, rng)
    cfg = S3WConfig(n_projections=10)
    for seed in range(50):
        assert s3w([a], [b], cfg, cfg.projections(2, seed)) > 0


def test_identity_rotation_reduces_to_s3w():
    rng = np.random.default_rng(7)
    x, y = cloud(40, rng), cloud(40, rng, 4.0)
    cfg = S3WConfig(n_projections=30)
    proj = cfg.projections(2, rng)
    assert s3w_over_rotations(x, y, cfg, [np.eye(3)], proj=proj) == pytest.approx(s3w(x, y, cfg, proj), rel=1e-14)


def test_reused_projections_share_one_set():
    rng = np.random.default_rng(8)
    x, y = cloud(40, rng), cloud(40, rng, 4.0)
    cfg = S3WConfig(n_projections=30, reuse_projections=True)
    rots = sphere.sample_rotations(2, 4, 1)
    proj = cfg.projections(2, np.random.default_rng(9))
    expected = np.mean([s3w(x @ r.T, y @ r.T, cfg, proj) for r in rots])
    assert s3w_over_rotations(x, y, cfg, rots, np.random.default_rng(9)) == pytest.approx(expected, rel=1e-14)


def test_more_rotations_reduce_variance():
    rng = np.random.default_rng(10)
    x, y = cloud(64, rng, 10.0), cloud(64, rng, 10.0, (1.0, 0, 0))
    cfg = S3WConfig(n_projections=20)
    one = [ri_s3w(x, y, cfg, 1, s) for s in range(50)]
    ten = [ri_s3w(x, y, cfg, 10, 1000 + s) for s in range(50)]
    assert np.var(one, ddof=1) / np.var(ten, ddof=1) > 2


def test_ari_with_whole_pool_equals_ri_over_those_rotations():
    rng = np.random.default_rng(11)
    x, y = cloud(40, rng), cloud(40, rng, 4.0)
    cfg = S3WConfig(n_projections=30)
    pool = sphere.build_pool(2, 6, 0)
    g = np.random.default_rng(3)
    order = pool.subsample_indices(6, g)
    assert sorted(order.tolist()) == list(range(6))
    direct = s3w_over_rotations(x, y, cfg, pool.rotations[order], g)
    assert ari_s3w(x, y, cfg, 6, pool, 3) == direct
    assert ari_s3w(x, y, cfg, 4, pool, 5) == ari_s3w(x, y, cfg, 4, pool, 5)
    with pytest.raises(ValueError):
        ari_s3w(x, y, cfg, 7, pool, 0)


def test_ari_agrees_with_ri_in_distribution():
    rng = np.random.default_rng(12)
    x, y = cloud(64, rng, 10.0), cloud(64, rng, 10.0, (0, 1.0, 0))
    cfg = S3WConfig(n_projections=20)
    ri = [ri_s3w(x, y, cfg, 5, s) for s in range(200)]
    # each seed draws its own pool, so pool-specific bias averages out
    ari = []
    for s in range(200):
        g = np.random.default_rng(5000 + s)
        ari.append(ari_s3w(x, y, cfg, 5, sphere.build_pool(2, 50, g), g))
    assert stats.ttest_ind(ri, ari, equal_var=False).pvalue > 0.01


def test_rotation_invariance_in_expectation():
    rng = np.random.default_rng(14)
    x, y = cloud(48, rng, 8.0), cloud(48, rng)
    q = sphere.sample_rotation(2, rng)
    cfg = S3WConfig(n_projections=20)
    base = np.array([ri_s3w(x, y, cfg, 3, s) for s in range(200)])
    rotated = np.array([ri_s3w(x @ q.T, y @ q.T, cfg, 3, 10_000 + s) for s in range(200)])
    se = math.sqrt(base.var(ddof=1) / 200 + rotated.var(ddof=1) / 200)
    assert abs(base.mean() - rotated.mean()) < 3 * se


def test_max_s3w_bounds():
    rng = np.random.default_rng(15)
    x, y = cloud(40, rng), cloud(40, rng, 4.0)
    cfg = S3WConfig(n_projections=50)
    proj = cfg.projections(2, rng)
    assert max_s3w(x, y, cfg, proj=proj) >= s3w(x, y, cfg, proj)
    small = ProjectionSet(proj.dirs[:10])
    assert max_s3w(x, y, cfg, proj=small) <= max_s3w(x, y, cfg, proj=proj)
    with pytest.raises(ValueError):
        max_s3w(x, y, cfg)


def test_sw_ambient_point_masses():
    rng = np.random.default_rng(16)
    a, b = sphere.sample_uniform(2, 2, rng)
    value = sw_ambient([a], [b], 2.0, 100_000, rng)
    assert value == pytest.approx(np.linalg.norm(a - b) / math.sqrt(3), rel=0.01)
    assert sw_ambient([a], [b], 2.0, 100, 3) == sw_ambient([b], [a], 2.0, 100, 3)


def test_vsw_ignores_the_polar_axis():
    north, south = [0, 0, 1.0], [0, 0, -1.0]
    assert vsw([north], [south], 2.0, 50, 0) == 0.0
    rng = np.random.default_rng(18)
    x, y = cloud(20, rng), cloud(20, rng)
    assert vsw(x, y, 2.0, 50, 1) == vsw(y, x, 2.0, 50, 1)
    with pytest.raises(UnsupportedDimensionError):
        vsw([[1.0, 0.0]], [[0.0, 1.0]], 2.0, 10, 0)
