"""Sliced distances between two von Mises-Fisher clouds as one is rotated away.

Prints a small version of the angle sweep: every distance in the family
grows as the second mean moves to the antipode of the first.
"""

import numpy as np

from s3wkit import S3WConfig, VonMisesFisher, ari_s3w, build_pool, ri_s3w, s3w, sw_ambient, vsw
from s3wkit.sphere import sample_vmf

rng = np.random.default_rng(0)
cfg = S3WConfig(p=2.0, n_projections=200)
pool = build_pool(2, 100, rng)
e1 = np.array([1.0, 0.0, 0.0])
x = sample_vmf(VonMisesFisher(e1, 10.0), 500, rng)

print(f"{'angle':>6} {'s3w':>7} {'ri_s3w':>7} {'ari_s3w':>7} {'sw':>7} {'vsw':>7}")
for k in range(7):
    theta = k * np.pi / 6
    mu = np.array([np.cos(theta), np.sin(theta), 0.0])
    y = sample_vmf(VonMisesFisher(mu, 10.0), 500, rng)
    row = [
        s3w(x, y, cfg, cfg.projections(2, rng)),
        ri_s3w(x, y, cfg, 10, rng),
        ari_s3w(x, y, cfg, 10, pool, rng),
        sw_ambient(x, y, 2.0, 200, rng),
        vsw(x, y, 2.0, 200, rng),
    ]
    print(f"{k}pi/6 " + " ".join(f"{v:7.3f}" for v in row))

# plain s3w depends on where the clouds sit relative to the poles; the
# rotation-averaged versions do not (in expectation)
q = np.linalg.qr(rng.standard_normal((3, 3)))[0]
q *= np.sign(np.linalg.det(q))
y = sample_vmf(VonMisesFisher(-e1, 10.0), 500, rng)
print()
print("after a global rotation of both clouds:")
for name, f in [("s3w", lambda a, b: s3w(a, b, cfg, cfg.projections(2, 1))),
                ("ri_s3w", lambda a, b: ri_s3w(a, b, cfg, 50, 1))]:
    print(f"  {name:<7} {f(x, y):.3f} -> {f(x @ q.T, y @ q.T):.3f}")
