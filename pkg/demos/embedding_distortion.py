"""How much does flattening the sphere distort distances?

Plain stereographic projection sends the north pole to infinity, so
Euclidean distances between projected points say little about arc length.
The equidistant embedding keeps every point within pi of the origin and
tracks geodesic distance far better.
"""

import numpy as np

from s3wkit import sphere
from s3wkit.evaluation import distortion_study

south = np.array([0.0, 0.0, -1.0])
equator = np.array([1.0, 0.0, 0.0])
near_north = np.array([0.0, np.sin(1e-3), np.cos(1e-3)])

# the south pole sits at the origin, the equator at radius pi/2
for name, s in [("south pole", south), ("equator", equator), ("near north", near_north)]:
    print(f"{name:>11}: stereo {np.linalg.norm(sphere.stereo_project(s)):10.3f}"
          f"   embedded {np.linalg.norm(sphere.embed(s)):.4f}")

rep = distortion_study(n_pairs=5000, rng=0)
print()
print("Pearson correlation with geodesic distance over 5000 uniform pairs")
for metric in ("stereo", "embed", "embed_wrapped"):
    print(f"  {metric:<14} {rep.summary(metric=metric)[0]:.3f}")

# the cap keeps points off the singular north pole
cap = sphere.epsilon_cap(np.array([0.0, 0.0, 1.0]), eps=1e-2)
print()
print("north pole after the cap:", np.round(cap, 4), "z =", round(float(cap[2]), 4))
