"""Sliced optimal transport between probability measures on the unit sphere.

The main entry points are the distances in :mod:`s3wkit.distances`, the
analytic gradients and particle flows in :mod:`s3wkit.grad` and the
experiment metrics in :mod:`s3wkit.evaluation`.
"""

__version__ = "0.1.0"

from .distances import (  # noqa: E402
    EmpiricalMeasure,
    ProjectionSet,
    S3WConfig,
    ari_s3w,
    max_s3w,
    ri_s3w,
    s3w,
    s3w_pp,
    sw_ambient,
    vsw,
)
from .ot1d import WeightedSamples1D, w1d_uniform, w1d_weighted  # noqa: E402
from .sphere import RotationPool, VmfMixture, VonMisesFisher, build_pool, embed  # noqa: E402

__all__ = [
    "EmpiricalMeasure",
    "ProjectionSet",
    "RotationPool",
    "S3WConfig",
    "VmfMixture",
    "VonMisesFisher",
    "WeightedSamples1D",
    "ari_s3w",
    "build_pool",
    "embed",
    "max_s3w",
    "ri_s3w",
    "s3w",
    "s3w_pp",
    "sw_ambient",
    "vsw",
    "w1d_uniform",
    "w1d_weighted",
]
