"""Point-cloud CSV files and generator specs.

A cloud file has one point per row with ``d+1`` coordinates and an optional
trailing weight column.  A header row is allowed; a last header field named
``w`` or ``weight`` marks the weight column explicitly.  Without such a
header, a trailing column is treated as weights when the leading columns are
unit vectors and the full rows are not.

Generator specs describe synthetic clouds inline, for example
``vmf:mu=0,0,1:kappa=10:n=500``, ``uniform:d=2:n=1000`` or
``icosa12:kappa=50:n=2400``.
"""

import csv
import math

import numpy as np

from . import sphere
from .distances import EmpiricalMeasure

__all__ = ["CloudFormatError", "read_cloud", "write_cloud", "parse_spec", "load_measure", "format_float"]

UNIT_TOL = 1e-6


class CloudFormatError(ValueError):
    """Malformed cloud file; the message carries the 1-based line number."""


def format_float(x):
    """17 significant digits, keeping a decimal point on integral values."""
    text = format(float(x), ".17g")
    if text.lstrip("-").isdigit():
        text += ".0"
    return text


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_cloud(path):
    """Read a cloud CSV.

    Returns
    -------
    points : ndarray (n, d+1)
    weights : ndarray (n,) or None
    """
    rows = []
    weight_header = False
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            fields = [f.strip() for f in row]
            if not fields or all(f == "" for f in fields) or fields[0].startswith("#"):
                continue
            if not rows and not all(_is_number(f) for f in fields):
                weight_header = fields[-1].lower() in ("w", "weight", "weights")
                continue
            try:
                vals = [float(f) for f in fields]
            except ValueError:
                bad = next(f for f in fields if not _is_number(f))
                raise CloudFormatError(f"line {lineno}: cannot parse {bad!r} as a number") from None
            if not all(math.isfinite(v) for v in vals):
                raise CloudFormatError(f"line {lineno}: non-finite value")
            if rows and len(vals) != len(rows[0][1]):
                raise CloudFormatError(f"line {lineno}: expected {len(rows[0][1])} fields, got {len(vals)}")
            rows.append((lineno, vals))
    if not rows:
        raise CloudFormatError(f"{path}: no data rows")
    data = np.array([v for _, v in rows])
    lines = [ln for ln, _ in rows]
    if data.shape[1] < 2:
        raise CloudFormatError(f"line {lines[0]}: need at least 2 coordinates")

    full_unit = np.abs(np.linalg.norm(data, axis=1) - 1.0) <= UNIT_TOL
    head_unit = np.abs(np.linalg.norm(data[:, :-1], axis=1) - 1.0) <= UNIT_TOL
    has_weights = weight_header or (data.shape[1] >= 3 and head_unit.all() and not full_unit.all())
    if has_weights:
        points, weights = data[:, :-1], data[:, -1]
        if np.any(weights < 0):
            raise CloudFormatError(f"line {lines[int(np.argmax(weights < 0))]}: negative weight")
        total = weights.sum()
        if total <= 0:
            raise CloudFormatError(f"{path}: weights sum to zero")
        weights = weights / total
    else:
        points, weights = data, None
    ok = np.abs(np.linalg.norm(points, axis=1) - 1.0) <= UNIT_TOL
    if not ok.all():
        raise CloudFormatError(f"line {lines[int(np.argmin(ok))]}: point is not a unit vector")
    return points / np.linalg.norm(points, axis=1, keepdims=True), weights


def write_cloud(path, points, weights=None):
    """Write a cloud with 17 significant digits per value."""
    points = np.asarray(points, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for i, row in enumerate(points):
            vals = [format_float(v) for v in row]
            if weights is not None:
                vals.append(format_float(weights[i]))
            w.writerow(vals)


def _floats(text):
    return [float(t) for t in text.split(",") if t]


def parse_spec(spec, rng=None):
    """Sample the cloud described by a generator spec.

    Returns an ``(n, d+1)`` array.  Raises ``ValueError`` for unknown kinds or
    missing fields.
    """
    kind, *parts = spec.split(":")
    opts = {}
    for part in parts:
        if "=" not in part:
            raise ValueError(f"spec field {part!r} must look like key=value")
        k, v = part.split("=", 1)
        opts[k.strip()] = v.strip()
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    def take(key, conv, default=None):
        if key not in opts:
            if default is None:
                raise ValueError(f"spec {kind!r} needs {key}=")
            return default
        return conv(opts.pop(key))

    if kind == "vmf":
        mu = np.array(take("mu", _floats))
        kappa = take("kappa", float)
        n = take("n", int)
        out = sphere.sample_vmf(sphere.VonMisesFisher(mu / np.linalg.norm(mu), kappa), n, rng)
    elif kind == "uniform":
        out = sphere.sample_uniform(take("d", int), take("n", int), rng)
    elif kind == "icosa12":
        from .grad import icosa12

        out = icosa12(take("kappa", float, 50.0)).sample(take("n", int, 2400), rng, stratified=True)
    else:
        raise ValueError(f"unknown generator {kind!r}; expected vmf, uniform or icosa12")
    if opts:
        raise ValueError(f"unknown spec fields: {', '.join(sorted(opts))}")
    return out


def load_measure(source, rng=None):
    """Build an :class:`EmpiricalMeasure` from a CSV path or a generator spec."""
    kind = source.split(":", 1)[0]
    if kind in ("vmf", "uniform", "icosa12") and (":" in source or kind == "icosa12"):
        return EmpiricalMeasure(parse_spec(source, rng))
    points, weights = read_cloud(source)
    return EmpiricalMeasure(points, weights)
