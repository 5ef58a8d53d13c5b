"""Modified Bessel function of the first kind, I_v(x), for real v >= 0, x >= 0.

Power series for moderate arguments, Hankel's large-argument expansion
otherwise.  Both are evaluated in log space so that ``log_bessel_iv`` stays
finite well past the float64 overflow point of ``I_v`` itself.
"""

import math

import numpy as np

__all__ = ["bessel_iv", "log_bessel_iv", "ASYMPTOTIC_CROSSOVER"]

ASYMPTOTIC_CROSSOVER = 30.0
_REL_TOL = 1e-16


def _log_series(v, x):
    # I_v(x) = (x/2)^v / Gamma(v+1) * sum_k t_k,  t_0 = 1,
    # t_k = t_{k-1} * (x^2/4) / (k (k + v))
    q = 0.25 * x * x
    total = 1.0
    term = 1.0
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + v))
        total += term
        if term < _REL_TOL * total:
            break
    return v * math.log(0.5 * x) - math.lgamma(v + 1.0) + math.log(total)


def _log_asymptotic(v, x):
    # I_v(x) ~ e^x / sqrt(2 pi x) * sum_k (-1)^k a_k(v) / x^k,
    # a_k = prod_{j<=k} (4v^2 - (2j-1)^2) / (k! 8^k).  Terminates for
    # half-integer v; otherwise truncated at the smallest term.
    mu = 4.0 * v * v
    total = 1.0
    term = 1.0
    k = 0
    while True:
        k += 1
        nxt = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if nxt == 0.0 or abs(nxt) < _REL_TOL * abs(total):
            total += nxt
            break
        if abs(nxt) >= abs(term):
            break
        total += nxt
        term = nxt
    return x - 0.5 * math.log(2.0 * math.pi * x) + math.log(total)


def _log_iv_scalar(v, x):
    if v < 0:
        raise ValueError("order v must be non-negative")
    if x < 0:
        raise ValueError("argument x must be non-negative")
    if x == 0.0:
        return 0.0 if v == 0 else -math.inf
    # Hankel's expansion is only accurate once x dominates v^2
    if x > ASYMPTOTIC_CROSSOVER and x > v * v:
        return _log_asymptotic(v, x)
    return _log_series(v, x)


def log_bessel_iv(v, x):
    """Natural log of I_v(x).  Broadcasts over array arguments."""
    out = np.vectorize(_log_iv_scalar, otypes=[float])(v, x)
    return out[()] if out.ndim == 0 else out


def bessel_iv(v, x):
    """I_v(x); overflows to ``inf`` where the value exceeds float64 range."""
    with np.errstate(over="ignore"):
        return np.exp(log_bessel_iv(v, x))
