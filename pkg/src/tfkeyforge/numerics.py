"""Scalar special functions: binary entropy, both real Lambert W branches, I0.

All routines work in double precision and are pure. Accuracy targets:

* ``lambert_w0`` / ``lambert_wm1``: relative residual ``|w e^w - x| / |x|``
  below 1e-12 over the whole real domain.
* ``bessel_i0``: relative error below 1e-12 for ``|z| <= I0_OVERFLOW``.
"""

from __future__ import annotations

import math

__all__ = [
    "binary_entropy",
    "lambert_w0",
    "lambert_wm1",
    "bessel_i0",
    "ksum",
    "I0_OVERFLOW",
    "INV_E",
]

INV_E = math.exp(-1.0)

# e**z / sqrt(2 pi z) overflows a double just above z = 709.78.
I0_OVERFLOW = 700.0

_I0_SERIES_MAX = 20.0
_HALLEY_MAXITER = 64


def binary_entropy(x: float) -> float:
    """Shannon binary entropy in bits, ``h(0) = h(1) = 0``."""
    if not 0.0 <= x <= 1.0 or math.isnan(x):
        raise ValueError(f"binary entropy argument must lie in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    # h is symmetric; use the smaller argument (1 - x is exact for x >= 1/2)
    # so log1p keeps full precision for the large term
    small = x if x <= 0.5 else 1.0 - x
    return -small * math.log2(small) - (1.0 - small) * math.log1p(-small) / math.log(2.0)


def ksum(values) -> float:
    """Compensated (Neumaier) summation of an iterable of floats."""
    total = 0.0
    comp = 0.0
    for v in values:
        t = total + v
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
    return total + comp


def _branch_point_series(p: float) -> float:
    # W = -1 + p - p^2/3 + 11/72 p^3 - 43/540 p^4, p = +-sqrt(2(e x + 1))
    return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 - p * 43.0 / 540.0)))


def _halley(w: float, x: float) -> float:
    for _ in range(_HALLEY_MAXITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0 or not math.isfinite(denom):
            break
        step = f / denom
        w_new = w - step
        if not math.isfinite(w_new):
            break
        if abs(step) <= 4e-16 * max(abs(w_new), 1e-300):
            return w_new
        w = w_new
    return w


def lambert_w0(x: float) -> float:
    """Principal branch ``W_0(x)`` for real ``x >= -1/e``.

    Seeds come from the branch-point series near ``-1/e``, the Taylor series
    near zero and ``log x - log log x`` for large arguments; Halley's
    iteration then polishes to machine precision.

    Examples
    --------
    >>> round(lambert_w0(1.0), 10)
    0.5671432904
    """
    if math.isnan(x) or x < -INV_E:
        raise ValueError(f"W_0 is real only for x >= -1/e, got {x!r}")
    if x == 0.0:
        return 0.0
    if x == -INV_E:
        return -1.0
    if math.isinf(x):
        return math.inf
    q = 2.0 * (math.e * x + 1.0)
    if q < 0.3:
        w = _branch_point_series(math.sqrt(max(q, 0.0)))
    elif abs(x) < 0.3:
        w = x * (1.0 - x * (1.0 - 1.5 * x))
    elif x < 3.0:
        w = math.log1p(x) * (1.0 - math.log1p(math.log1p(x)) / (2.0 + math.log1p(x)))
    else:
        lx = math.log(x)
        llx = math.log(lx)
        w = lx - llx + llx / lx
    if abs(w) < 1e-300:
        return w
    return _halley(w, x)


def lambert_wm1(x: float) -> float:
    """Lower real branch ``W_{-1}(x)`` for ``-1/e <= x < 0``; result ``<= -1``.

    Near zero the asymptotic seed ``L1 - L2 + L2/L1`` with ``L1 = log(-x)``
    and ``L2 = log(-L1)`` is used so that arguments as small as ``-1e-300``
    converge in a handful of Halley steps.
    """
    if math.isnan(x) or x < -INV_E or x >= 0.0:
        raise ValueError(f"W_-1 is real only for -1/e <= x < 0, got {x!r}")
    if x == -INV_E:
        return -1.0
    q = 2.0 * (math.e * x + 1.0)
    if q < 0.5:
        w = _branch_point_series(-math.sqrt(max(q, 0.0)))
    else:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1
    w = _halley(w, x)
    return min(w, -1.0)


def bessel_i0(z: float) -> float:
    """Modified Bessel function of the first kind, order zero, real argument.

    Power series for ``|z| <= 20`` and the Hankel asymptotic expansion above,
    truncated at its smallest term. Raises ``OverflowError`` for
    ``|z| > I0_OVERFLOW``.
    """
    z = abs(float(z))
    if math.isnan(z):
        raise ValueError("bessel_i0 argument is NaN")
    if z > I0_OVERFLOW:
        raise OverflowError(f"|z| = {z} exceeds I0 overflow threshold {I0_OVERFLOW}")
    if z <= _I0_SERIES_MAX:
        y = 0.25 * z * z
        term = 1.0
        total = 1.0
        k = 0
        while True:
            k += 1
            term *= y / (k * k)
            total += term
            if term < 1e-17 * total:
                return total
    inv8z = 1.0 / (8.0 * z)
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        nxt = term * (2 * k - 1) ** 2 * inv8z / k
        if nxt >= term or nxt < 1e-17 * total:
            break
        term = nxt
        total += term
    return math.exp(z) / math.sqrt(2.0 * math.pi * z) * total
