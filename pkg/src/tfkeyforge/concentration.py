"""Concentration inequalities: inverse multiplicative Chernoff and Kato bounds.

The Chernoff routines turn an observed Bernoulli sum ``chi`` into an interval
for its expectation. The Kato routines bound the gap between a sum of
conditional probabilities and its realisation for arbitrarily correlated
Bernoulli sequences.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .numerics import lambert_w0, lambert_wm1

__all__ = [
    "ChernoffInterval",
    "KatoCoefficients",
    "chernoff_mean_bounds",
    "kato_delta_simple",
    "kato_coefficients",
    "kato_delta_optimized",
    "kato_constraint_log",
]

log = logging.getLogger(__name__)


def _check_probability(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value!r}")


@dataclass(frozen=True)
class ChernoffInterval:
    expectation_lower: float
    expectation_upper: float
    epsilon: float

    def __post_init__(self):
        if not (0.0 <= self.expectation_lower <= self.expectation_upper < math.inf):
            raise ValueError(f"invalid Chernoff interval {self}")

    def contains(self, value: float) -> bool:
        return self.expectation_lower <= value <= self.expectation_upper


def chernoff_mean_bounds(chi: float, epsilon: float) -> ChernoffInterval:
    """Two-sided interval on ``E[chi]`` from an observed Bernoulli sum.

    Each side fails with probability ``epsilon / 2``. Writing ``x = E/chi``,
    both tails reduce to ``chi (1 - x + ln x) = ln(epsilon / 2)``, whose two
    roots are ``x = -W_0(z)`` (lower) and ``x = -W_{-1}(z)`` (upper) with
    ``z = -exp(ln(epsilon/2)/chi - 1)``.

    For ``chi = 0`` the lower bound is 0 and the upper bound is
    ``ln(2/epsilon)``, the ``chi -> 0`` limit of the same equation.
    """
    _check_probability("epsilon", epsilon)
    if chi < 0 or not math.isfinite(chi):
        raise ValueError(f"chi must be a finite nonnegative count, got {chi!r}")
    log_tail = math.log(epsilon / 2.0)
    if chi == 0:
        return ChernoffInterval(0.0, -log_tail, epsilon)
    z = -math.exp(log_tail / chi - 1.0)
    lower = -chi * lambert_w0(z)
    upper = -chi * lambert_wm1(z)
    # W is flat at the branch point; keep the interval ordered around chi
    return ChernoffInterval(min(lower, chi), max(upper, chi), epsilon)


def kato_delta_simple(n: float, epsilon_a: float) -> float:
    """Deviation ``sqrt(n ln(1/eps_a) / 2)`` of the ``a = 0`` Kato bound.

    Valid in either direction (sum of conditional probabilities above or
    below the realised count), each failing with probability ``epsilon_a``.
    """
    if not 0.0 < epsilon_a <= 1.0:
        raise ValueError(f"epsilon_a must lie in (0, 1], got {epsilon_a!r}")
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n!r}")
    return math.sqrt(0.5 * n * -math.log(epsilon_a))


@dataclass(frozen=True)
class KatoCoefficients:
    """Coefficients ``(a, b)`` of the optimised Kato deviation for ``n`` trials.

    ``gap`` holds ``b - |a|`` evaluated without cancellation; when the
    predicted count is tiny, ``a`` and ``b`` agree to eight or more digits and
    the deviation is driven entirely by their difference. ``fallback`` is set
    when the closed form failed verification and the coefficients reverted to
    ``a = 0``.
    """

    a: float
    b: float
    n: float
    epsilon_a: float
    gap: float = math.nan
    fallback: bool = False

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("KatoCoefficients needs n > 0")
        if math.isnan(self.gap):
            object.__setattr__(self, "gap", self.b - abs(self.a))
        if self.gap < 0 or self.b < abs(self.a):
            raise ValueError(f"Kato coefficients need b >= |a|, got a={self.a}, b={self.b}")

    def log_tail(self) -> float:
        """Log of the tail bound ``-2 (b^2 - a^2) / (1 + 4a / (3 sqrt n))^2``."""
        diff = self.gap * (self.gap + 2.0 * abs(self.a))
        return -2.0 * diff / (1.0 + 4.0 * self.a / (3.0 * math.sqrt(self.n))) ** 2


def kato_constraint_log(a: float, b: float, n: float) -> float:
    """Log of the Kato tail bound ``-2 (b^2 - a^2) / (1 + 4a / (3 sqrt n))^2``."""
    return -2.0 * (b * b - a * a) / (1.0 + 4.0 * a / (3.0 * math.sqrt(n))) ** 2


def _b_closed_form(a: float, n: float, log_eps: float) -> float:
    return math.sqrt(18.0 * a * a * n - (16.0 * a * a + 24.0 * a * math.sqrt(n) + 9.0 * n) * log_eps) / (
        3.0 * math.sqrt(2.0 * n)
    )


def kato_coefficients(n: float, lambda_pred: float, epsilon_a: float) -> KatoCoefficients:
    """Closed-form ``(a, b)`` minimising the Kato deviation at ``lambda_pred``.

    Minimises ``[b + a (2 X / n - 1)] sqrt(n)`` with ``X = lambda_pred``
    subject to the tail bound equalling ``epsilon_a`` and ``b >= |a|``. The
    result is checked against the constraint; on failure the simple
    ``a = 0`` coefficients are returned with ``fallback=True``.
    """
    _check_probability("epsilon_a", epsilon_a)
    if n <= 0:
        raise ValueError(f"n must be positive, got {n!r}")
    if not 0.0 <= lambda_pred <= n:
        raise ValueError(f"lambda_pred must lie in [0, n], got {lambda_pred!r}")
    L = math.log(epsilon_a)
    X = lambda_pred
    sn = math.sqrt(n)
    b0 = math.sqrt(-L / 2.0)
    fallback = KatoCoefficients(0.0, b0, n, epsilon_a, gap=b0, fallback=True)
    try:
        q = 9.0 * X * (n - X) - 2.0 * n * L
        root = math.sqrt(-n * n * L * q)
        num = 72.0 * sn * X * (n - X) * L - 16.0 * n * sn * L * L + 9.0 * math.sqrt(2.0) * (n - 2.0 * X) * root
        a = 3.0 * num / (4.0 * (9.0 * n - 8.0 * L) * q)
        scale = 1.0 + 4.0 * a / (3.0 * sn)
        # b^2 = a^2 + c, c > 0, so b - |a| = c / (b + |a|) has no cancellation
        c = -0.5 * L * scale * scale
        b = math.sqrt(a * a + c)
        gap = c / (b + abs(a))
        b_ref = _b_closed_form(a, n, L)
    except (ValueError, ZeroDivisionError, OverflowError):
        log.debug("Kato closed form not real at n=%g X=%g; using a=0", n, X)
        return fallback
    if not all(math.isfinite(v) for v in (a, b, gap)) or scale <= 0.0:
        return fallback
    if abs(b - b_ref) > 1e-12 * b:
        return fallback
    coeffs = KatoCoefficients(a, b, n, epsilon_a, gap=gap)
    if abs(coeffs.log_tail() - L) > 1e-9 * abs(L):
        return fallback
    return coeffs


def kato_delta_optimized(coeffs: KatoCoefficients, lambda_obs: float) -> float:
    """Deviation ``[b + a (2 lambda_obs / n - 1)] sqrt(n)``."""
    if lambda_obs < 0:
        raise ValueError(f"lambda_obs must be nonnegative, got {lambda_obs!r}")
    n = coeffs.n
    a = coeffs.a
    # rewritten around the gap so tiny predictions keep full precision
    if a >= 0.0:
        unit = coeffs.gap + 2.0 * a * lambda_obs / n
    else:
        unit = coeffs.gap - 2.0 * a * (1.0 - lambda_obs / n)
    return unit * math.sqrt(n)
