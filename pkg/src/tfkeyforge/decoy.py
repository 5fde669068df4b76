"""Analytical decoy-state bounds for three intensities per user.

Observed counts ``M^{mu nu}`` are turned into confidence intervals on the
rescaled expectations

    Mhat^{mu nu} = e^{mu + nu} E[M^{mu nu}] / (p_mu p_nu)
                 = sum_{n,m} mu^n nu^m / (n! m! p_{n|Z} p_{m|Z}) M_nm,

and a fixed linear combination ``Omega = sum_kl chat_kl Mhat^{kl}`` is chosen
per target pair so that the unwanted photon-number terms either drop out or
carry a known sign. Every combination used here is separable,
``chat_kl = a_k b_l``, which makes the photon-number coefficients separable
too: ``c_nm = g_A(n) g_B(m)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .concentration import chernoff_mean_bounds
from .errors import EstimationError
from .protocol import DecoyBounds, Intensities, ObservedCounts, ProtocolParams, SecurityParams

__all__ = [
    "HatMBounds",
    "OmegaSpec",
    "OMEGA_SPECS",
    "hat_m_bounds",
    "side_vector",
    "chat_matrix",
    "g_coefficients",
    "c_nm",
    "omega_upper",
    "omega_lower",
    "c_max",
    "vacuum_marginal_lower",
    "bounds_from_hat",
    "decoy_upper_bounds",
]


@dataclass(frozen=True, eq=False)
class HatMBounds:
    """Intervals on ``Mhat^{mu nu}`` and on the single-user marginals.

    ``lower``/``upper`` are 3x3 with rows indexed by Alice's intensity.
    ``row_*`` bound ``Mhat^mu = e^mu E[sum_nu M^{mu nu}] / p_mu`` and
    ``col_*`` the analogous quantity for Bob.
    """

    lower: np.ndarray
    upper: np.ndarray
    row_lower: np.ndarray
    row_upper: np.ndarray
    col_lower: np.ndarray
    col_upper: np.ndarray

    def __post_init__(self):
        for lo, hi in ((self.lower, self.upper), (self.row_lower, self.row_upper), (self.col_lower, self.col_upper)):
            if np.any(lo < 0) or np.any(lo > hi):
                raise ValueError("HatMBounds needs 0 <= lower <= upper entrywise")

    @classmethod
    def exact(cls, hat: np.ndarray, row: np.ndarray, col: np.ndarray) -> "HatMBounds":
        """Collapsed intervals, for known expectations."""
        hat, row, col = (np.asarray(v, dtype=float) for v in (hat, row, col))
        return cls(hat, hat.copy(), row, row.copy(), col, col.copy())


def _kappa_mu(m):
    return np.asarray(m, dtype=float)


def _kappa_one(m):
    return np.ones(3)


def _w_pairs(f):
    def w(m):
        return f(m[0], m[1]), f(m[1], m[2])

    return w


def _w_vacuum_side(m):
    return (m[0] - m[1]) * m[0], (m[1] - m[2]) * m[2]


_w_m00 = _w_pairs(lambda s, i: s * s * i - i * i * s)
_w_sq = _w_pairs(lambda s, i: s * s - i * i)
_w_lin = _w_pairs(lambda s, i: s - i)


@dataclass(frozen=True)
class OmegaSpec:
    """One separable linear combination of the ``Mhat`` matrix.

    ``kappa_*`` map an intensity triple to three positive weights and ``w_*``
    map it to the pair ``(w^{01}, w^{12})`` of positive weights for the
    (largest, middle) and (middle, smallest) intensity pairs. ``negate`` marks
    combinations whose target coefficient comes out negative, so that the
    target is bounded through ``-Omega``.
    """

    kappa_a: Callable
    kappa_b: Callable
    w_a: Callable
    w_b: Callable
    target: Tuple[int, int]
    negate: bool = False


OMEGA_SPECS: Dict[str, OmegaSpec] = {
    "00": OmegaSpec(_kappa_mu, _kappa_mu, _w_m00, _w_m00, (0, 0)),
    "11": OmegaSpec(_kappa_one, _kappa_one, _w_sq, _w_sq, (1, 1)),
    "22": OmegaSpec(_kappa_one, _kappa_one, _w_lin, _w_lin, (2, 2)),
    "02": OmegaSpec(_kappa_mu, _kappa_one, _w_vacuum_side, _w_lin, (0, 2)),
    "20": OmegaSpec(_kappa_one, _kappa_mu, _w_lin, _w_vacuum_side, (2, 0)),
    "13": OmegaSpec(_kappa_one, _kappa_one, _w_sq, _w_lin, (1, 3), negate=True),
    "31": OmegaSpec(_kappa_one, _kappa_one, _w_lin, _w_sq, (3, 1), negate=True),
}


def side_vector(kappa: np.ndarray, w01: float, w12: float) -> np.ndarray:
    """Per-intensity weights ``a_k`` of one user's factor of ``chat``.

    Expanding the nested differences gives
    ``(w12 k1, -(w12 k0 + w01 k2), w01 k1)``, whose sign pattern is
    ``(+, -, +)`` whenever all weights are positive.
    """
    k0, k1, k2 = kappa
    return np.array([w12 * k1, -(w12 * k0 + w01 * k2), w01 * k1])


def _sides(spec: OmegaSpec, mus_a: np.ndarray, mus_b: np.ndarray):
    a = side_vector(spec.kappa_a(mus_a), *spec.w_a(mus_a))
    b = side_vector(spec.kappa_b(mus_b), *spec.w_b(mus_b))
    return a, b


def chat_matrix(spec: OmegaSpec, mus_a, mus_b=None) -> np.ndarray:
    """Coefficients ``chat_kl`` of ``Omega`` in the ``Mhat`` basis."""
    mus_a = np.asarray(mus_a, dtype=float)
    mus_b = mus_a if mus_b is None else np.asarray(mus_b, dtype=float)
    a, b = _sides(spec, mus_a, mus_b)
    return np.outer(a, b)


def g_coefficients(side: np.ndarray, mus, probs, n_max: int) -> np.ndarray:
    """``g(n) = sum_k a_k mu_k^n / (n! p_{n|Z})`` for ``n = 0..n_max``.

    With ``n! p_{n|Z} = sum_k p_k e^{-mu_k} mu_k^n`` the factorials cancel;
    numerator and denominator are both scaled by ``mu_0^n`` to stay in range.
    """
    mus = np.asarray(mus, dtype=float)
    probs = np.asarray(probs, dtype=float)
    n = np.arange(n_max + 1)[:, None]
    ratios = (mus / mus[0])[None, :] ** n
    num = ratios @ np.asarray(side, dtype=float)
    den = ratios @ (probs * np.exp(-mus))
    return num / den


def c_nm(spec: OmegaSpec, intensities: Intensities, n_max: int) -> np.ndarray:
    """Photon-number coefficients ``c_nm`` of ``Omega`` (unnegated), ``n, m <= n_max``."""
    mus, probs = intensities.mus, intensities.probs
    a, b = _sides(spec, mus, mus)
    return np.outer(g_coefficients(a, mus, probs, n_max), g_coefficients(b, mus, probs, n_max))


def omega_upper(spec: OmegaSpec, hat: HatMBounds, mus_a, mus_b=None) -> float:
    """Largest value of ``Omega`` compatible with the ``Mhat`` intervals."""
    c = chat_matrix(spec, mus_a, mus_b)
    return math.fsum(np.where(c > 0, c * hat.upper, c * hat.lower).ravel())


def omega_lower(spec: OmegaSpec, hat: HatMBounds, mus_a, mus_b=None) -> float:
    """Smallest value of ``Omega`` compatible with the ``Mhat`` intervals."""
    c = chat_matrix(spec, mus_a, mus_b)
    return math.fsum(np.where(c > 0, c * hat.lower, c * hat.upper).ravel())


def hat_m_bounds(
    counts: ObservedCounts, params: ProtocolParams, sec: Optional[SecurityParams], exact: bool = False
) -> HatMBounds:
    """Chernoff intervals on ``Mhat`` from observed counts.

    Each of the nine joint counts and the four marginals feeding the vacuum
    lower bounds (both users' middle and smallest intensities) is one
    inverse-Chernoff application at ``sec.eps_chernoff``. The two unused
    marginals (largest intensity) are filled in for completeness but are not
    consumed downstream. ``exact=True`` treats the counts as their own
    expectations.
    """
    mat = counts.matrix
    it = params.intensities
    mus, probs = it.mus, it.probs
    scale = np.outer(np.exp(mus) / probs, np.exp(mus) / probs)
    row_scale = np.exp(mus) / probs
    rows, cols = mat.sum(axis=1), mat.sum(axis=0)
    if exact:
        return HatMBounds.exact(mat * scale, rows * row_scale, cols * row_scale)
    if sec is None:
        raise ValueError("security parameters are required unless exact=True")
    eps = sec.eps_chernoff

    def interval(x):
        ci = chernoff_mean_bounds(float(x), eps)
        return ci.expectation_lower, ci.expectation_upper

    lo = np.empty((3, 3))
    hi = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            lo[i, j], hi[i, j] = interval(mat[i, j])
    marg = [np.array([interval(v) for v in vec]) for vec in (rows, cols)]
    return HatMBounds(
        lo * scale,
        hi * scale,
        marg[0][:, 0] * row_scale,
        marg[0][:, 1] * row_scale,
        marg[1][:, 0] * row_scale,
        marg[1][:, 1] * row_scale,
    )


def c_max(name: str, intensities: Intensities) -> float:
    """Bound on ``|c_nm|`` over the negative-coefficient set of family ``name``.

    Relies on ``g(n) <= a_0 / (e^{-mu_0} p_{mu_0})`` for every ``n`` beyond
    the degree annihilated by the side vector.
    """
    mus, probs = intensities.mus, intensities.probs
    mu0, mu1, mu2 = mus
    head = math.exp(-mu0) * probs[0]
    sq = (mu1 * mu1 - mu2 * mu2) / head
    lin = (mu1 - mu2) / head
    if name == "11":
        spec = OMEGA_SPECS["11"]
        a, b = _sides(spec, mus, mus)
        ga1 = abs(g_coefficients(a, mus, probs, 1)[1])
        gb1 = abs(g_coefficients(b, mus, probs, 1)[1])
        return max(sq * gb1, sq * ga1)
    if name in ("13", "31"):
        return lin * sq
    raise ValueError(f"no c_max for family {name!r}")


def vacuum_marginal_lower(hat: HatMBounds, intensities: Intensities, side: str) -> float:
    """Lower bound on the counts where one user emitted vacuum.

    ``side="A"`` bounds ``sum_m M_0m`` from Alice's marginals and ``"B"``
    bounds ``sum_n M_n0`` from Bob's.
    """
    mus, probs = intensities.mus, intensities.probs
    lo, hi = (hat.row_lower, hat.row_upper) if side == "A" else (hat.col_lower, hat.col_upper)
    p0 = math.fsum(probs * np.exp(-mus))
    _, mu1, mu2 = mus
    return p0 * (mu1 * lo[2] - mu2 * hi[1]) / (mu1 - mu2)


def _finite(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise EstimationError(f"bound {name} evaluated to {value!r}")
    return value


def bounds_from_hat(hat: HatMBounds, intensities: Intensities, m_z: float) -> DecoyBounds:
    """All nine ``M_nm^U`` and both vacuum-marginal lower bounds from ``hat``.

    Upper bounds are clamped to ``[0, m_z]`` and the marginal lower bounds to
    ``>= 0``; ``raw_upper`` keeps the unclamped values.
    """
    it = intensities
    mus = it.mus
    raw: Dict[Tuple[int, int], float] = {}
    coeff: Dict[str, np.ndarray] = {}
    for name, spec in OMEGA_SPECS.items():
        coeff[name] = c_nm(spec, it, 4)

    def clamp(v):
        return min(max(v, 0.0), m_z)

    om_u = {k: omega_upper(s, hat, mus) for k, s in OMEGA_SPECS.items()}
    raw[(0, 0)] = _finite("M00", om_u["00"] / coeff["00"][0, 0])
    m00 = clamp(raw[(0, 0)])

    m0a = max(_finite("M0A", vacuum_marginal_lower(hat, it, "A")), 0.0)
    m0b = max(_finite("M0B", vacuum_marginal_lower(hat, it, "B")), 0.0)
    rest = m_z - m0a - m0b + m00

    cm = c_max("11", it)
    raw[(1, 1)] = _finite("M11", (om_u["11"] + cm * rest) / (coeff["11"][1, 1] + cm))
    raw[(2, 2)] = _finite("M22", om_u["22"] / coeff["22"][2, 2])
    raw[(0, 2)] = _finite("M02", om_u["02"] / coeff["02"][0, 2])
    raw[(0, 4)] = _finite("M04", om_u["02"] / coeff["02"][0, 4])
    raw[(2, 0)] = _finite("M20", om_u["20"] / coeff["20"][2, 0])
    raw[(4, 0)] = _finite("M40", om_u["20"] / coeff["20"][4, 0])
    for name, (i, j) in (("13", (1, 3)), ("31", (3, 1))):
        spec = OMEGA_SPECS[name]
        cm = c_max(name, it)
        target = -coeff[name][i, j]
        om_l = omega_lower(spec, hat, mus)
        raw[(i, j)] = _finite(f"M{i}{j}", (cm * rest - om_l) / (target + cm))

    upper = {k: clamp(v) for k, v in raw.items()}
    return DecoyBounds(upper, m0a, m0b, raw)


def decoy_upper_bounds(
    counts: ObservedCounts, params: ProtocolParams, sec: Optional[SecurityParams], exact: bool = False
) -> DecoyBounds:
    """Upper bounds ``M_nm^U`` for the nine pairs with ``n + m <= 4``.

    Parameters
    ----------
    counts : ObservedCounts
        Observed Z-basis matrix ``M^{mu nu}`` (rows Alice, columns Bob).
    params : ProtocolParams
        Supplies the intensities and their probabilities.
    sec : SecurityParams or None
        ``eps_chernoff`` is used for each of the thirteen Chernoff intervals.
    exact : bool
        Treat observed counts as exact expectations (asymptotic evaluation).

    Returns
    -------
    DecoyBounds

    Raises
    ------
    EstimationError
        If any intermediate bound is not finite.
    """
    hat = hat_m_bounds(counts, params, sec, exact=exact)
    return bounds_from_hat(hat, params.intensities, counts.m_z)
