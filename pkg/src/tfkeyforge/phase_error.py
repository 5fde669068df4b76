"""Upper bound on the number of phase errors in the sifted key.

The bound combines, for each parity class ``j`` (both photon numbers even or
both odd), the decoy upper bounds of the low photon-number pairs with a tail
term covering every pair above the cutoff:

    N_ph^U = (p_X/p_Z)^2 sum_j [ sum_{n+m<=S} r_nm sqrt(M_nm^U + D_nm)
                                 + sqrt(M_Z + D) t_j ]^2 + D,

with ``r_nm = sqrt(p_{nm|X} / p_{nm|Z})``. Both photon-number distributions
factorise over the two users, so ``r_nm = r_n r_m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from .concentration import KatoCoefficients, kato_delta_optimized, kato_delta_simple
from .errors import ConfigError, DegenerateInputError, EstimationError, TailDivergenceError
from .protocol import PAIRS_S4, DecoyBounds, Intensities, Issue, ObservedCounts, ProtocolParams, SecurityParams

__all__ = [
    "N_TRUNC",
    "TailCoefficients",
    "PhaseErrorBound",
    "pairs_for_cutoff",
    "pn_x",
    "pn_z",
    "pnm_x",
    "pnm_z",
    "ratio_vector",
    "tail_coefficients",
    "phase_error_bound",
    "nph_upper",
    "eph_upper",
]

N_TRUNC = 200


def pairs_for_cutoff(s_cut: int) -> Tuple[Tuple[int, int], ...]:
    """Same-parity pairs with ``n + m <= s_cut`` covered by the decoy bounds."""
    if s_cut not in (2, 4):
        raise ConfigError([Issue("s_cut", f"analytical decoy bounds cover s_cut in (2, 4), got {s_cut!r}")])
    return tuple(p for p in PAIRS_S4 if p[0] + p[1] <= s_cut)


def _log_pn_x(n: np.ndarray, alpha2: float) -> np.ndarray:
    return -alpha2 + xlogy(n, alpha2) - gammaln(n + 1)


def _log_pn_z(n: np.ndarray, intensities: Intensities) -> np.ndarray:
    mus, probs = intensities.mus, intensities.probs
    terms = np.log(probs)[None, :] - mus[None, :] + xlogy(n[:, None], mus[None, :])
    return logsumexp(terms, axis=1) - gammaln(n + 1)


def pn_x(n, alpha: float) -> np.ndarray:
    """Photon-number distribution of one X-basis coherent pulse of amplitude ``alpha``."""
    n = np.asarray(n, dtype=float)
    return np.exp(_log_pn_x(np.atleast_1d(n), alpha * alpha)).reshape(n.shape)


def pn_z(n, intensities: Intensities) -> np.ndarray:
    """Poisson mixture over the Z-basis intensities for one user."""
    n = np.asarray(n, dtype=float)
    return np.exp(_log_pn_z(np.atleast_1d(n), intensities)).reshape(n.shape)


def pnm_x(n: int, m: int, alpha: float) -> float:
    """``e^{-2 alpha^2} alpha^{2(n+m)} / (n! m!)``, evaluated in log space."""
    a2 = alpha * alpha
    return float(np.exp(_log_pn_x(np.array([n, m], dtype=float), a2).sum()))


def pnm_z(n: int, m: int, intensities: Intensities) -> float:
    """Probability that Z-basis pulses carry ``n`` and ``m`` photons."""
    return float(np.exp(_log_pn_z(np.array([n, m], dtype=float), intensities).sum()))


def ratio_vector(alpha: float, intensities: Intensities, n_max: int) -> np.ndarray:
    """``r_n = sqrt(p_{n|X} / p_{n|Z})`` for ``n = 0..n_max``; factorials cancel."""
    n = np.arange(n_max + 1, dtype=float)
    mus, probs = intensities.mus, intensities.probs
    log_x = -alpha * alpha + xlogy(n, alpha * alpha)
    log_z = logsumexp(np.log(probs)[None, :] - mus[None, :] + xlogy(n[:, None], mus[None, :]), axis=1)
    return np.exp(0.5 * (log_x - log_z))


@dataclass(frozen=True)
class TailCoefficients:
    """Certified over-estimates of the parity-resolved tail sums.

    ``t[j] = partial[j] + remainder[j]``: the partial sum is exact over
    ``s_cut < n + m <= n_trunc``; the remainder bounds everything beyond.
    """

    t0: float
    t1: float
    partial: Tuple[float, float]
    remainder: Tuple[float, float]
    n_trunc: int

    def __getitem__(self, j: int) -> float:
        return (self.t0, self.t1)[j]


def tail_coefficients(params: ProtocolParams, n_trunc: int = N_TRUNC) -> TailCoefficients:
    """Sum of ``r_n r_m`` over same-parity pairs above the cutoff.

    Beyond ``n_trunc`` each term is bounded using
    ``p_{nm|Z} >= p_{mu0}^2 p_{n|mu0} p_{m|mu0}``, which gives
    ``r_n r_m <= C rho^{n+m}`` with ``C = e^{mu0 - alpha^2} / p_{mu0}`` and
    ``rho = alpha / sqrt(mu0)``. Grouping by ``k = (n+m)/2`` turns the
    remainder into closed-form arithmetico-geometric series in ``rho^2``.

    Raises
    ------
    TailDivergenceError
        If ``alpha^2 >= mu0``.
    """
    it = params.intensities
    a2 = params.alpha2
    if not a2 < it.mu0:
        raise TailDivergenceError(f"tail sum diverges: alpha^2 = {a2!r} >= mu0 = {it.mu0!r}")
    if n_trunc % 2 or n_trunc < params.s_cut:
        raise ValueError(f"n_trunc must be even and >= s_cut, got {n_trunc!r}")
    s_cut = params.s_cut
    r = ratio_vector(params.alpha, it, n_trunc)
    partial = []
    for j in (0, 1):
        terms = []
        for s in range(s_cut + 2, n_trunc + 1, 2):
            n = np.arange(j, s + 1, 2)
            terms.append(r[n] * r[s - n])
        partial.append(math.fsum(np.concatenate(terms)) if terms else 0.0)
    x = a2 / it.mu0
    const = math.exp(it.mu0 - a2) / it.p_mu0
    K = n_trunc // 2 + 1
    xk = x**K
    geo = xk / (1.0 - x)
    tail_k = xk * (K / (1.0 - x) + x / (1.0 - x) ** 2)
    remainder = (const * (tail_k + geo), const * tail_k)
    return TailCoefficients(
        partial[0] + remainder[0], partial[1] + remainder[1], tuple(partial), remainder, n_trunc
    )


@dataclass
class PhaseErrorBound:
    n_ph_upper: float
    delta: float
    delta00: float
    brackets: Tuple[float, float]
    tails: TailCoefficients
    low_terms: Dict[Tuple[int, int], float] = field(default_factory=dict)


def phase_error_bound(
    decoy: DecoyBounds,
    counts: ObservedCounts,
    params: ProtocolParams,
    sec: SecurityParams,
    kato00: KatoCoefficients,
    asymptotic: bool = False,
    tails: TailCoefficients = None,
) -> PhaseErrorBound:
    """Evaluate ``N_ph^U`` and keep its intermediate terms.

    ``Delta = sqrt(M_s ln(1/eps_a) / 2)`` is used for every bounded pair and
    for the tail and trailing terms, except the vacuum pair, which uses the
    optimised Kato deviation evaluated at ``M_00^U``. ``asymptotic=True``
    sets every deviation to zero.
    """
    pairs = pairs_for_cutoff(params.s_cut)
    if tails is None:
        tails = tail_coefficients(params)
    m_s = counts.m_s
    if asymptotic:
        delta = delta00 = 0.0
    else:
        delta = kato_delta_simple(m_s, sec.eps_kato)
        delta00 = kato_delta_optimized(kato00, decoy.m_upper[(0, 0)])
    r = ratio_vector(params.alpha, params.intensities, 4)
    brackets = [0.0, 0.0]
    low_terms = {}
    sum_terms = ([], [])
    for n, m in pairs:
        d = delta00 if (n, m) == (0, 0) else delta
        term = r[n] * r[m] * math.sqrt(decoy.m_upper[(n, m)] + d)
        low_terms[(n, m)] = term
        sum_terms[n % 2].append(term)
    head = math.sqrt(counts.m_z + delta)
    for j in (0, 1):
        sum_terms[j].append(head * tails[j])
        brackets[j] = math.fsum(sum_terms[j])
    pref = (params.p_x / params.p_z) ** 2
    n_ph = pref * math.fsum(b * b for b in brackets) + delta
    if not math.isfinite(n_ph):
        raise EstimationError(f"N_ph^U evaluated to {n_ph!r}")
    return PhaseErrorBound(n_ph, delta, delta00, tuple(brackets), tails, low_terms)


def nph_upper(
    decoy: DecoyBounds,
    counts: ObservedCounts,
    params: ProtocolParams,
    sec: SecurityParams,
    kato00: KatoCoefficients,
    asymptotic: bool = False,
) -> float:
    """Upper bound ``N_ph^U`` on phase errors among the ``M_X`` key bits."""
    return phase_error_bound(decoy, counts, params, sec, kato00, asymptotic).n_ph_upper


def eph_upper(n_ph_upper: float, m_x: float) -> float:
    """Phase-error rate bound ``N_ph^U / M_X`` clamped to ``[0, 1]``."""
    if m_x <= 0:
        raise DegenerateInputError("M_X = 0")
    return min(max(n_ph_upper / m_x, 0.0), 1.0)
