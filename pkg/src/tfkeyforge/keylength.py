"""Failure-probability bookkeeping and the secret-key length."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .numerics import binary_entropy
from .protocol import SecurityParams

__all__ = [
    "EpsilonBudget",
    "MARGINAL_CHERNOFF_USES",
    "count_uses",
    "epsilon_budget",
    "default_security",
    "lambda_ec",
    "key_length",
    "key_length_raw",
]

# the vacuum-marginal lower bounds consume two Chernoff intervals per user
MARGINAL_CHERNOFF_USES = 4


@dataclass(frozen=True)
class EpsilonBudget:
    """Composed failure probabilities.

    ``eps_param`` is the parameter-estimation failure probability ``eps``,
    ``eps_secret = 2 eps + eps_pa`` and ``eps_sec = eps_cor + eps_secret``.
    """

    eps_param: float
    eps_secret: float
    eps_sec: float
    n_chernoff_uses: int
    n_kato_uses: int
    compat_budget: bool


def count_uses(d: int, s_cut: int, compat: bool) -> tuple:
    """Number of (Chernoff, Kato) applications in one key-rate evaluation."""
    n_ch = d * d + (0 if compat else MARGINAL_CHERNOFF_USES)
    n_kato = (s_cut // 2 + 1) ** 2 + 1
    return n_ch, n_kato


def epsilon_budget(sec: SecurityParams, s_cut: int = 4, compat: bool = False) -> EpsilonBudget:
    """Sum the failure probabilities of every concentration bound.

    ``compat=True`` omits the marginal intervals (``9 eps_c + 10 eps_a``
    for three intensities and ``s_cut = 4``); the default also charges the
    four marginal Chernoff intervals (``13 eps_c + 10 eps_a``).
    """
    n_ch, n_kato = count_uses(sec.d, s_cut, compat)
    eps = n_ch * sec.eps_chernoff + n_kato * sec.eps_kato
    eps_s = 2.0 * eps + sec.eps_pa
    return EpsilonBudget(eps, eps_s, sec.eps_cor + eps_s, n_ch, n_kato, compat)


def default_security(
    eps_cor: float = 1e-10, eps_s: float = 1e-10, s_cut: int = 4, compat: bool = False, d: int = 3
) -> SecurityParams:
    """Split a secrecy target evenly: ``eps = eps_pa = eps_s / 3`` and ``eps_c = eps_a``."""
    eps = eps_s / 3.0
    n_ch, n_kato = count_uses(d, s_cut, compat)
    each = eps / (n_ch + n_kato)
    return SecurityParams(eps_cor=eps_cor, eps_pa=eps, eps_chernoff=each, eps_kato=each, d=d)


def lambda_ec(m_x: float, e_x_obs: float, f: float) -> float:
    """Error-correction leakage ``f M_X h(e_X)`` in bits."""
    if f < 1.0:
        raise ValueError(f"inefficiency f must be >= 1, got {f!r}")
    return f * m_x * binary_entropy(e_x_obs)


def key_length_raw(m_x: float, e_ph_upper: float, lambda_ec_bits: float, sec: SecurityParams) -> float:
    """Unfloored key-length expression; negative when no key can be extracted."""
    h = binary_entropy(min(max(e_ph_upper, 0.0), 0.5))
    return (
        m_x * (1.0 - h)
        - lambda_ec_bits
        - math.log2(2.0 / sec.eps_cor)
        - math.log2(1.0 / (4.0 * sec.eps_pa * sec.eps_pa))
    )


def key_length(m_x: float, e_ph_upper: float, lambda_ec_bits: float, sec: SecurityParams) -> int:
    """Secret-key length in bits, floored to an integer and at zero.

    Phase-error rates above one half are capped at one half, where the
    entropy term removes every bit.
    """
    raw = key_length_raw(m_x, e_ph_upper, lambda_ec_bits, sec)
    if not math.isfinite(raw) or raw <= 0.0:
        return 0
    return int(math.floor(raw))
