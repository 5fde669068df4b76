"""End-to-end key-rate evaluation: counts in, certified key length out."""

from __future__ import annotations

import logging
from typing import Optional

from .channel import ChannelParams, expected_counts
from .concentration import kato_coefficients
from .decoy import decoy_upper_bounds
from .errors import ConfigError, DegenerateInputError, EstimationError, TailDivergenceError
from .keylength import epsilon_budget, key_length, key_length_raw, lambda_ec
from .phase_error import phase_error_bound
from .protocol import KeyRateResult, ObservedCounts, ProtocolParams, SecurityParams, validate

__all__ = ["key_rate_from_counts", "evaluate", "predicted_m00"]

log = logging.getLogger(__name__)


def _pair_key(pair) -> str:
    return f"M{pair[0]}{pair[1]}"


def predicted_m00(predicted: ObservedCounts, params: ProtocolParams, sec: SecurityParams) -> float:
    """Decoy bound ``M_00^U`` that the given predicted counts would yield."""
    return decoy_upper_bounds(predicted, params, sec).m_upper[(0, 0)]


def key_rate_from_counts(
    counts: ObservedCounts,
    params: ProtocolParams,
    sec: SecurityParams,
    f: float,
    predicted: Optional[ObservedCounts] = None,
    compat: bool = False,
    asymptotic: bool = False,
) -> KeyRateResult:
    """Certified key length for observed counts.

    Parameters
    ----------
    counts : ObservedCounts
        Observed sifted data.
    params : ProtocolParams
        Settings the data were taken with.
    sec : SecurityParams
        Per-application failure probabilities.
    f : float
        Error-correction inefficiency.
    predicted : ObservedCounts, optional
        Counts expected before the run, used to tune the vacuum Kato bound.
        Defaults to ``counts`` itself.
    compat : bool
        Omit the marginal Chernoff intervals from the epsilon accounting.
    asymptotic : bool
        Drop all statistical fluctuations (Chernoff intervals collapsed,
        every Kato deviation zero).

    Returns
    -------
    KeyRateResult
        Zero-rate results carry a ``reason``; numerical failures inside the
        estimation chain are reported this way rather than raised.
    """
    n = params.n_rounds
    budget = epsilon_budget(sec, params.s_cut, compat)
    diag = {
        "eps": budget.eps_param,
        "eps_s": budget.eps_secret,
        "eps_sec": budget.eps_sec,
        "n_chernoff_uses": budget.n_chernoff_uses,
        "n_kato_uses": budget.n_kato_uses,
        "eps_budget": "compat" if compat else "strict",
        "asymptotic": asymptotic,
        "m_x": counts.m_x,
        "m_z": counts.m_z,
        "e_x": counts.e_x_obs,
    }
    if counts.m_x <= 0:
        return KeyRateResult.zero(n, "M_X = 0", **diag)
    try:
        decoy = decoy_upper_bounds(counts, params, sec, exact=asymptotic)
        diag.update({_pair_key(k): v for k, v in sorted(decoy.m_upper.items())})
        diag["M0A_lower"] = decoy.m0a_lower
        diag["M0B_lower"] = decoy.m0b_lower
        kato00 = None
        if not asymptotic:
            if predicted is None or predicted == counts:
                m00_pred = decoy.m_upper[(0, 0)]
            else:
                m00_pred = predicted_m00(predicted, params, sec)
            m00_pred = min(m00_pred, counts.m_s)
            kato00 = kato_coefficients(counts.m_s, m00_pred, sec.eps_kato)
            diag.update(m00_predicted=m00_pred, kato_a=kato00.a, kato_b=kato00.b, kato_fallback=kato00.fallback)
        pe = phase_error_bound(decoy, counts, params, sec, kato00, asymptotic=asymptotic)
    except TailDivergenceError as exc:
        return KeyRateResult.zero(n, "tail divergence", detail=str(exc), **diag)
    except (EstimationError, DegenerateInputError, OverflowError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        log.debug("estimation failed: %s", exc)
        return KeyRateResult.zero(n, f"estimation error: {exc}", **diag)
    diag.update(
        delta=pe.delta,
        delta00=pe.delta00,
        t0=pe.tails.t0,
        t1=pe.tails.t1,
        bracket0=pe.brackets[0],
        bracket1=pe.brackets[1],
    )
    e_ph_raw = pe.n_ph_upper / counts.m_x
    e_ph = min(max(e_ph_raw, 0.0), 1.0)
    lam = lambda_ec(counts.m_x, counts.e_x_obs, f)
    raw = key_length_raw(counts.m_x, e_ph, lam, sec)
    ell = key_length(counts.m_x, e_ph, lam, sec)
    diag.update(
        e_ph_unclamped=e_ph_raw,
        e_ph_clamped=e_ph_raw > 1.0,
        e_ph_capped=e_ph > 0.5,
        lambda_ec=lam,
        key_length_raw=raw,
    )
    reason = None
    if ell == 0:
        reason = "phase-error rate above 1/2" if e_ph >= 0.5 else "key length not positive"
    rate = ell / n if n > 0 else 0.0
    return KeyRateResult(pe.n_ph_upper, e_ph, ell, rate, n, diag, reason)


def evaluate(
    point: ProtocolParams,
    ch: ChannelParams,
    sec: SecurityParams,
    convention: str = "intensity",
    compat: bool = False,
    asymptotic: bool = False,
    rounding: bool = True,
) -> KeyRateResult:
    """Simulate expected counts for ``point`` over ``ch`` and evaluate them.

    The vacuum Kato bound is tuned to the channel-model prediction, which for
    nominal simulation coincides with the observed counts.
    """
    issues = validate(point, sec)
    if any(i.code == "tail_divergence" for i in issues):
        return KeyRateResult.zero(point.n_rounds, "tail divergence", issues=[str(i) for i in issues])
    if issues:
        raise ConfigError(issues)
    counts = expected_counts(point, ch, convention, rounding=rounding and not asymptotic)
    res = key_rate_from_counts(counts, point, sec, ch.f, compat=compat, asymptotic=asymptotic)
    res.diagnostics["loss_db"] = ch.loss_db
    res.diagnostics["convention"] = convention
    return res
