"""Independent verification oracles: Monte-Carlo sampling and an exact LP.

Nothing here is used on the production path. The Monte-Carlo routines give
every trial its own random stream derived from ``(seed, trial)``, so results
do not depend on execution order. The LP oracle solves the decoy estimation
problem exactly on a truncated photon-number space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numba
import numpy as np
from scipy.optimize import linprog

from .concentration import chernoff_mean_bounds, kato_coefficients, kato_delta_optimized, kato_delta_simple
from .decoy import HatMBounds
from .protocol import Intensities

__all__ = [
    "McConfig",
    "trial_seeds",
    "mc_coverage_chernoff",
    "constant_schedule",
    "alternating_schedule",
    "flip_flop_schedule",
    "drift_schedule",
    "kato_sample",
    "kato_failure_rate",
    "mc_coverage_kato",
    "assignment_probabilities",
    "expected_assignment",
    "mc_intensity_assignment",
    "mc_assignment_mean",
    "hat_from_photon_counts",
    "LpResult",
    "lp_decoy_oracle",
]


@dataclass(frozen=True)
class McConfig:
    seed: int = 0
    trials: int = 10_000
    n_max: int = 6

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def trial_seeds(cfg: McConfig) -> np.ndarray:
    """One 32-bit seed per trial, a pure function of ``(cfg.seed, trial)``."""
    return np.random.SeedSequence(cfg.seed).generate_state(cfg.trials, dtype=np.uint32)


def _binomial_draws(cfg: McConfig, n: int, p: float) -> np.ndarray:
    out = np.empty(cfg.trials, dtype=np.int64)
    for t, s in enumerate(trial_seeds(cfg)):
        out[t] = np.random.default_rng(int(s)).binomial(n, p)
    return out


def mc_coverage_chernoff(cfg: McConfig, p: float, n: int, eps: float) -> float:
    """Fraction of trials whose Chernoff interval misses the true mean ``n p``."""
    if eps >= 1.0:
        return 0.0
    draws = _binomial_draws(cfg, n, p)
    mean = n * p
    miss = {}
    for chi in np.unique(draws):
        ci = chernoff_mean_bounds(float(chi), eps)
        miss[chi] = not ci.contains(mean)
    return float(np.mean([miss[c] for c in draws]))


# Kato schedules: njit functions (u, count, last) -> probability of a 1 at
# round u given the number of ones so far and the previous outcome.


def constant_schedule(p: float):
    @numba.njit
    def schedule(u, count, last):
        return p

    return schedule


def alternating_schedule():
    """Deterministic 0/1 pattern; the sum of probabilities equals the count."""

    @numba.njit
    def schedule(u, count, last):
        return 1.0 if u % 3 == 0 else 0.0

    return schedule


def flip_flop_schedule(p_after_one: float, p_after_zero: float):
    """Two-state Markov chain: the next probability depends on the last outcome."""

    @numba.njit
    def schedule(u, count, last):
        return p_after_one if last == 1 else p_after_zero

    return schedule


def drift_schedule(p_low: float, p_high: float, target_rate: float):
    """Pushes towards ``p_high`` while the running rate is below ``target_rate``."""

    @numba.njit
    def schedule(u, count, last):
        if count < target_rate * (u + 1):
            return p_high
        return p_low

    return schedule


@numba.njit
def _kato_path(schedule, uniforms):
    total = 0.0
    count = 0
    last = 0
    for u in range(uniforms.shape[0]):
        p = schedule(u, count, last)
        total += p
        if uniforms[u] < p:
            count += 1
            last = 1
        else:
            last = 0
    return total, count


def kato_sample(cfg: McConfig, schedule, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Per trial: sum of conditional probabilities and realised number of ones.

    Each trial draws its ``n`` uniforms in bulk from its own generator; the
    jitted loop then walks the schedule over them.
    """
    sums = np.empty(cfg.trials)
    counts = np.empty(cfg.trials, dtype=np.int64)
    for t, s in enumerate(trial_seeds(cfg)):
        sums[t], counts[t] = _kato_path(schedule, np.random.default_rng(int(s)).random(n))
    return sums, counts


def kato_failure_rate(
    sums: np.ndarray, counts: np.ndarray, n: int, eps_a: float, lambda_pred: Optional[float] = None
) -> float:
    """Fraction of samples with ``sum > count + Delta``.

    With ``lambda_pred`` the optimised deviation tuned to that prediction is
    used, otherwise the simple ``a = 0`` deviation.
    """
    if lambda_pred is None:
        dev = np.full(len(counts), kato_delta_simple(n, eps_a))
    else:
        coeffs = kato_coefficients(n, lambda_pred, eps_a)
        dev = np.array([kato_delta_optimized(coeffs, float(c)) for c in counts])
    return float(np.mean(sums > counts + dev))


def mc_coverage_kato(
    cfg: McConfig, schedule, n: int, eps_a: float, lambda_pred: Optional[float] = None
) -> float:
    """Empirical failure frequency of the Kato bound under ``schedule``."""
    sums, counts = kato_sample(cfg, schedule, n)
    return kato_failure_rate(sums, counts, n, eps_a, lambda_pred)


def assignment_probabilities(n: int, m: int, intensities: Intensities) -> np.ndarray:
    """``p_{mu nu | nm}``: which intensity pair produced an ``(n, m)`` event."""
    mus, probs = intensities.mus, intensities.probs
    with np.errstate(divide="ignore"):
        log_pa = np.where(probs > 0, np.log(np.where(probs > 0, probs, 1.0)), -np.inf)
    single_n = log_pa - mus + _xlog(n, mus)
    single_m = log_pa - mus + _xlog(m, mus)
    w = single_n[:, None] + single_m[None, :]
    w = np.exp(w - np.max(w))
    return w / w.sum()


def _xlog(k: int, x: np.ndarray) -> np.ndarray:
    if k == 0:
        return np.zeros_like(x)
    with np.errstate(divide="ignore"):
        return k * np.log(x)


def expected_assignment(m_true: Dict[Tuple[int, int], float], intensities: Intensities) -> np.ndarray:
    """``E[M^{mu nu}] = sum_nm p_{mu nu | nm} M_nm``."""
    out = np.zeros((3, 3))
    for (n, m), c in m_true.items():
        out += c * assignment_probabilities(n, m, intensities)
    return out


def mc_intensity_assignment(
    cfg: McConfig, m_true: Dict[Tuple[int, int], int], intensities: Intensities, trial: int = 0
) -> np.ndarray:
    """One multinomial assignment of photon-number events to intensity pairs."""
    rng = np.random.default_rng([cfg.seed, trial])
    out = np.zeros(9, dtype=np.int64)
    for (n, m), c in sorted(m_true.items()):
        out += rng.multinomial(int(c), assignment_probabilities(n, m, intensities).ravel())
    return out.reshape(3, 3)


def mc_assignment_mean(cfg: McConfig, m_true: Dict[Tuple[int, int], int], intensities: Intensities):
    """Sample mean and standard error of ``M^{mu nu}`` over ``cfg.trials`` assignments."""
    draws = np.array([mc_intensity_assignment(cfg, m_true, intensities, t) for t in range(cfg.trials)], dtype=float)
    return draws.mean(axis=0), draws.std(axis=0, ddof=1) / math.sqrt(cfg.trials)


def _single_z(n_max: int, intensities: Intensities) -> np.ndarray:
    # n! p_{n|Z}: the factorial cancels against the mu^n / n! numerators
    mus, probs = intensities.mus, intensities.probs
    n = np.arange(n_max + 1)[:, None]
    return (mus[None, :] ** n) @ (probs * np.exp(-mus))


def _design(n_max: int, intensities: Intensities):
    mus = intensities.mus
    n = np.arange(n_max + 1)
    # single[k, n] = mu_k^n / (n! p_{n|Z})
    single = (mus[:, None] ** n[None, :]) / _single_z(n_max, intensities)[None, :]
    joint = np.einsum("kn,lm->klnm", single, single).reshape(9, -1)
    ones = np.ones(n_max + 1)
    rows = np.einsum("kn,m->knm", single, ones).reshape(3, -1)
    cols = np.einsum("n,km->knm", ones, single).reshape(3, -1)
    return joint, rows, cols


def hat_from_photon_counts(m_nm: np.ndarray, intensities: Intensities) -> HatMBounds:
    """Exact ``Mhat`` intervals (collapsed) generated by a truncated ``M_nm`` table."""
    m_nm = np.asarray(m_nm, dtype=float)
    joint, rows, cols = _design(m_nm.shape[0] - 1, intensities)
    v = m_nm.ravel()
    return HatMBounds.exact((joint @ v).reshape(3, 3), rows @ v, cols @ v)


_COLLAPSE_SLACK = 1e-11


@dataclass(frozen=True)
class LpResult:
    value: float
    feasible: bool
    message: str
    solution: Optional[np.ndarray] = None


def lp_decoy_oracle(
    hat: HatMBounds, n_max: int, target: Tuple[int, int], intensities: Intensities, m_z: float
) -> LpResult:
    """Exact maximum of ``M_target`` over ``{M_nm >= 0 : n, m <= n_max}``.

    Constraints: every joint and marginal ``Mhat`` within its interval, and
    ``sum M_nm <= m_z``. Dropping the variables above ``n_max`` only shrinks
    the feasible set, so the optimum never exceeds that of the full problem.
    """
    if n_max > 8:
        raise ValueError("the LP oracle is meant for n_max <= 8")
    joint, rows, cols = _design(n_max, intensities)
    A = np.vstack([joint, rows, cols])
    lo = np.concatenate([hat.lower.ravel(), hat.row_lower, hat.col_lower])
    hi = np.concatenate([hat.upper.ravel(), hat.row_upper, hat.col_upper])
    scale = max(m_z, 1.0)
    nv = A.shape[1]
    # marginal rows are combinations of joint rows, so collapsed intervals give
    # a rank-deficient equality system; a relative slack absorbs rounding
    width = _COLLAPSE_SLACK * np.maximum(np.abs(hi), 1e-300)
    tight = hi - lo < width
    lo = np.where(tight, lo - width, lo)
    hi = np.where(tight, hi + width, hi)
    norm = np.abs(A).max(axis=1)
    An = A / norm[:, None]
    A_ub = np.vstack([An, -An, np.ones((1, nv))])
    b_ub = np.concatenate([hi / norm, -lo / norm, [m_z]]) / scale
    c = np.zeros(nv)
    c[target[0] * (n_max + 1) + target[1]] = -1.0
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        return LpResult(math.nan, False, res.message)
    x = res.x * scale
    return LpResult(float(x[target[0] * (n_max + 1) + target[1]]), True, res.message, x.reshape(n_max + 1, -1))
