"""Derivative-free maximisation of the key rate over protocol settings.

The six free settings are mapped to an unconstrained vector ``u`` so that
every trial point is valid by construction:

    mu0    = mu0_min + (mu0_max - mu0_min) s(u0)
    alpha2 = alpha2_min + (mu0 - alpha2_min) s(u1)      (always below mu0)
    mu1    = mu2 + (mu0 - mu2) s(u2)
    p_x    = s(u3)
    p_mu   = stick-breaking of (s(u4), s(u5))

with ``s`` the logistic function. Nelder-Mead then runs in ``u``.

Every objective call draws from one evaluation budget. The sequence of
points visited does not depend on the budget, so a larger budget only
extends the same sequence and the best rate found is nondecreasing in it.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .channel import ChannelParams
from .pipeline import evaluate
from .protocol import Intensities, KeyRateResult, ProtocolParams, SecurityParams

__all__ = ["SearchSpace", "REFERENCE_POINT", "OptimizeResult", "optimize", "objective", "to_params", "from_params"]

# alpha^2, mu0, mu1, p_x, p_mu0, p_mu1 of the hand-tuned starting point
REFERENCE_POINT = (0.02, 0.5, 0.1, 0.7, 1.0 / 3.0, 1.0 / 3.0)

_U_CLIP = 30.0
_ERROR_SCORE = -10.0


@dataclass(frozen=True)
class SearchSpace:
    """Bounds of the free parameters and the search schedule.

    ``starts`` counts the seed points (the reference point plus random
    draws). ``run_maxfev`` caps each Nelder-Mead run independently of the
    overall budget.
    """

    mu2: float = 1e-4
    mu0_min: float = 0.05
    mu0_max: float = 2.0
    alpha2_min: float = 1e-4
    starts: int = 8
    nm_runs: int = 3
    run_maxfev: int = 150
    initial_step: float = 0.6
    s_cut: int = 4

    def __post_init__(self):
        if not (0.0 <= self.mu2 < self.mu0_min and 0.0 < self.alpha2_min < self.mu0_min < self.mu0_max):
            raise ValueError("need 0 <= mu2 < mu0_min, 0 < alpha2_min < mu0_min < mu0_max")
        if self.starts < 1 or self.run_maxfev < 1 or self.nm_runs < 0:
            raise ValueError("starts and run_maxfev must be positive, nm_runs nonnegative")


def to_params(u, n_rounds: float, space: SearchSpace) -> ProtocolParams:
    """Map an unconstrained 6-vector to valid protocol settings."""
    s = expit(np.clip(np.asarray(u, dtype=float), -_U_CLIP, _U_CLIP))
    mu0 = space.mu0_min + (space.mu0_max - space.mu0_min) * s[0]
    alpha2 = space.alpha2_min + (mu0 - space.alpha2_min) * s[1]
    mu1 = space.mu2 + (mu0 - space.mu2) * s[2]
    p0 = s[4]
    p1 = (1.0 - p0) * s[5]
    p2 = 1.0 - p0 - p1
    it = Intensities(float(mu0), float(mu1), space.mu2, float(p0), float(p1), float(p2))
    return ProtocolParams(n_rounds, float(s[3]), math.sqrt(alpha2), it, space.s_cut)


def from_params(alpha2, mu0, mu1, p_x, p_mu0, p_mu1, space: SearchSpace) -> np.ndarray:
    """Inverse of :func:`to_params` for a point inside the search space."""
    s = [
        (mu0 - space.mu0_min) / (space.mu0_max - space.mu0_min),
        (alpha2 - space.alpha2_min) / (mu0 - space.alpha2_min),
        (mu1 - space.mu2) / (mu0 - space.mu2),
        p_x,
        p_mu0,
        p_mu1 / (1.0 - p_mu0),
    ]
    return logit(np.clip(np.array(s, dtype=float), 1e-12, 1 - 1e-12))


def objective(res: KeyRateResult) -> float:
    """Score to maximise: the rate, extended below zero on infeasible plateaus.

    Where no key survives, the unfloored key length per round is used, and
    phase-error rates beyond one half (where the entropy term saturates) are
    penalised linearly so the search is still pushed back.
    """
    d = res.diagnostics
    if "key_length_raw" not in d:
        return _ERROR_SCORE
    if res.key_length > 0:
        return res.rate
    n = max(res.n_rounds, 1.0)
    raw = d["key_length_raw"] - d["m_x"] * max(d["e_ph_unclamped"] - 0.5, 0.0)
    return min(raw / n, 0.0)


class _BudgetExhausted(Exception):
    pass


def _param_key(p: ProtocolParams) -> tuple:
    it = p.intensities
    return (p.alpha, it.mu0, it.mu1, p.p_x, it.p_mu0, it.p_mu1)


@dataclass
class OptimizeResult:
    params: ProtocolParams
    result: KeyRateResult
    evaluations: int
    score: float
    history: List[float] = dataclasses.field(default_factory=list)


class _Tracker:
    def __init__(self, ch, sec, n_rounds, space, budget, eval_kwargs):
        self.ch, self.sec, self.n, self.space = ch, sec, n_rounds, space
        self.budget = budget
        self.kw = eval_kwargs
        self.count = 0
        self.best: Optional[Tuple[float, ProtocolParams, KeyRateResult]] = None
        self.history: List[float] = []

    def __call__(self, u) -> float:
        if self.count >= self.budget:
            raise _BudgetExhausted
        self.count += 1
        p = to_params(u, self.n, self.space)
        res = evaluate(p, self.ch, self.sec, **self.kw)
        score = objective(res)
        if self.best is None or (score, _neg(p)) > (self.best[0], _neg(self.best[1])):
            self.best = (score, p, res)
        self.history.append(self.best[0])
        return -score


def _neg(p: ProtocolParams) -> tuple:
    # ties go to the lexicographically smallest parameter vector
    return tuple(-v for v in _param_key(p))


def optimize(
    ch: ChannelParams,
    n_rounds: float,
    sec: SecurityParams,
    search: Optional[SearchSpace] = None,
    budget: int = 500,
    seed: int = 0,
    start: Optional[Tuple[float, ...]] = None,
    **eval_kwargs,
) -> OptimizeResult:
    """Maximise the key rate for a fixed channel and block size.

    Parameters
    ----------
    ch : ChannelParams
        Channel to simulate.
    n_rounds : float
        Block size ``N``.
    sec : SecurityParams
        Failure-probability settings.
    search : SearchSpace, optional
        Bounds and schedule; defaults to ``SearchSpace()``.
    budget : int
        Maximum number of pipeline evaluations.
    seed : int
        Seed for the random starting points.
    start : tuple, optional
        ``(alpha2, mu0, mu1, p_x, p_mu0, p_mu1)`` of the first seed point;
        defaults to :data:`REFERENCE_POINT`.
    **eval_kwargs
        Forwarded to :func:`tfkeyforge.pipeline.evaluate`.

    Returns
    -------
    OptimizeResult
        Best point found; when no point yields a key its result has zero rate.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget!r}")
    space = search or SearchSpace()
    rng = np.random.default_rng(seed)
    seeds = [from_params(*(start or REFERENCE_POINT), space=space)]
    for _ in range(space.starts - 1):
        seeds.append(rng.normal(0.0, 1.5, size=6))
    track = _Tracker(ch, sec, n_rounds, space, budget, eval_kwargs)
    try:
        seed_scores = [-track(u) for u in seeds]
        order = sorted(range(len(seeds)), key=lambda i: (-seed_scores[i], i))
        runs = [seeds[i] for i in order[: space.nm_runs]]
        for u0 in runs:
            _nelder_mead(track, u0, space)
        # restart from the incumbent with a fresh simplex
        best_u = from_params(*_point_tuple(track.best[1]), space=space)
        _nelder_mead(track, best_u, space)
    except _BudgetExhausted:
        pass
    score, params, res = track.best
    return OptimizeResult(params, res, track.count, score, track.history)


def _point_tuple(p: ProtocolParams) -> tuple:
    it = p.intensities
    return (p.alpha2, it.mu0, it.mu1, p.p_x, it.p_mu0, it.p_mu1)


def _nelder_mead(fun, u0, space: SearchSpace) -> None:
    u0 = np.asarray(u0, dtype=float)
    simplex = np.vstack([u0] + [u0 + space.initial_step * e for e in np.eye(6)])
    minimize(
        fun,
        u0,
        method="Nelder-Mead",
        options={"initial_simplex": simplex, "maxfev": space.run_maxfev, "xatol": 1e-4, "fatol": 1e-14},
    )
