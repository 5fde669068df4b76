"""Value types shared by every stage of the key-rate computation.

Intensities are mean photon numbers of the phase-randomised Z-basis pulses.
The X-basis coherent amplitude is stored as ``alpha``; most formulas use its
intensity ``alpha2 = alpha**2``. Only the symmetric setting (both users share
``alpha`` and the intensity set) is modelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ConfigError

__all__ = [
    "Intensities",
    "ProtocolParams",
    "SecurityParams",
    "ObservedCounts",
    "DecoyBounds",
    "KeyRateResult",
    "Issue",
    "validate",
    "check",
    "PAIRS_S4",
]

# (n, m) photon pairs bounded individually when S_cut = 4
PAIRS_S4: Tuple[Tuple[int, int], ...] = ((0, 0), (1, 1), (2, 2), (0, 2), (2, 0), (0, 4), (4, 0), (1, 3), (3, 1))


@dataclass(frozen=True)
class Intensities:
    mu0: float
    mu1: float
    mu2: float
    p_mu0: float
    p_mu1: float
    p_mu2: float

    @property
    def mus(self) -> np.ndarray:
        return np.array([self.mu0, self.mu1, self.mu2])

    @property
    def probs(self) -> np.ndarray:
        return np.array([self.p_mu0, self.p_mu1, self.p_mu2])


@dataclass(frozen=True)
class ProtocolParams:
    n_rounds: float
    p_x: float
    alpha: float
    intensities: Intensities
    s_cut: int = 4

    @property
    def p_z(self) -> float:
        return 1.0 - self.p_x

    @property
    def alpha2(self) -> float:
        return self.alpha * self.alpha


@dataclass(frozen=True)
class SecurityParams:
    """Failure-probability settings.

    ``eps_cor`` is the correctness parameter, ``eps_pa`` the privacy
    amplification failure probability, ``eps_chernoff`` and ``eps_kato`` the
    failure probabilities of each single Chernoff or Kato application, and
    ``d`` the number of decoy intensities.
    """

    eps_cor: float
    eps_pa: float
    eps_chernoff: float
    eps_kato: float
    d: int = 3


@dataclass(frozen=True)
class Issue:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def _validate_intensities(it: Intensities) -> list:
    issues = []
    vals = (it.mu0, it.mu1, it.mu2, it.p_mu0, it.p_mu1, it.p_mu2)
    if not all(math.isfinite(v) for v in vals):
        return [Issue("non_finite", "intensities and their probabilities must be finite")]
    if not (it.mu0 > it.mu1 > it.mu2 >= 0.0):
        issues.append(Issue("intensity_order", f"need mu0 > mu1 > mu2 >= 0, got {it.mu0}, {it.mu1}, {it.mu2}"))
    probs = (it.p_mu0, it.p_mu1, it.p_mu2)
    if any(p <= 0.0 for p in probs):
        issues.append(Issue("probability_range", f"intensity probabilities must be positive, got {probs}"))
    if abs(math.fsum(probs) - 1.0) > 1e-12:
        issues.append(Issue("normalization", f"intensity probabilities sum to {math.fsum(probs)!r}, not 1"))
    return issues


def validate(params: ProtocolParams, sec: Optional[SecurityParams] = None) -> list:
    """Return every violated invariant as a list of :class:`Issue`.

    An empty list means the configuration is valid. Tail divergence
    (``alpha**2 >= mu0``) is reported with code ``"tail_divergence"``.
    """
    issues = []
    if not (params.n_rounds >= 0 and math.isfinite(params.n_rounds)):
        issues.append(Issue("n_rounds", f"n_rounds must be a finite nonnegative number, got {params.n_rounds!r}"))
    if not 0.0 < params.p_x < 1.0:
        issues.append(Issue("p_x", f"p_x must lie in (0, 1), got {params.p_x!r}"))
    if not (params.alpha > 0.0 and math.isfinite(params.alpha)):
        issues.append(Issue("alpha", f"alpha must be positive, got {params.alpha!r}"))
    if not (isinstance(params.s_cut, (int, np.integer)) and params.s_cut >= 2 and params.s_cut % 2 == 0):
        issues.append(Issue("s_cut", f"s_cut must be an even integer >= 2, got {params.s_cut!r}"))
    issues.extend(_validate_intensities(params.intensities))
    if math.isfinite(params.alpha) and params.alpha2 >= params.intensities.mu0:
        issues.append(
            Issue("tail_divergence", f"alpha^2 = {params.alpha2!r} must be below mu0 = {params.intensities.mu0!r}")
        )
    if sec is not None:
        for name in ("eps_cor", "eps_pa", "eps_chernoff", "eps_kato"):
            v = getattr(sec, name)
            if not 0.0 < v < 1.0:
                issues.append(Issue(name, f"{name} must lie in (0, 1), got {v!r}"))
        if sec.d != 3:
            issues.append(Issue("d", f"only three decoy intensities are supported, got d={sec.d}"))
    return issues


def check(params: ProtocolParams, sec: Optional[SecurityParams] = None) -> None:
    """Raise :class:`ConfigError` carrying all issues found by :func:`validate`."""
    issues = validate(params, sec)
    if issues:
        raise ConfigError(issues)


@dataclass(frozen=True)
class ObservedCounts:
    """Sifted data: key length ``m_x``, Z-basis matrix ``M^{mu nu}`` and QBER.

    Row index is Alice's intensity, column index Bob's, both ordered
    ``(mu0, mu1, mu2)``. ``rounded`` records that the counts were produced by
    flooring real-valued expectations.
    """

    m_x: float
    m_matrix: Tuple[Tuple[float, float, float], ...]
    e_x_obs: float
    rounded: bool = False

    def __post_init__(self):
        mat = tuple(tuple(float(v) for v in row) for row in self.m_matrix)
        if len(mat) != 3 or any(len(r) != 3 for r in mat):
            raise ValueError("m_matrix must be 3x3")
        object.__setattr__(self, "m_matrix", mat)
        if self.m_x < 0 or any(v < 0 for r in mat for v in r):
            raise ValueError("counts must be nonnegative")
        if not all(math.isfinite(v) for r in mat for v in r) or not math.isfinite(self.m_x):
            raise ValueError("counts must be finite")
        if not 0.0 <= self.e_x_obs <= 1.0:
            raise ValueError(f"e_x_obs must lie in [0, 1], got {self.e_x_obs!r}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.m_matrix, dtype=float)

    @property
    def m_z(self) -> float:
        return math.fsum(v for r in self.m_matrix for v in r)

    @property
    def m_s(self) -> float:
        return self.m_x + self.m_z


@dataclass(frozen=True)
class DecoyBounds:
    """Upper bounds ``M_nm^U`` keyed by ``(n, m)`` plus single-emitter vacuum lower bounds."""

    m_upper: Dict[Tuple[int, int], float]
    m0a_lower: float
    m0b_lower: float
    raw_upper: Dict[Tuple[int, int], float] = field(default_factory=dict)


@dataclass
class KeyRateResult:
    n_ph_upper: float
    e_ph_upper: float
    key_length: int
    rate: float
    n_rounds: float
    diagnostics: dict = field(default_factory=dict)
    reason: Optional[str] = None

    @classmethod
    def zero(cls, n_rounds: float, reason: str, **diagnostics) -> "KeyRateResult":
        return cls(math.nan, math.nan, 0, 0.0, n_rounds, dict(diagnostics), reason)
