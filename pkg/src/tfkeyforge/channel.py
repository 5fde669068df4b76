"""Honest-relay channel model: detection probabilities, QBER, expected counts.

Loss is symmetric: each user's pulse reaches the relay through a beamsplitter
of transmittance ``sqrt(eta)``, where ``eta`` is the total Alice-Bob
transmittance (fibre plus detector efficiency). Phase misalignment shifts
Bob's pulse by ``delta_ph * pi``; polarisation misalignment rotates the two
inputs by ``+-arcsin(sqrt(delta_pol))``.

The closed forms are rearranged around ``expm1`` so that detection
probabilities of order 1e-8 keep full relative precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateInputError
from .numerics import bessel_i0
from .protocol import ObservedCounts, ProtocolParams

__all__ = [
    "ChannelParams",
    "CONVENTIONS",
    "qx",
    "ex",
    "q_munu",
    "expected_counts",
    "plob",
    "vacuum_yield",
]

CONVENTIONS = ("intensity", "amplitude")


@dataclass(frozen=True)
class ChannelParams:
    loss_db: float
    p_d: float = 1e-8
    delta_ph: float = 0.091
    delta_pol: float = 0.0
    f: float = 1.16

    def __post_init__(self):
        if not (self.loss_db >= 0.0 and math.isfinite(self.loss_db)):
            raise ValueError(f"loss_db must be finite and nonnegative, got {self.loss_db!r}")
        if not 0.0 <= self.p_d < 1.0:
            raise ValueError(f"p_d must lie in [0, 1), got {self.p_d!r}")
        if not 0.0 <= self.delta_ph <= 1.0:
            raise ValueError(f"delta_ph must lie in [0, 1], got {self.delta_ph!r}")
        if not 0.0 <= self.delta_pol <= 1.0:
            raise ValueError(f"delta_pol must lie in [0, 1], got {self.delta_pol!r}")
        if self.f < 1.0:
            raise ValueError(f"error-correction inefficiency f must be >= 1, got {self.f!r}")

    @property
    def eta(self) -> float:
        return 10.0 ** (-self.loss_db / 10.0)

    @property
    def theta(self) -> float:
        """Relative polarisation rotation ``theta_A - theta_B``."""
        return 2.0 * math.asin(math.sqrt(self.delta_pol))

    @property
    def visibility(self) -> float:
        """``cos(phi) cos(theta)`` with ``phi = delta_ph * pi``."""
        return math.cos(self.delta_ph * math.pi) * math.cos(self.theta)

    def with_loss(self, loss_db: float) -> "ChannelParams":
        return ChannelParams(loss_db, self.p_d, self.delta_ph, self.delta_pol, self.f)


def _x_terms(ch: ChannelParams, alpha: float):
    gamma = math.sqrt(ch.eta) * alpha * alpha
    om = ch.visibility
    lo = math.expm1(gamma * (1.0 - om))
    hi = math.expm1(gamma * (1.0 + om))
    return gamma, lo, hi


def qx(ch: ChannelParams, alpha: float) -> float:
    """Probability of a successful (single-click) X-basis round."""
    gamma, lo, hi = _x_terms(ch, alpha)
    return (1.0 - ch.p_d) * math.exp(-2.0 * gamma) * (lo + hi + 2.0 * ch.p_d)


def ex(ch: ChannelParams, alpha: float) -> float:
    """Bit-error probability of the sifted X-basis key."""
    _, lo, hi = _x_terms(ch, alpha)
    denom = lo + hi + 2.0 * ch.p_d
    if denom <= 0.0:
        raise DegenerateInputError("QBER undefined: no successful X-basis detections (Q_X = 0)")
    return (lo + ch.p_d) / denom


def q_munu(ch: ChannelParams, mu: float, nu: float, convention: str = "intensity") -> float:
    """Successful-detection probability for Z-basis intensities ``(mu, nu)``.

    ``convention="intensity"`` treats ``mu`` and ``nu`` as mean photon
    numbers, giving ``2(1-p_d)[e^{-s/2} I0(x) - (1-p_d) e^{-s}]`` with
    ``s = (mu + nu) sqrt(eta)`` and ``x = sqrt(mu nu eta) cos(theta)``.
    ``convention="amplitude"`` substitutes ``mu**2``, ``nu**2`` for the
    intensities, i.e. reads ``mu`` and ``nu`` as field amplitudes.
    """
    if convention == "intensity":
        i_mu, i_nu = mu, nu
    elif convention == "amplitude":
        i_mu, i_nu = mu * mu, nu * nu
    else:
        raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    seta = math.sqrt(ch.eta)
    s = (i_mu + i_nu) * seta
    x = math.sqrt(i_mu * i_nu) * seta * math.cos(ch.theta)
    i0m1 = bessel_i0(x) - 1.0 if abs(x) > 1e-3 else _i0m1_small(x)
    # e^{s/2} I0(x) - (1 - p_d) = expm1(s/2) + e^{s/2}(I0(x) - 1) + p_d
    inner = math.expm1(0.5 * s) + math.exp(0.5 * s) * i0m1 + ch.p_d
    return 2.0 * (1.0 - ch.p_d) * math.exp(-s) * inner


def _i0m1_small(x: float) -> float:
    y = 0.25 * x * x
    return y * (1.0 + y / 4.0 * (1.0 + y / 9.0))


def vacuum_yield(ch: ChannelParams) -> float:
    """Success probability when both users emit vacuum: ``2 p_d (1 - p_d)``."""
    return 2.0 * ch.p_d * (1.0 - ch.p_d)


def expected_counts(
    params: ProtocolParams, ch: ChannelParams, convention: str = "intensity", rounding: bool = True
) -> ObservedCounts:
    """Counts equal to their expectations for ``params.n_rounds`` rounds.

    ``M_X = N p_X^2 Q_X`` and ``M^{mu nu} = N p_Z^2 p_mu p_nu Q^{mu nu}``;
    with ``rounding`` the values are floored to integers and the result is
    flagged ``rounded``.
    """
    n = params.n_rounds
    it = params.intensities
    mus, probs = it.mus, it.probs
    m_x = n * params.p_x**2 * qx(ch, params.alpha)
    mat = [
        [n * params.p_z**2 * probs[i] * probs[j] * q_munu(ch, mus[i], mus[j], convention) for j in range(3)]
        for i in range(3)
    ]
    try:
        e_x = ex(ch, params.alpha)
    except DegenerateInputError:
        e_x = 0.5
    if rounding:
        m_x = math.floor(m_x)
        mat = [[math.floor(v) for v in row] for row in mat]
    return ObservedCounts(m_x, tuple(tuple(r) for r in mat), e_x, rounded=rounding)


def plob(eta: float) -> float:
    """Repeaterless secret-key capacity ``-log2(1 - eta)`` in bits per pulse."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta!r}")
    if eta == 1.0:
        return math.inf
    return -math.log1p(-eta) / math.log(2.0)
