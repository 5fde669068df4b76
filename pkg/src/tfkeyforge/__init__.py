"""Finite-key secret-key rates for twin-field QKD with decoy states."""

__version__ = "0.1.0"

from .channel import ChannelParams, expected_counts, plob  # noqa: E402
from .keylength import default_security, epsilon_budget  # noqa: E402
from .optimizer import SearchSpace, optimize  # noqa: E402
from .pipeline import evaluate, key_rate_from_counts  # noqa: E402
from .protocol import (  # noqa: E402
    Intensities,
    KeyRateResult,
    ObservedCounts,
    ProtocolParams,
    SecurityParams,
)

__all__ = [
    "__version__",
    "ChannelParams",
    "Intensities",
    "KeyRateResult",
    "ObservedCounts",
    "ProtocolParams",
    "SearchSpace",
    "SecurityParams",
    "default_security",
    "epsilon_budget",
    "evaluate",
    "expected_counts",
    "key_rate_from_counts",
    "optimize",
    "plob",
]
