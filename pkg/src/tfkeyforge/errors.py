"""Exception hierarchy."""


class TFKeyForgeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TFKeyForgeError, ValueError):
    """Invalid protocol, security or channel configuration.

    ``issues`` lists every violated invariant, not just the first one.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues) or "invalid configuration")

    @classmethod
    def single(cls, code: str, message: str) -> "ConfigError":
        from .protocol import Issue

        return cls([Issue(code, message)])


class TailDivergenceError(TFKeyForgeError, ValueError):
    """The photon-number tail sum diverges (``alpha**2 >= mu0``)."""


class EstimationError(TFKeyForgeError, ArithmeticError):
    """A bound evaluated to a non-finite value."""


class DegenerateInputError(TFKeyForgeError, ValueError):
    """Inputs for which a ratio or rate is undefined (e.g. an empty sifted key)."""
