"""Exception types shared across the simulator."""


class SatQkdError(Exception):
    """Base class for all simulator errors."""


class DomainError(SatQkdError, ValueError):
    """An input parameter is outside its physically meaningful range."""


class AliasingError(SatQkdError):
    """Grid sampling violates the Nyquist condition of the propagation kernel."""


class ResolutionError(SatQkdError):
    """A physical feature (aperture, jitter) is under-resolved on the grid."""


class TailTruncationError(SatQkdError):
    """The pointing-jitter distribution is not contained in the capture map."""


class NoInteriorMaximumError(SatQkdError):
    """The scanned objective is monotone over the search bounds."""


class AllZeroError(SatQkdError):
    """The objective is identically zero over the whole search bracket."""


class ZeroAcceptanceError(SatQkdError):
    """No post-selected coincidences: the state weights sum to zero."""


class EmptySpanError(SatQkdError):
    """A time span is empty or too short to evaluate."""


class ParseError(SatQkdError):
    """A configuration file could not be parsed."""


class ValidationError(SatQkdError):
    """One or more configuration invariants are violated.

    Collects every violation, not just the first, so a bad config is
    reported in one shot.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(
            "invalid configuration:\n" + "\n".join(f"  - {v}" for v in self.violations)
        )
