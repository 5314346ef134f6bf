"""Exception hierarchy shared by all zenosense modules."""


class ZenoSenseError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(ZenoSenseError, ValueError):
    """An input violates a documented precondition or type invariant."""


class CoverageError(InvalidInputError):
    """A sampled noise path does not cover the requested time interval."""


class ZeroProbabilityError(ZenoSenseError):
    """A measurement branch has (numerically) zero probability.

    The caller decides whether to discard the trajectory or to record it
    as a zero-survival event.
    """

    def __init__(self, probability):
        super().__init__(f"measurement branch probability {probability:.3e} below floor")
        self.probability = probability


class NumericalConsistencyError(ZenoSenseError):
    """An internally computed quantity violates a mathematical bound."""


class ExpansionDomainError(ZenoSenseError):
    """The second-order survival expansion q = 1 - eta^2 tau^2 left its
    domain of validity; use a smaller tau support or exact_two_point mode."""


class AccuracyError(ZenoSenseError):
    """A quadrature or truncation could not meet the requested tolerance."""

    def __init__(self, message, estimate=None, bound=None):
        super().__init__(message)
        self.estimate = estimate
        self.bound = bound


class SaturationError(ZenoSenseError):
    """The Monte Carlo coherence estimate is non-positive, so the decay
    exponent is undefined (decoherence too strong for the trajectory count)."""

    def __init__(self, coherence, p_transition):
        super().__init__(
            f"coherence estimate W={coherence:.3e} is not positive "
            f"(p={p_transition:.6f}); chi is undefined at this noise level"
        )
        self.coherence = coherence
        self.p_transition = p_transition


class InsufficientDataError(ZenoSenseError):
    """Too few finite trajectories for the requested statistic."""


class DegenerateFilterSetError(ZenoSenseError):
    """All overlap-matrix eigenvalues fall below the absolute floor."""


class RankError(ZenoSenseError):
    """A transformed-filter mode beyond the retained rank was requested."""


class AlignmentError(InvalidInputError):
    """Coefficient list does not align with the filter set."""


class ConfigValidationError(ZenoSenseError):
    """Experiment configuration failed validation.

    Carries the full list of failures, not just the first one.
    """

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("config validation failed:\n" + "\n".join(f"  - {f}" for f in self.failures))
