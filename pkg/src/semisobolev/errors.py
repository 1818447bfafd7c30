"""Exception hierarchy shared by all solver modules."""


class SemisobolevError(Exception):
    """Base class for all errors raised by this package."""


class NoSolution(SemisobolevError):
    """The requested object does not exist (e.g. half-line soliton at |c| >= 1)."""


class ToleranceNotMet(SemisobolevError):
    """A conserved quantity or accuracy target drifted beyond its tolerance."""


class NotSkew(SemisobolevError):
    """A magnetic matrix violates skew-symmetry beyond tolerance."""


class ConvergenceFailure(SemisobolevError):
    """An outer search (bracketing, golden section) failed to converge."""


class DomainTooSmall(SemisobolevError):
    """Grid construction was asked for fewer than 8 nodes per axis."""


class ZeroFunction(SemisobolevError):
    """An operation received a wave function with vanishing L^p norm."""


class InvalidExponent(SemisobolevError):
    """Exponent p outside [2, 2*) for the given dimension."""


class NoConvergence(SemisobolevError):
    """An iterative minimizer exhausted its iteration budget."""


class AssumptionViolated(SemisobolevError):
    """The spectral positivity assumption fails on the sampled geometry."""


class NotPositive(SemisobolevError):
    """A model constant that must be positive is not."""


class InvalidScales(SemisobolevError):
    """Partition scales must satisfy alpha >= rho > 0 and h in (0, 1)."""


class NoneAccepted(SemisobolevError):
    """No sampled partition translation passed the acceptance thresholds."""


class EmptyComplement(SemisobolevError):
    """The dilated argmin set covers the whole grid; no exterior mass exists."""


class DegenerateFit(SemisobolevError):
    """A log-log fit was requested on gaps at solver-tolerance level."""


class InvalidProfile(SemisobolevError):
    """Waveguide width profile must be bounded below by a positive constant."""


class ConfigError(SemisobolevError):
    """Malformed run configuration; message carries the offending key."""
