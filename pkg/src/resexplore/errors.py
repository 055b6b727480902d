"""Exception hierarchy shared by all modules."""


class ResExploreError(Exception):
    """Base class for every error raised by the package."""


class DomainError(ResExploreError, ValueError):
    """Argument outside the mathematical domain of a model function."""


class AdmissibilityError(DomainError):
    """Parameters violate U(a) >= k / lambda, so exploring at zero reserves is never worthwhile."""


class GridError(ResExploreError, ValueError):
    """Malformed grid, or a query outside the solved range."""


class FrontierNotBracketed(ResExploreError):
    """The frontier test never changes sign on the reserve grid."""


class NonMonotoneFrontier(ResExploreError):
    """The computed frontier increases in unexplored area beyond tolerance."""


class NoRoot(ResExploreError):
    """A scalar root could not be bracketed."""


class RegionError(ResExploreError):
    """A state was passed to an operation defined for the other region."""


class TimeOutOfRange(ResExploreError, ValueError):
    """Sampling time outside [0, horizon]."""


class InsufficientData(ResExploreError):
    """Too few usable samples for a statistical check."""


class ParseError(ResExploreError, ValueError):
    """Invalid configuration document."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if field is not None:
            where.append(f"field {field}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ConvergenceWarning(UserWarning):
    """An iterative oracle stopped before reaching its tolerance."""
