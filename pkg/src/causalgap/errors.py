"""Exception types shared across the package."""


class CausalGapError(Exception):
    """Base class for all package errors."""


class DomainError(CausalGapError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateIntervalError(CausalGapError, ValueError):
    """A truncation interval carries less probability mass than the floor."""


class ZeroDensityError(CausalGapError, ValueError):
    """Conditioning point has zero marginal density."""


class QuadratureError(CausalGapError, RuntimeError):
    """Numerical integration failed to reach the requested tolerance."""


class ContractError(CausalGapError, ValueError):
    """Model violates a structural precondition (symmetry, evenness, order)."""


class ParseError(CausalGapError, ValueError):
    """Malformed pair data or metadata file."""


class UnsupportedPairError(CausalGapError, ValueError):
    """Pair metadata describes a multivariate pair; only bivariate supported."""


class FetchError(CausalGapError, RuntimeError):
    """Download or post-download validation of a pair file failed."""
