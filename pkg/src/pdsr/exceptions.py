"""Exception types raised across the package."""


class PDSRError(Exception):
    """Base class for package-specific failures."""


class DecodeError(PDSRError, ValueError):
    """Raised when signature message bytes cannot be decoded."""


class EmptyCandidatesError(PDSRError):
    """Raised when a target user has no unrated services to recommend."""


class SearchSpaceTooLarge(PDSRError):
    """Raised when exhaustive search would enumerate more subsets than allowed."""


class DatasetError(PDSRError, ValueError):
    """Raised when a dataset file is missing, empty or malformed."""


class ConfigError(PDSRError, ValueError):
    """Raised for invalid or incomplete run configuration."""


class UnknownUserError(PDSRError, KeyError):
    """Raised when a requested user is not present on any platform."""
