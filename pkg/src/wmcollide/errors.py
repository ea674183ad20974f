"""Exception types shared across the package."""


class WmCollideError(Exception):
    """Base class for all package errors."""


class CorpusEmptyError(WmCollideError):
    """Corpus file contains no tokens after tokenization."""


class CorpusTooSmallError(WmCollideError):
    """Corpus does not provide enough material (e.g. prompts) for a job."""


class BadConfigError(WmCollideError):
    """A configuration value violates a precondition."""


class NumericalError(WmCollideError):
    """Non-finite values where finite ones are required."""


class TooShortError(WmCollideError):
    """Text sample has too few tokens for the requested operation."""


class CalibrationError(WmCollideError):
    """Not enough null scores to calibrate a threshold."""
