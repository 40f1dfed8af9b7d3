"""Exception hierarchy shared across the package.

The CLI maps ConfigError to exit code 1 (bad configuration / validation)
and DataError to exit code 2 (bad or missing input data).
"""


class ReviewLensError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ReviewLensError):
    """Invalid configuration value, template, or CLI flag combination."""


class DataError(ReviewLensError):
    """Missing, malformed, or inconsistent input data."""


class EmbeddingLookupError(DataError):
    """A precomputed embedding table was asked for a text it does not contain."""

    def __init__(self, text: str):
        super().__init__(f"no precomputed embedding for text: {text!r}")
        self.text = text


class DegenerateEmbeddingError(DataError):
    """A provider returned a zero-norm or non-finite vector."""
