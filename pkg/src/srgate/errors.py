"""Exception types shared across the package.

Every error raised by library code derives from :class:`SrgateError` so
callers (and the CLI) can distinguish data problems from genuine bugs.
"""

from __future__ import annotations


class SrgateError(Exception):
    """Base class for all srgate errors."""


# --- prediction log ingestion ---------------------------------------------

class MalformedRecord(SrgateError):
    """A log line could not be parsed or violates a record invariant."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class ProbSumViolation(MalformedRecord):
    """Record probabilities do not sum to 1 within tolerance."""


class EmptyLog(SrgateError):
    """The prediction log contains no records."""


# --- images and clips -------------------------------------------------------

class UnsupportedFormat(SrgateError):
    """Input file is not a P2/P5 PGM, or its header values are unusable."""


class TruncatedFile(SrgateError):
    """Fewer pixel samples than the header declares."""


class DimensionOverflow(SrgateError):
    """Image dimensions are non-positive or unreasonably large."""


class ImageTooSmall(SrgateError):
    """Operation needs a larger image (e.g. 3x3 minimum for the Laplacian)."""


class DimensionMismatch(SrgateError):
    """Two images or clips that must agree in shape do not."""


class TooFewFrames(SrgateError):
    """Clip has too few frames for a temporal statistic."""


# --- gating ------------------------------------------------------------------

class MissingTableEntry(SrgateError):
    """No accuracy-gain entry for a (class, level) pair."""


class EmptyInput(SrgateError):
    """An aggregate operation received no data."""


# --- calibration -------------------------------------------------------------

class MissingProbs(SrgateError):
    """Record lacks the probability vector a metric requires."""


class DegenerateLabels(SrgateError):
    """Ranking metric needs both positive and negative labels."""


class MetricUndefinedOnResample(SrgateError):
    """Bootstrap could not find enough resamples on which the metric is defined."""


# --- artifact guard ----------------------------------------------------------

class GuardOnNonSR(SrgateError):
    """Guard applied to a decision that did not use super-resolution."""


# --- resource accounting -----------------------------------------------------

class ZeroNormalizer(SrgateError):
    """Efficiency normalization reference has zero efficiency."""


# --- simulation harness ------------------------------------------------------

class TooFewSubjects(SrgateError):
    """Leave-one-subject-out needs at least two subjects."""


class InvalidModelParams(SrgateError):
    """Confidence model parameters are outside their valid ranges."""


class SchemaMismatch(SrgateError):
    """Report file carries an unknown schema version."""


class IoFailure(SrgateError):
    """Report read/write failed at the filesystem level."""
