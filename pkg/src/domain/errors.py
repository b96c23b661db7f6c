"""
Domain errors.

Every failure raised by the evidence algebra, the clustering and the
classifier derives from EvidenceError so that callers (the CLI in
particular) can map them onto exit codes without knowing each case.
"""

from typing import Any


class EvidenceError(Exception):
    """Base class for all domain failures."""

    pass


# =============================================================================
# Frames and mass functions
# =============================================================================


class FrameMismatch(EvidenceError):
    """Two values bound to different frames of discernment were mixed."""

    pass


class InvalidFrame(EvidenceError):
    """A frame with no labels or with repeated labels."""

    pass


class FrameTooLarge(EvidenceError):
    """A frame exceeds the 64-label cap of the bit encoding."""

    pass


class EmptyFocalElement(EvidenceError):
    """Mass was assigned to the empty set."""

    pass


class MassSumOutOfTolerance(EvidenceError):
    """Masses do not sum to one within 1e-9."""

    pass


class DuplicateFocalElement(EvidenceError):
    """The same subset was listed twice in an assignment."""

    pass


class InvalidMass(EvidenceError):
    """A mass value is not a finite number in (0, 1]."""

    pass


class TotalConflict(EvidenceError):
    """Dempster's rule is undefined: the conflict equals one."""

    pass


class EmptyInput(EvidenceError):
    """An operation requiring at least one item received none."""

    pass


class ReportFormatError(EvidenceError):
    """A serialized report or mass function could not be parsed."""

    pass


# =============================================================================
# Triage
# =============================================================================


class NegativeAge(EvidenceError):
    """The evaluation time lies before the report timestamp."""

    pass


# =============================================================================
# Clustering
# =============================================================================


class TooFewReports(EvidenceError):
    """Clustering needs at least two reports."""

    pass


class DegenerateMatrix(EvidenceError):
    """The critical-temperature matrix is identically zero."""

    pass


class InstanceTooLarge(EvidenceError):
    """The brute-force oracle would enumerate too many partitions."""

    pass


class KOutOfRange(EvidenceError):
    """Benchmark size outside the supported range."""

    pass


class InfiniteWeight(EvidenceError):
    """A conflict of one has an infinite weight of conflict."""

    pass


class NoConvergence(EvidenceError):
    """
    The annealing hit its outer iteration cap before the spins saturated.

    The partial result is kept on the exception so callers can still use it.
    """

    def __init__(self, message: str, result: Any = None):
        super().__init__(message)
        self.result = result


# =============================================================================
# Classification and pipeline
# =============================================================================


class AllImplausible(EvidenceError):
    """Every cluster has zero plausibility for the report."""

    pass


class DegeneratePartition(EvidenceError):
    """A partition without any non-empty cluster."""

    pass


class EmptyTable(EvidenceError):
    """A prototype table without any classifiable cluster."""

    pass


class DuplicateReport(EvidenceError):
    """A report id is already present in the store."""

    pass


class UnknownReport(EvidenceError):
    """A partition refers to a report id missing from the store."""

    pass
