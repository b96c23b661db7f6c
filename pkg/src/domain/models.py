"""
Domain models - Pure evidence entities.

These are immutable value objects representing the core concepts of
evidential intelligence management: frames of discernment, subsets, mass
functions, reports and the results produced by clustering and
classification. They contain NO knowledge of file formats, numpy arrays or
storage. Transformation logic from external formats belongs in the use case
and adapter layers.
"""

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterator, Optional

from domain.errors import (
    EmptyFocalElement,
    FrameMismatch,
    FrameTooLarge,
    InvalidFrame,
    InvalidMass,
    MassSumOutOfTolerance,
)

MAX_FRAME_SIZE = 64
MASS_TOLERANCE = 1e-9


# =============================================================================
# Frame & Subset
# =============================================================================


@dataclass(frozen=True)
class Frame:
    """
    A frame of discernment.

    Label order is fixed at construction: label ``i`` is bit ``i`` of every
    Subset bound to this frame.
    """

    labels: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        labels = tuple(str(label) for label in self.labels)
        if not labels:
            raise InvalidFrame("A frame needs at least one label")
        if len(set(labels)) != len(labels):
            raise InvalidFrame(f"Frame labels must be unique: {labels}")
        if len(labels) > MAX_FRAME_SIZE:
            raise FrameTooLarge(f"Frame has {len(labels)} labels, the cap is {MAX_FRAME_SIZE}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", {label: i for i, label in enumerate(labels)})

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def full_bits(self) -> int:
        return (1 << len(self.labels)) - 1

    def index(self, label: str) -> int:
        """Return the bit position of a label."""
        try:
            return self._index[str(label)]
        except KeyError:
            raise FrameMismatch(f"Label {label!r} is not part of frame {self.labels}") from None

    def subset(self, *labels: str) -> "Subset":
        """Build the subset holding the given labels."""
        bits = 0
        for label in labels:
            bits |= 1 << self.index(label)
        return Subset(self, bits)

    def full(self) -> "Subset":
        """The frame itself, Θ."""
        return Subset(self, self.full_bits)

    def empty(self) -> "Subset":
        return Subset(self, 0)

    def same_as(self, other: "Frame") -> bool:
        return self is other or self.labels == other.labels


@dataclass(frozen=True)
class Subset:
    """A subset of a frame encoded as a fixed-width bit pattern."""

    frame: Frame
    bits: int

    def __post_init__(self) -> None:
        if self.bits < 0 or self.bits > self.frame.full_bits:
            raise FrameMismatch(f"Bit pattern {self.bits:#x} does not fit frame of size {self.frame.size}")

    @property
    def is_empty(self) -> bool:
        return self.bits == 0

    @property
    def is_full(self) -> bool:
        return self.bits == self.frame.full_bits

    @property
    def cardinality(self) -> int:
        return self.bits.bit_count()

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for i, label in enumerate(self.frame.labels) if self.bits >> i & 1)

    def _check(self, other: "Subset") -> None:
        if not self.frame.same_as(other.frame):
            raise FrameMismatch("Subsets belong to different frames")

    def intersection(self, other: "Subset") -> "Subset":
        self._check(other)
        return Subset(self.frame, self.bits & other.bits)

    def union(self, other: "Subset") -> "Subset":
        self._check(other)
        return Subset(self.frame, self.bits | other.bits)

    def intersects(self, other: "Subset") -> bool:
        self._check(other)
        return (self.bits & other.bits) != 0

    def is_subset_of(self, other: "Subset") -> bool:
        self._check(other)
        return (self.bits & ~other.bits) == 0

    __and__ = intersection
    __or__ = union

    def __repr__(self) -> str:
        return "{" + ",".join(self.labels) + "}"


# =============================================================================
# Mass functions
# =============================================================================


@dataclass(frozen=True)
class MassFunction:
    """
    A basic probability assignment over a frame.

    ``entries`` holds (bit pattern, mass) pairs in canonical order, i.e.
    ascending bit pattern. Use ``evidence.make_mass_function`` to build one
    from subsets; the constructor only checks the invariants.
    """

    frame: Frame
    entries: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        entries = tuple(sorted((int(bits), float(mass)) for bits, mass in self.entries))
        object.__setattr__(self, "entries", entries)
        total = 0.0
        previous = -1
        for bits, mass in entries:
            if bits == 0:
                raise EmptyFocalElement("Mass on the empty set is not allowed")
            if bits == previous:
                raise InvalidMass(f"Focal element {bits:#x} listed twice")
            if bits > self.frame.full_bits:
                raise FrameMismatch(f"Focal element {bits:#x} does not fit frame of size {self.frame.size}")
            if not math.isfinite(mass) or mass <= 0.0 or mass > 1.0 + MASS_TOLERANCE:
                raise InvalidMass(f"Mass {mass!r} is not in (0, 1]")
            total += mass
            previous = bits
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise MassSumOutOfTolerance(f"Masses sum to {total!r}, expected 1")

    def items(self) -> Iterator[tuple[Subset, float]]:
        """Iterate focal elements in canonical order."""
        for bits, mass in self.entries:
            yield Subset(self.frame, bits), mass

    @property
    def focal(self) -> dict[Subset, float]:
        return dict(self.items())

    @property
    def focal_count(self) -> int:
        return len(self.entries)

    def mass(self, subset: Subset) -> float:
        """Mass of a subset, zero when it is not focal."""
        if not self.frame.same_as(subset.frame):
            raise FrameMismatch("Subset belongs to another frame")
        for bits, mass in self.entries:
            if bits == subset.bits:
                return mass
        return 0.0

    @property
    def is_vacuous(self) -> bool:
        return len(self.entries) == 1 and self.entries[0][0] == self.frame.full_bits

    def as_simple_support(self) -> Optional["SimpleSupport"]:
        """Return the simple support form, or None if this is not one."""
        if len(self.entries) != 2 or self.entries[1][0] != self.frame.full_bits:
            return None
        bits, mass = self.entries[0]
        return SimpleSupport(Subset(self.frame, bits), mass)


@dataclass(frozen=True)
class SimpleSupport:
    """A simple support function: m(focus) = s, m(Θ) = 1 - s."""

    focus: Subset
    support: float

    def __post_init__(self) -> None:
        if self.focus.is_empty or self.focus.is_full:
            raise InvalidMass("A simple support focus must be nonempty and differ from the frame")
        if not 0.0 < self.support < 1.0:
            raise InvalidMass(f"Support {self.support!r} is not in (0, 1)")

    @property
    def frame(self) -> Frame:
        return self.focus.frame

    def to_mass(self) -> MassFunction:
        return MassFunction(
            self.frame,
            ((self.focus.bits, self.support), (self.frame.full_bits, 1.0 - self.support)),
        )


# =============================================================================
# Reports
# =============================================================================


@dataclass(frozen=True)
class Report:
    """
    An identified, timestamped intelligence report.

    ``meta`` carries free key/value annotations such as the ground-truth
    event of synthetic corpora.
    """

    id: str
    timestamp: float
    mass: MassFunction
    source_tag: str = ""
    meta: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not self.id:
            raise InvalidMass("A report needs a non-empty id")
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise InvalidMass(f"Report {self.id}: timestamp must be non-negative")

    @property
    def frame(self) -> Frame:
        return self.mass.frame

    def meta_value(self, key: str) -> Optional[str]:
        for k, v in self.meta:
            if k == key:
                return v
        return None


# =============================================================================
# Clustering results
# =============================================================================


@dataclass(frozen=True)
class Partition:
    """
    Assignment of reports to ``cluster_count`` disjoint subsets.

    ``clamped`` is set when some subset was totally conflicting and its
    conflict was clamped just below one.
    """

    report_ids: tuple[str, ...]
    assignment: tuple[int, ...]
    cluster_count: int
    cluster_conflicts: tuple[float, ...]
    metaconflict: float
    clamped: bool = False

    def __post_init__(self) -> None:
        if len(self.report_ids) != len(self.assignment):
            raise ValueError("One cluster index per report is required")
        if len(self.cluster_conflicts) != self.cluster_count:
            raise ValueError("One conflict per cluster is required")
        if any(not 0 <= a < self.cluster_count for a in self.assignment):
            raise ValueError("Cluster index out of range")

    def members(self, cluster: int) -> tuple[str, ...]:
        return tuple(rid for rid, a in zip(self.report_ids, self.assignment) if a == cluster)

    def cluster_of(self, report_id: str) -> int:
        return self.assignment[self.report_ids.index(report_id)]

    @property
    def sizes(self) -> tuple[int, ...]:
        counts = [0] * self.cluster_count
        for a in self.assignment:
            counts[a] += 1
        return tuple(counts)

    @property
    def max_conflict(self) -> float:
        return max(self.cluster_conflicts, default=0.0)


# =============================================================================
# Classification
# =============================================================================


@dataclass(frozen=True)
class MembershipEvidence:
    """Per-cluster metalevel evidence m(e ∉ χ_j)."""

    against: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(not 0.0 <= a <= 1.0 for a in self.against):
            raise ValueError(f"Membership evidence outside [0, 1]: {self.against}")

    @property
    def best_cluster(self) -> int:
        """Cluster with the least evidence against membership (lowest index on ties)."""
        return min(range(len(self.against)), key=lambda j: (self.against[j], j))


@dataclass(frozen=True)
class Credibility:
    """Per-cluster credibility α_j, with the evidence it was derived from."""

    alpha: tuple[float, ...]
    against: tuple[float, ...] = ()

    @property
    def best_cluster(self) -> int:
        """Most credible cluster; rounding ties in α fall back to the evidence, then the lowest index."""
        against = self.against or (0.0,) * len(self.alpha)
        return min(range(len(self.alpha)), key=lambda j: (-self.alpha[j], against[j], j))


@dataclass(frozen=True)
class PrototypeCluster:
    """One cluster of a prototype table; ``combined`` is None for an empty cluster."""

    index: int
    prototype_ids: tuple[str, ...]
    combined: Optional[MassFunction]
    baseline_conflict: float

    @property
    def is_empty(self) -> bool:
        return self.combined is None


@dataclass(frozen=True)
class PrototypeTable:
    """The whole working state of the fast classifier."""

    frame: Frame
    threshold: float
    proto_count: int
    clusters: tuple[PrototypeCluster, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for cluster in self.clusters:
            if len(cluster.prototype_ids) > self.proto_count:
                raise ValueError(f"Cluster {cluster.index} holds more than {self.proto_count} prototypes")
            overlap = seen.intersection(cluster.prototype_ids)
            if overlap:
                raise ValueError(f"Prototype ids shared across clusters: {sorted(overlap)}")
            seen.update(cluster.prototype_ids)

    @property
    def cluster_count(self) -> int:
        return len(self.clusters)

    @property
    def active_clusters(self) -> tuple[PrototypeCluster, ...]:
        return tuple(c for c in self.clusters if not c.is_empty)


class Verdict(Enum):
    """Outcome of routing one report."""

    ASSIGNED = "assigned"
    REJECTED = "rejected"
    DEFERRED = "deferred"


@dataclass(frozen=True)
class ClassificationResult:
    """
    Result of classifying one report against a prototype table.

    ``combinations_used`` counts the Dempster combinations performed: one per
    classifiable cluster, regardless of history size.
    """

    verdict: Verdict
    cluster: Optional[int]
    evidence: MembershipEvidence
    combinations_used: int


# =============================================================================
# Pipeline
# =============================================================================


class Adoption(IntEnum):
    """Which of the two epoch clusterings was adopted."""

    SAME_COUNT = 1  # q subsets
    ONE_FEWER = 2  # q - 1 subsets


@dataclass(frozen=True)
class FusionStub:
    """Per-subset fused evidence with its running conflict."""

    cluster: int
    report_ids: tuple[str, ...] = field(default_factory=tuple)
    mass: Optional[MassFunction] = None
    conflict: float = 0.0


@dataclass(frozen=True)
class RoutingDecision:
    """Where the pipeline sent one report."""

    report_id: str
    verdict: Verdict
    cluster: Optional[int] = None
    result: Optional[ClassificationResult] = None


@dataclass(frozen=True)
class EpochOutcome:
    """
    Summary of one back-end clustering epoch.

    ``adopted`` is None when a clustering did not converge; the previous
    table then stays in place and the conflict fields come from whatever
    partial results were available.
    """

    epoch: int
    adopted: Optional[Adoption]
    q: int
    q_next: int
    max_conflicts: tuple[Optional[float], Optional[float]]
    metaconflict: Optional[float]
    reclassified: int
    converged: bool = True
    fusion_max_conflict: float = 0.0
