"""
Evidence algebra - Dempster-Shafer operations over mass functions.

Pure functions over immutable values: set algebra is done on bit patterns,
Dempster's rule is always normalized (closed world) and every combination
reports the conflict it removed. Logarithms are natural everywhere.
"""

import math
from collections.abc import Iterable, Sequence

from domain.errors import (
    DuplicateFocalElement,
    EmptyFocalElement,
    EmptyInput,
    FrameMismatch,
    InvalidMass,
    MassSumOutOfTolerance,
    TotalConflict,
)
from domain.models import MASS_TOLERANCE, Frame, MassFunction, SimpleSupport, Subset


def _same_frame(m1: MassFunction, m2: MassFunction) -> None:
    if not m1.frame.same_as(m2.frame):
        raise FrameMismatch(f"Frames differ: {m1.frame.labels} vs {m2.frame.labels}")


# =============================================================================
# Construction
# =============================================================================


def make_mass_function(frame: Frame, assignments: Iterable[tuple[Subset, float]]) -> MassFunction:
    """
    Build a validated, normalized mass function.

    Args:
        frame: The frame of discernment.
        assignments: (subset, mass) pairs; every subset must belong to ``frame``.

    Returns:
        MassFunction in canonical order.

    Raises:
        FrameMismatch: A subset belongs to another frame.
        EmptyFocalElement: Mass assigned to the empty set.
        DuplicateFocalElement: A subset listed twice.
        InvalidMass: A mass that is not a positive finite number.
        MassSumOutOfTolerance: |Σ - 1| > 1e-9.
    """
    entries: dict[int, float] = {}
    for subset, mass in assignments:
        if not subset.frame.same_as(frame):
            raise FrameMismatch(f"Subset {subset!r} is not bound to frame {frame.labels}")
        if subset.is_empty:
            raise EmptyFocalElement("Mass on the empty set is not allowed")
        if subset.bits in entries:
            raise DuplicateFocalElement(f"Focal element {subset!r} listed twice")
        mass = float(mass)
        if not math.isfinite(mass) or mass <= 0.0:
            raise InvalidMass(f"Mass {mass!r} for {subset!r} must be strictly positive")
        entries[subset.bits] = mass

    total = math.fsum(entries.values())
    if abs(total - 1.0) > MASS_TOLERANCE:
        raise MassSumOutOfTolerance(f"Masses sum to {total!r}, expected 1")
    return MassFunction(frame, tuple((bits, mass / total) for bits, mass in entries.items()))


def vacuous(frame: Frame) -> MassFunction:
    """The vacuous mass function m(Θ) = 1."""
    return MassFunction(frame, ((frame.full_bits, 1.0),))


def simple_support_mass(frame: Frame, focus: Subset, support: float) -> MassFunction:
    """
    m(focus) = s, m(Θ) = 1 - s.

    A focus equal to Θ collapses to the vacuous function; a support of one
    gives a categorical function.
    """
    if focus.is_full:
        return vacuous(frame)
    if support >= 1.0:
        return make_mass_function(frame, [(focus, 1.0)])
    return SimpleSupport(focus, support).to_mass()


# =============================================================================
# Conflict & combination
# =============================================================================


def pairwise_conflict(m1: MassFunction, m2: MassFunction) -> float:
    """Σ m1(A)·m2(B) over focal pairs with A ∩ B = ∅."""
    _same_frame(m1, m2)
    conflict = 0.0
    for a, ma in m1.entries:
        for b, mb in m2.entries:
            if a & b == 0:
                conflict += ma * mb
    return min(conflict, 1.0)


def combine_dempster(m1: MassFunction, m2: MassFunction) -> tuple[MassFunction, float]:
    """
    Combine two mass functions with Dempster's rule.

    Returns:
        (combined mass function, conflict k removed by normalization).

    Raises:
        TotalConflict: k = 1.
        FrameMismatch: different frames.
    """
    _same_frame(m1, m2)
    products: dict[int, float] = {}
    conflict = 0.0
    for a, ma in m1.entries:
        for b, mb in m2.entries:
            c = a & b
            if c == 0:
                conflict += ma * mb
            else:
                products[c] = products.get(c, 0.0) + ma * mb

    # Without conflict the products already sum to one; skipping the division
    # keeps the vacuous function an exact identity.
    norm = math.fsum(products.values()) if conflict > 0.0 else 1.0
    if norm <= 0.0 or not products:
        raise TotalConflict("The two mass functions are totally conflicting")
    entries = tuple((bits, mass / norm) for bits, mass in products.items() if mass / norm > 0.0)
    return MassFunction(m1.frame, entries), min(conflict, 1.0)


def combine_all(items: Sequence[MassFunction]) -> tuple[MassFunction, float]:
    """
    Left fold of Dempster's rule.

    The cumulative conflict c satisfies 1 - c = Π (1 - k_step).

    Raises:
        EmptyInput: no mass functions given.
        TotalConflict: some step is totally conflicting.
    """
    if not items:
        raise EmptyInput("combine_all needs at least one mass function")
    combined = items[0]
    survival = 1.0
    for m in items[1:]:
        combined, k = combine_dempster(combined, m)
        survival *= 1.0 - k
    return combined, 1.0 - survival


# =============================================================================
# Plausibility & weights
# =============================================================================


def plausibility(m: MassFunction, subset: Subset) -> float:
    """Σ m(B) over focal B intersecting ``subset``."""
    if not m.frame.same_as(subset.frame):
        raise FrameMismatch("Subset belongs to another frame")
    return min(math.fsum(mass for bits, mass in m.entries if bits & subset.bits), 1.0)


def weight_of_conflict(s1: SimpleSupport, s2: SimpleSupport) -> float:
    """-ln(1 - s1·s2) when the foci are disjoint, else 0."""
    if not s1.frame.same_as(s2.frame):
        raise FrameMismatch("Simple supports belong to different frames")
    if s1.focus.bits & s2.focus.bits:
        return 0.0
    return -math.log1p(-s1.support * s2.support)
