"""
Tests for the evidence algebra: construction, conflict, Dempster's rule,
plausibility and weights of conflict.

The seeded suites at the end draw 10,000 pairs and triples of random mass
functions over frames of up to six labels.
"""

import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from domain.errors import (
    DuplicateFocalElement,
    EmptyFocalElement,
    EmptyInput,
    FrameMismatch,
    FrameTooLarge,
    InvalidFrame,
    MassSumOutOfTolerance,
    TotalConflict,
)
from domain.evidence import (
    combine_all,
    combine_dempster,
    make_mass_function,
    pairwise_conflict,
    plausibility,
    simple_support_mass,
    vacuous,
    weight_of_conflict,
)
from domain.models import Frame, MassFunction, SimpleSupport, Subset
from usecases.benchmark import random_mass_function

TOL = 1e-12


def as_dict(m: MassFunction) -> dict[int, float]:
    return dict(m.entries)


def assert_same_masses(m1: MassFunction, m2: MassFunction, tol: float) -> None:
    d1, d2 = as_dict(m1), as_dict(m2)
    assert d1.keys() == d2.keys()
    for bits in d1:
        assert abs(d1[bits] - d2[bits]) <= tol, f"{bits:#x}: {d1[bits]} vs {d2[bits]}"


def combine_or_none(m1: MassFunction, m2: MassFunction):
    try:
        return combine_dempster(m1, m2)
    except TotalConflict:
        return None


# ═══════════════════════════════════════════════════════════════════
# Hypothesis strategies
# ═══════════════════════════════════════════════════════════════════

_frames = [Frame(tuple("abcdef"[:size])) for size in range(1, 7)]


@st.composite
def mass_functions(draw, frame: Frame = None):
    """A valid mass function with up to five focal elements over a small frame."""
    frame = frame or draw(st.sampled_from(_frames))
    focal = draw(st.lists(st.integers(1, frame.full_bits), min_size=1, max_size=5, unique=True))
    weights = draw(st.lists(st.floats(0.01, 1.0), min_size=len(focal), max_size=len(focal)))
    total = math.fsum(weights)
    return MassFunction(frame, tuple((bits, w / total) for bits, w in zip(focal, weights)))


@st.composite
def same_frame_pairs(draw):
    frame = draw(st.sampled_from(_frames))
    return draw(mass_functions(frame)), draw(mass_functions(frame))


# ═══════════════════════════════════════════════════════════════════
# Frames & subsets
# ═══════════════════════════════════════════════════════════════════


class TestFrame:
    def test_labels_map_to_bits(self, frame4):
        assert frame4.subset("a").bits == 0b0001
        assert frame4.subset("b", "d").bits == 0b1010
        assert frame4.full().bits == 0b1111

    def test_empty_frame_rejected(self):
        with pytest.raises(InvalidFrame):
            Frame(())

    def test_duplicate_labels_rejected(self):
        with pytest.raises(InvalidFrame):
            Frame(("a", "a"))

    def test_frame_cap(self):
        Frame(tuple(str(i) for i in range(64)))
        with pytest.raises(FrameTooLarge):
            Frame(tuple(str(i) for i in range(65)))

    def test_unknown_label(self, frame4):
        with pytest.raises(FrameMismatch):
            frame4.subset("z")

    def test_subset_algebra(self, frame4):
        ab, bc = frame4.subset("a", "b"), frame4.subset("b", "c")
        assert (ab & bc).labels == ("b",)
        assert (ab | bc).labels == ("a", "b", "c")
        assert ab.intersects(bc)
        assert not frame4.subset("a").intersects(frame4.subset("d"))
        assert frame4.subset("a").is_subset_of(ab)
        assert ab.cardinality == 2
        assert frame4.empty().is_empty
        assert frame4.full().is_full

    def test_subsets_of_different_frames_do_not_mix(self, frame4):
        other = Frame(("x", "y"))
        with pytest.raises(FrameMismatch):
            frame4.subset("a") & other.subset("x")


# ═══════════════════════════════════════════════════════════════════
# Construction
# ═══════════════════════════════════════════════════════════════════


class TestMakeMassFunction:
    def test_valid(self, frame4):
        m = make_mass_function(frame4, [(frame4.subset("a"), 0.6), (frame4.full(), 0.4)])
        assert m.focal_count == 2
        assert m.mass(frame4.subset("a")) == pytest.approx(0.6)
        assert m.mass(frame4.subset("b")) == 0.0

    def test_sum_out_of_tolerance(self):
        frame = Frame(("a", "b"))
        with pytest.raises(MassSumOutOfTolerance):
            make_mass_function(frame, [(frame.subset("a"), 0.5)])

    def test_empty_focal_element(self):
        frame = Frame(("a", "b"))
        with pytest.raises(EmptyFocalElement):
            make_mass_function(frame, [(frame.empty(), 0.2), (frame.full(), 0.8)])

    def test_duplicate_focal_element(self, frame4):
        with pytest.raises(DuplicateFocalElement):
            make_mass_function(frame4, [(frame4.subset("a"), 0.5), (frame4.subset("a"), 0.5)])

    def test_foreign_subset(self, frame4):
        other = Frame(("x", "y"))
        with pytest.raises(FrameMismatch):
            make_mass_function(frame4, [(other.full(), 1.0)])

    def test_canonical_order(self, frame4):
        m = make_mass_function(frame4, [(frame4.full(), 0.2), (frame4.subset("c"), 0.3), (frame4.subset("a"), 0.5)])
        bits = [b for b, _ in m.entries]
        assert bits == sorted(bits)

    def test_simple_support_forms(self, frame4):
        m = simple_support_mass(frame4, frame4.subset("a"), 0.6)
        support = m.as_simple_support()
        assert support.focus == frame4.subset("a")
        assert support.support == pytest.approx(0.6)
        assert simple_support_mass(frame4, frame4.full(), 0.6).is_vacuous
        assert simple_support_mass(frame4, frame4.subset("a"), 1.0).as_simple_support() is None


# ═══════════════════════════════════════════════════════════════════
# Conflict & combination
# ═══════════════════════════════════════════════════════════════════


class TestPairwiseConflict:
    def test_disjoint_simple_supports(self, make_mass):
        m1 = make_mass({"a": 0.6, "abcd": 0.4})
        m2 = make_mass({"d": 0.5, "abcd": 0.5})
        assert pairwise_conflict(m1, m2) == pytest.approx(0.30, abs=TOL)

    def test_vacuous_never_conflicts(self, make_mass, frame4):
        m = make_mass({"a": 0.2, "bc": 0.5, "abcd": 0.3})
        assert pairwise_conflict(m, vacuous(frame4)) == 0.0

    def test_total_contradiction(self, make_mass):
        assert pairwise_conflict(make_mass({"a": 1.0}), make_mass({"b": 1.0})) == 1.0

    def test_frame_mismatch(self, make_mass):
        other = Frame(("x", "y"))
        with pytest.raises(FrameMismatch):
            pairwise_conflict(make_mass({"a": 1.0}), vacuous(other))


class TestCombineDempster:
    def test_worked_example(self, make_mass, frame4):
        combined, k = combine_dempster(make_mass({"a": 0.6, "abcd": 0.4}), make_mass({"b": 0.5, "abcd": 0.5}))
        assert k == pytest.approx(0.3, abs=TOL)
        assert combined.mass(frame4.subset("a")) == pytest.approx(3 / 7, abs=TOL)
        assert combined.mass(frame4.subset("b")) == pytest.approx(2 / 7, abs=TOL)
        assert combined.mass(frame4.full()) == pytest.approx(2 / 7, abs=TOL)
        assert combined.focal_count == 3

    def test_vacuous_is_exact_identity(self, make_mass, frame4):
        m = make_mass({"a": 0.1, "bc": 0.35, "abcd": 0.55})
        combined, k = combine_dempster(m, vacuous(frame4))
        assert k == 0.0
        assert combined.entries == m.entries

    def test_total_conflict(self, make_mass):
        with pytest.raises(TotalConflict):
            combine_dempster(make_mass({"a": 1.0}), make_mass({"b": 1.0}))


class TestCombineAll:
    def test_single_item(self, make_mass):
        m = make_mass({"a": 0.4, "abcd": 0.6})
        combined, c = combine_all([m])
        assert combined is m
        assert c == 0.0

    def test_common_focus_has_no_conflict(self, make_mass):
        items = [make_mass({"ab": 0.3, "abcd": 0.7}), make_mass({"a": 0.5, "abcd": 0.5}), make_mass({"abc": 0.9, "abcd": 0.1})]
        _, c = combine_all(items)
        assert c == 0.0

    def test_single_step_matches_pairwise(self, make_mass):
        _, c = combine_all([make_mass({"a": 0.6, "abcd": 0.4}), make_mass({"b": 0.5, "abcd": 0.5})])
        assert c == pytest.approx(0.3, abs=TOL)

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            combine_all([])


# ═══════════════════════════════════════════════════════════════════
# Plausibility & weights
# ═══════════════════════════════════════════════════════════════════


class TestPlausibility:
    def test_vacuous(self, frame4):
        assert plausibility(vacuous(frame4), frame4.subset("c")) == 1.0

    def test_disjoint_categorical(self, make_mass, frame4):
        assert plausibility(make_mass({"a": 1.0}), frame4.subset("b")) == 0.0

    def test_only_frame_intersects(self, make_mass, frame4):
        assert plausibility(make_mass({"a": 0.6, "abcd": 0.4}), frame4.subset("b")) == pytest.approx(0.4)


class TestWeightOfConflict:
    def test_disjoint_half_supports(self, frame4):
        s1 = SimpleSupport(frame4.subset("a"), 0.5)
        s2 = SimpleSupport(frame4.subset("b"), 0.5)
        assert weight_of_conflict(s1, s2) == pytest.approx(-math.log(0.75), abs=TOL)
        assert weight_of_conflict(s1, s2) == pytest.approx(0.287682, abs=1e-6)
        assert math.exp(-weight_of_conflict(s1, s2)) == pytest.approx(0.75, abs=TOL)

    def test_overlapping_foci(self, frame4):
        s1 = SimpleSupport(frame4.subset("a", "b"), 0.9)
        s2 = SimpleSupport(frame4.subset("b", "c"), 0.9)
        assert weight_of_conflict(s1, s2) == 0.0

    def test_grows_without_bound_near_one(self, frame4):
        s1 = SimpleSupport(frame4.subset("a"), 1 - 1e-9)
        weights = [weight_of_conflict(s1, SimpleSupport(frame4.subset("b"), 1 - 10.0**-e)) for e in range(1, 9)]
        assert all(w2 > w1 for w1, w2 in zip(weights, weights[1:]))
        assert weights[-1] > 15.0


# ═══════════════════════════════════════════════════════════════════
# Properties
# ═══════════════════════════════════════════════════════════════════


class TestDempsterProperties:
    @given(same_frame_pairs())
    @settings(max_examples=300)
    def test_commutative(self, pair):
        m1, m2 = pair
        r12, r21 = combine_or_none(m1, m2), combine_or_none(m2, m1)
        assert (r12 is None) == (r21 is None)
        if r12 is not None:
            assert abs(r12[1] - r21[1]) <= TOL
            assert_same_masses(r12[0], r21[0], TOL)

    @given(mass_functions())
    def test_vacuous_identity(self, m):
        combined, k = combine_dempster(m, vacuous(m.frame))
        assert k == 0.0
        assert combined.entries == m.entries

    @given(same_frame_pairs())
    def test_conflict_matches_pairwise_conflict(self, pair):
        m1, m2 = pair
        result = combine_or_none(m1, m2)
        if result is not None:
            assert abs(result[1] - pairwise_conflict(m1, m2)) <= 1e-12

    @given(mass_functions(), st.data())
    def test_plausibility_bounds(self, m, data):
        bits = data.draw(st.integers(1, m.frame.full_bits))
        value = plausibility(m, Subset(m.frame, bits))
        assert 0.0 <= value <= 1.0
        assert plausibility(m, m.frame.full()) == pytest.approx(1.0, abs=1e-9)


class TestSeededAlgebraSuite:
    """10,000 random pairs and triples over frames of one to six labels."""

    DRAWS = 10_000

    def _draws(self, seed: int, arity: int):
        rng = np.random.default_rng(seed)
        for _ in range(self.DRAWS):
            frame = _frames[int(rng.integers(len(_frames)))]
            yield [random_mass_function(frame, rng) for _ in range(arity)]

    def test_commutativity_and_conservation(self):
        for m1, m2 in self._draws(1, 2):
            r12, r21 = combine_or_none(m1, m2), combine_or_none(m2, m1)
            assert (r12 is None) == (r21 is None)
            if r12 is None:
                continue
            assert_same_masses(r12[0], r21[0], 1e-12)
            assert abs(r12[1] - r21[1]) <= 1e-12
            assert abs(math.fsum(mass for _, mass in r12[0].entries) - 1.0) <= 1e-9

    def test_associativity_and_conflict_permutation_invariance(self):
        for triple in self._draws(2, 3):
            m1, m2, m3 = triple
            left = combine_or_none(m1, m2)
            left = combine_or_none(left[0], m3) if left is not None else None
            right = combine_or_none(m2, m3)
            right = combine_or_none(m1, right[0]) if right is not None else None
            assert (left is None) == (right is None)
            if left is None:
                continue
            assert_same_masses(left[0], right[0], 1e-9)

            conflicts = [combine_all(list(order))[1] for order in permutations(triple)]
            assert max(conflicts) - min(conflicts) <= 1e-9

    def test_vacuous_identity_is_exact(self):
        for (m,) in self._draws(3, 1):
            combined, k = combine_dempster(vacuous(m.frame), m)
            assert k == 0.0
            assert combined.entries == m.entries
