"""Tests for Potts mean-field clustering and its exhaustive oracle."""

import math
import statistics

import numpy as np
import pytest

from config.loader import AnnealConfig
from domain.errors import DegenerateMatrix, FrameMismatch, InfiniteWeight, InstanceTooLarge, KOutOfRange, NoConvergence, TooFewReports
from domain.models import Frame, Report
from usecases.benchmark import generate_benchmark, random_instance, witness_partition
from usecases.potts_clustering import (
    CONFLICT_CLAMP,
    InteractionMatrix,
    anneal,
    brute_force_partition,
    build_partition,
    cluster_conflict,
    critical_temperature,
    energy,
    extreme_eigenvalues,
    interactions,
    is_local_minimum,
    metaconflict,
    metaconflict_weight_sum,
    partition_count,
)

DEFAULTS = AnnealConfig()


@pytest.fixture
def conflicting_pair(make_report):
    return [make_report("r1", "a", 0.5), make_report("r2", "b", 0.5)]


# ═══════════════════════════════════════════════════════════════════
# Conflicts & objective
# ═══════════════════════════════════════════════════════════════════


class TestClusterConflict:
    def test_disjoint_pair(self, conflicting_pair):
        assert cluster_conflict(conflicting_pair) == pytest.approx(0.25, abs=1e-12)

    def test_singleton_and_empty(self, make_report):
        assert cluster_conflict([make_report("r1", "a", 0.9)]) == 0.0
        assert cluster_conflict([]) == 0.0

    def test_intersecting_foci(self, make_report):
        reports = [make_report("r1", "ab", 0.9), make_report("r2", "bc", 0.8), make_report("r3", "b", 0.5)]
        assert cluster_conflict(reports) == 0.0

    def test_total_conflict_is_clamped(self, make_mass):
        reports = [Report("r1", 0.0, make_mass({"a": 1.0})), Report("r2", 0.0, make_mass({"b": 1.0}))]
        assert cluster_conflict(reports) == CONFLICT_CLAMP
        assert build_partition(reports, [0, 0], 1).clamped


class TestMetaconflict:
    def test_example(self):
        assert metaconflict([0.3, 0.2]) == pytest.approx(0.44, abs=1e-12)
        assert metaconflict_weight_sum([0.3, 0.2]) == pytest.approx(0.579818, abs=1e-6)
        assert 1.0 - math.exp(-metaconflict_weight_sum([0.3, 0.2])) == pytest.approx(0.44, abs=1e-12)

    def test_zeros(self):
        assert metaconflict([0.0, 0.0, 0.0]) == 0.0
        assert metaconflict_weight_sum([0.0, 0.0]) == 0.0

    def test_one_is_absorbing(self):
        assert metaconflict([0.1, 1.0]) == 1.0
        with pytest.raises(InfiniteWeight):
            metaconflict_weight_sum([0.1, 1.0])

    def test_permutation_invariant(self):
        values = [0.05, 0.3, 0.12, 0.7]
        assert metaconflict_weight_sum(values) == metaconflict_weight_sum(list(reversed(values)))
        assert metaconflict(values) == metaconflict(list(reversed(values)))

    def test_additive_form_identity(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            conflicts = rng.uniform(0.0, 0.999, size=int(rng.integers(1, 12))).tolist()
            assert abs(metaconflict(conflicts) - (1.0 - math.exp(-metaconflict_weight_sum(conflicts)))) <= 1e-12


# ═══════════════════════════════════════════════════════════════════
# Couplings & critical temperature
# ═══════════════════════════════════════════════════════════════════


class TestInteractions:
    def test_disjoint_simple_supports(self, conflicting_pair):
        J = interactions(conflicting_pair)
        assert J.values[0, 1] == pytest.approx(-math.log(0.75), abs=1e-12)
        assert J.values[1, 0] == J.values[0, 1]
        assert J.values[0, 0] == 0.0

    def test_intersecting_foci(self, make_report):
        J = interactions([make_report("r1", "ab", 0.9), make_report("r2", "bc", 0.9)])
        assert J.values[0, 1] == 0.0

    def test_general_mass_functions(self, make_mass):
        reports = [Report("r1", 0.0, make_mass({"a": 0.5, "b": 0.5})), Report("r2", 0.0, make_mass({"b": 0.5, "cd": 0.5}))]
        assert interactions(reports).values[0, 1] == pytest.approx(-math.log1p(-0.75), abs=1e-12)

    def test_too_few_reports(self, make_report):
        with pytest.raises(TooFewReports):
            interactions([make_report("r1", "a")])

    def test_frame_mismatch(self, make_report):
        other = Frame(("x", "y"))
        with pytest.raises(FrameMismatch):
            interactions([make_report("r1", "a"), make_report("r2", "x", frame=other)])

    def test_matrix_invariants(self):
        with pytest.raises(ValueError):
            InteractionMatrix(np.array([[0.0, 1.0], [0.5, 0.0]]))
        with pytest.raises(ValueError):
            InteractionMatrix(np.array([[1.0, 0.0], [0.0, 0.0]]))


class TestCriticalTemperature:
    def test_no_couplings(self):
        params = AnnealConfig(gamma=0.5, alpha=0.0).for_clusters(2)
        assert critical_temperature(InteractionMatrix(np.zeros((3, 3))), params) == pytest.approx(0.25, abs=1e-9)

    def test_extreme_eigenvalues(self):
        # M = J - 0.5 I has eigenvalues -2 and 1.
        J = InteractionMatrix(np.array([[0.0, 1.5], [1.5, 0.0]]))
        params = AnnealConfig(gamma=0.5, alpha=0.0).for_clusters(4)
        assert critical_temperature(J, params) == pytest.approx(0.5, rel=1e-5)

    def test_power_iteration_matches_eigh(self):
        rng = np.random.default_rng(3)
        for size in (3, 8, 20):
            a = rng.random((size, size))
            matrix = a + a.T
            lam_min, lam_max = extreme_eigenvalues(matrix)
            exact = np.linalg.eigvalsh(matrix)
            assert lam_min == pytest.approx(exact[0], rel=1e-2, abs=1e-2)
            assert lam_max == pytest.approx(exact[-1], rel=1e-4)

    def test_degenerate(self):
        params = AnnealConfig(gamma=0.0, alpha=0.0).for_clusters(2)
        with pytest.raises(DegenerateMatrix):
            critical_temperature(InteractionMatrix(np.zeros((2, 2))), params)

    def test_scales_inversely_with_cluster_count(self, conflicting_pair):
        J = interactions(conflicting_pair)
        t2 = critical_temperature(J, DEFAULTS.for_clusters(2))
        t4 = critical_temperature(J, DEFAULTS.for_clusters(4))
        assert t2 == pytest.approx(2 * t4, rel=1e-9)


# ═══════════════════════════════════════════════════════════════════
# Annealing
# ═══════════════════════════════════════════════════════════════════


class TestAnneal:
    def test_conflicting_pair_is_separated(self, conflicting_pair):
        result = anneal(interactions(conflicting_pair), DEFAULTS.for_clusters(2))
        assert result.converged
        assert result.partition.assignment[0] != result.partition.assignment[1]
        assert result.partition.metaconflict == 0.0

    def test_single_cluster(self, make_report):
        reports = [make_report("r1", "a", 0.5), make_report("r2", "b", 0.5), make_report("r3", "ab", 0.5)]
        result = anneal(interactions(reports), DEFAULTS.for_clusters(1))
        assert result.partition.assignment == (0, 0, 0)
        assert result.partition.metaconflict == pytest.approx(cluster_conflict(reports), abs=1e-15)

    def test_deterministic(self):
        reports = random_instance(12, seed=5)
        J = interactions(reports)
        first = anneal(J, DEFAULTS.for_clusters(3, seed=11))
        second = anneal(J, DEFAULTS.for_clusters(3, seed=11))
        assert first.partition == second.partition
        assert (first.state.outer_steps, first.state.inner_steps) == (second.state.outer_steps, second.state.inner_steps)
        np.testing.assert_array_equal(first.state.V, second.state.V)

    def test_spins_stay_on_the_simplex(self):
        result = anneal(interactions(random_instance(10, seed=2)), DEFAULTS.for_clusters(3))
        np.testing.assert_allclose(result.state.V.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(result.state.V >= 0.0)
        assert 0.0 <= result.partition.metaconflict <= 1.0

    def test_non_convergence_carries_result(self):
        params = AnnealConfig(max_outer=1).for_clusters(3)
        result = anneal(interactions(random_instance(10, seed=2)), params)
        assert not result.converged
        with pytest.raises(NoConvergence) as excinfo:
            result.raise_for_convergence()
        assert excinfo.value.result is result

    def test_bare_matrix_cannot_be_annealed(self):
        with pytest.raises(ValueError):
            anneal(InteractionMatrix(np.zeros((2, 2))), DEFAULTS.for_clusters(2))

    def test_benchmark_k4_reaches_zero(self):
        zeros = 0
        for seed in range(30):
            result = anneal(interactions(generate_benchmark(4, seed=seed)), DEFAULTS.for_clusters(4, seed=seed))
            assert result.runtime_ms < 5000.0
            zeros += result.partition.metaconflict == 0.0
        assert zeros >= 24

    @pytest.mark.slow
    def test_benchmark_k6_per_evidence(self):
        per_evidence = []
        local_minima = 0
        for seed in range(10):
            J = interactions(generate_benchmark(6, seed=seed))
            params = DEFAULTS.for_clusters(6, seed=seed)
            result = anneal(J, params)
            per_evidence.append(result.partition.metaconflict / J.n)
            local_minima += is_local_minimum(J, result.partition.assignment, 6, params.gamma, params.alpha)
        assert statistics.median(per_evidence) <= 0.05
        print(f"energy audit: {local_minima}/10 final assignments are single-move local minima")


class TestEnergy:
    def test_separation_lowers_energy(self, conflicting_pair):
        J = interactions(conflicting_pair)
        together = energy(J, [0, 0], 2, gamma=0.5, alpha=0.0)
        apart = energy(J, [0, 1], 2, gamma=0.5, alpha=0.0)
        assert together == pytest.approx(J.values[0, 1] - 0.5)
        assert apart == pytest.approx(-0.5)
        assert is_local_minimum(J, [0, 1], 2, 0.5, 0.0)
        assert not is_local_minimum(J, [0, 0], 2, 0.5, 0.0)

    def test_balance_term(self, conflicting_pair):
        J = interactions(conflicting_pair)
        assert energy(J, [0, 0], 2, gamma=0.0, alpha=1.0) - energy(J, [0, 1], 2, gamma=0.0, alpha=1.0) == pytest.approx(
            J.values[0, 1] + 1.0
        )


# ═══════════════════════════════════════════════════════════════════
# Exhaustive oracle
# ═══════════════════════════════════════════════════════════════════


class TestBruteForce:
    def test_partition_count(self):
        assert partition_count(3, 2) == 4
        assert partition_count(4, 4) == 15
        assert partition_count(10, 4) == 43947

    def test_conflicting_pair(self, conflicting_pair):
        partition = brute_force_partition(conflicting_pair, 2)
        assert partition.metaconflict == 0.0
        assert partition.assignment == (0, 1)

    def test_single_block(self, conflicting_pair):
        assert brute_force_partition(conflicting_pair, 1).metaconflict == pytest.approx(cluster_conflict(conflicting_pair))

    def test_ties_keep_first_enumeration(self, make_report):
        reports = [make_report("r1", "a", 0.5), make_report("r2", "ab", 0.5), make_report("r3", "abc", 0.5)]
        assert brute_force_partition(reports, 3).assignment == (0, 0, 0)

    def test_too_large(self):
        with pytest.raises(InstanceTooLarge):
            brute_force_partition(random_instance(11), 4)
        with pytest.raises(InstanceTooLarge):
            brute_force_partition(random_instance(6), 3, max_partitions=10)

    @pytest.mark.parametrize("q", [0, -1])
    def test_needs_at_least_one_block(self, conflicting_pair, q):
        with pytest.raises(KOutOfRange):
            brute_force_partition(conflicting_pair, q)

    def test_lower_bound_on_annealing(self):
        for seed in range(10):
            reports = random_instance(7, seed=seed)
            oracle = brute_force_partition(reports, 3)
            annealed = anneal(interactions(reports), DEFAULTS.for_clusters(3, seed=seed))
            assert oracle.metaconflict <= annealed.partition.metaconflict + 1e-12

    def test_benchmark_witness_is_zero(self):
        for k in range(1, 7):
            assert witness_partition(generate_benchmark(k), k).metaconflict == 0.0
