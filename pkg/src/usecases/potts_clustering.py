"""
Potts mean-field clustering of conflicting evidence.

Reports are partitioned into K subsets so that the metaconflict
1 - Π(1 - c_i) of the per-subset Dempster conflicts is minimal. Pairwise
weights of conflict become antiferromagnetic Potts couplings and the
mean-field equations are relaxed under a geometric cooling schedule
starting from the critical temperature.

Random draws come from numpy's PCG64 generator seeded by
``AnnealParams.seed``. They are consumed in a fixed order: the n×K initial
noise matrix row-major, then K values per site update, sites in ascending
order within each sweep. Runs are therefore reproducible across platforms.
"""

import logging
import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from config.loader import AnnealParams
from domain.errors import (
    DegenerateMatrix,
    EmptyInput,
    FrameMismatch,
    InfiniteWeight,
    InstanceTooLarge,
    KOutOfRange,
    NoConvergence,
    TooFewReports,
    TotalConflict,
)
from domain.evidence import combine_all, pairwise_conflict, weight_of_conflict
from domain.models import Partition, Report

logger = logging.getLogger(__name__)

# Conflict of one would give an infinite coupling / weight.
CONFLICT_CLAMP = 1.0 - 1e-12
WEIGHT_CLAMP = -math.log(1e-12)

EIGEN_TOL = 1e-6
EIGEN_MAX_ITER = 10_000

ORACLE_MAX_REPORTS = 10
ORACLE_MAX_BLOCKS = 4


# =============================================================================
# Types
# =============================================================================


@dataclass(frozen=True)
class InteractionMatrix:
    """
    Symmetric, non-negative Potts couplings with zero diagonal.

    ``reports`` may be empty for a bare matrix (eigenvalue studies); annealing
    needs one report per row.
    """

    values: np.ndarray
    reports: tuple[Report, ...] = ()

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError(f"Expected a square matrix, got {values.shape}")
        if self.reports and len(self.reports) != values.shape[0]:
            raise ValueError(f"{len(self.reports)} reports for a {values.shape[0]}x{values.shape[0]} matrix")
        if not np.allclose(values, values.T, rtol=0.0, atol=1e-12):
            raise ValueError("Interaction matrix must be symmetric")
        if np.any(np.diag(values) != 0.0) or np.any(values < 0.0):
            raise ValueError("Interaction matrix needs a zero diagonal and non-negative entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass
class SpinState:
    """Mean-field spins V (n×K, rows on the simplex) and loop counters."""

    V: np.ndarray
    temperature: float
    outer_steps: int = 0
    inner_steps: int = 0
    converged: bool = False

    @property
    def saturation(self) -> float:
        """(1/N) Σ V²; reaches one when every row is one-hot."""
        return float((self.V * self.V).sum() / max(len(self.V), 1))


@dataclass(frozen=True)
class AnnealResult:
    """Partition found by one annealing run, with its final spin state."""

    partition: Partition
    state: SpinState
    critical_temperature: float
    runtime_ms: float = field(default=0.0)

    @property
    def converged(self) -> bool:
        return self.state.converged

    def raise_for_convergence(self) -> "AnnealResult":
        """Raise NoConvergence carrying this result when the spins never saturated."""
        if not self.converged:
            raise NoConvergence(
                f"Spins did not saturate after {self.state.outer_steps} temperature steps",
                result=self,
            )
        return self


# =============================================================================
# Conflicts & objective
# =============================================================================


def _cluster_conflict(reports: Sequence[Report]) -> tuple[float, bool]:
    """Cumulative conflict of a subset and whether it had to be clamped."""
    if len(reports) <= 1:
        return 0.0, False
    try:
        _, conflict = combine_all([r.mass for r in reports])
    except TotalConflict:
        return CONFLICT_CLAMP, True
    if conflict > CONFLICT_CLAMP:
        return CONFLICT_CLAMP, True
    return conflict, False


def cluster_conflict(reports: Sequence[Report]) -> float:
    """
    Conflict when every report of a subset is combined by Dempster's rule.

    Empty and singleton subsets have no conflict; a totally conflicting
    subset is reported as 1 - 1e-12.
    """
    return _cluster_conflict(reports)[0]


def metaconflict(cluster_conflicts: Sequence[float]) -> float:
    """Mcf = 1 - Π (1 - c_i)."""
    # Sorted so the product does not depend on cluster labelling.
    return 1.0 - math.prod(1.0 - c for c in sorted(cluster_conflicts))


def metaconflict_weight_sum(cluster_conflicts: Sequence[float]) -> float:
    """
    Σ -ln(1 - c_i), the additive form of the metaconflict.

    Raises:
        InfiniteWeight: some c_i equals one.
    """
    if any(c >= 1.0 for c in cluster_conflicts):
        raise InfiniteWeight("A subset with conflict 1 has an infinite weight of conflict")
    return math.fsum(-math.log1p(-c) for c in cluster_conflicts)


def build_partition(reports: Sequence[Report], assignment: Sequence[int], cluster_count: int) -> Partition:
    """
    Evaluate an assignment of reports to clusters.

    Args:
        reports: The clustered reports.
        assignment: Cluster index per report.
        cluster_count: Number of clusters K (empty clusters allowed).

    Returns:
        Partition with per-cluster conflicts and metaconflict.
    """
    members: list[list[Report]] = [[] for _ in range(cluster_count)]
    for report, cluster in zip(reports, assignment):
        members[cluster].append(report)

    conflicts = []
    clamped = False
    for cluster_reports in members:
        c, was_clamped = _cluster_conflict(cluster_reports)
        conflicts.append(c)
        clamped |= was_clamped

    return Partition(
        report_ids=tuple(r.id for r in reports),
        assignment=tuple(int(a) for a in assignment),
        cluster_count=cluster_count,
        cluster_conflicts=tuple(conflicts),
        metaconflict=metaconflict(conflicts),
        clamped=clamped,
    )


# =============================================================================
# Couplings & critical temperature
# =============================================================================


def interactions(reports: Sequence[Report]) -> InteractionMatrix:
    """
    Build J_ij = -ln(1 - conflict(m_i, m_j)).

    For two simple supports this is exactly -ln(1 - s_i s_j) on disjoint
    foci and zero otherwise. Conflicts of one are clamped to -ln(1e-12).

    Raises:
        TooFewReports: fewer than two reports.
        FrameMismatch: reports over different frames.
    """
    if len(reports) < 2:
        raise TooFewReports(f"Need at least 2 reports, got {len(reports)}")
    frame = reports[0].frame
    for report in reports[1:]:
        if not report.frame.same_as(frame):
            raise FrameMismatch(f"Report {report.id} uses another frame")

    n = len(reports)
    supports = [r.mass.as_simple_support() for r in reports]
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if supports[i] is not None and supports[j] is not None:
                weight = weight_of_conflict(supports[i], supports[j])
            else:
                k = pairwise_conflict(reports[i].mass, reports[j].mass)
                weight = WEIGHT_CLAMP if k >= 1.0 else -math.log1p(-k)
            values[i, j] = values[j, i] = min(weight, WEIGHT_CLAMP)
    return InteractionMatrix(values, tuple(reports))


def _dominant_eigenvalue(matrix: np.ndarray) -> float:
    """Largest eigenvalue of a positive semi-definite symmetric matrix by power iteration."""
    n = matrix.shape[0]
    rng = np.random.default_rng(0)
    x = rng.normal(size=n)
    x /= np.linalg.norm(x)

    lam = 0.0
    for _ in range(EIGEN_MAX_ITER):
        y = matrix @ x
        y_norm = np.linalg.norm(y)
        if y_norm == 0.0:
            return 0.0
        lam_new = float(x @ y)
        x = y / y_norm
        if abs(lam_new - lam) <= EIGEN_TOL * abs(lam_new):
            return lam_new
        lam = lam_new
    logger.warning("Power iteration stopped after %d iterations", EIGEN_MAX_ITER)
    return lam


def extreme_eigenvalues(matrix: np.ndarray) -> tuple[float, float]:
    """
    Return (λ_min, λ_max) of a symmetric matrix.

    λ_max comes from power iteration on M + cI, c being a Gershgorin bound
    so the iterated matrix is positive semi-definite; λ_min then comes from
    power iteration on λ_max·I - M.
    """
    n = matrix.shape[0]
    identity = np.eye(n)
    bound = float(np.abs(matrix).sum(axis=1).max())
    lam_max = _dominant_eigenvalue(matrix + bound * identity) - bound
    lam_min = lam_max - _dominant_eigenvalue(lam_max * identity - matrix)
    return lam_min, lam_max


def critical_temperature(interaction: InteractionMatrix, params: AnnealParams) -> float:
    """
    T_c = (1/K)·max(-λ_min, λ_max) of M = J + α - γI.

    Raises:
        DegenerateMatrix: M is identically zero.
    """
    matrix = interaction.values + params.alpha - params.gamma * np.eye(interaction.n)
    if not np.any(matrix):
        raise DegenerateMatrix("M is zero: no couplings and γ = α = 0")
    lam_min, lam_max = extreme_eigenvalues(matrix)
    return max(-lam_min, lam_max) / params.cluster_count


# =============================================================================
# Annealing
# =============================================================================


def anneal(interaction: InteractionMatrix, params: AnnealParams) -> AnnealResult:
    """
    Relax the Potts mean-field equations under geometric cooling.

    At each temperature sites are updated serially in ascending order:
    H_ia = Σ_j (J_ij + α) V_ja - γ V_ia, then V_i = softmax(-H_i / T) plus
    ε·rand[0,1] noise, renormalized. Sweeps repeat until the mean absolute
    change per site drops to ``inner_tol``; the temperature is then scaled by
    τ. The run ends once (1/N) Σ V² reaches ``saturation`` or after
    ``max_outer`` temperature steps (``converged`` stays False then).

    Args:
        interaction: Couplings between the clustered reports.
        params: Annealing parameters, including K and the seed.

    Returns:
        AnnealResult; clusters are the per-row argmax (lowest index on ties).
    """
    started = time.perf_counter()
    n, K = interaction.n, params.cluster_count
    if n == 0:
        raise EmptyInput("Nothing to cluster")
    if len(interaction.reports) != n:
        raise ValueError("Annealing needs the reports behind the interaction matrix")

    rng = np.random.default_rng(params.seed)
    t_critical = critical_temperature(interaction, params)
    couplings = interaction.values + params.alpha

    V = 1.0 / K + params.epsilon * rng.random((n, K))
    V /= V.sum(axis=1, keepdims=True)
    state = SpinState(V=V, temperature=t_critical)

    while True:
        for _ in range(params.max_inner):
            previous = V.copy()
            for i in range(n):
                h = couplings[i] @ V - params.gamma * V[i]
                x = -h / state.temperature
                row = np.exp(x - x.max())
                row /= row.sum()
                row += params.epsilon * rng.random(K)
                V[i] = row / row.sum()
            state.inner_steps += 1
            if np.abs(V - previous).sum() / n <= params.inner_tol:
                break

        state.temperature *= params.tau
        state.outer_steps += 1
        logger.debug(
            "T=%.6g after %d steps, saturation %.4f",
            state.temperature,
            state.outer_steps,
            state.saturation,
        )
        if state.saturation >= params.saturation:
            state.converged = True
            break
        if state.outer_steps >= params.max_outer:
            logger.warning("Annealing with K=%d did not saturate within %d steps", K, params.max_outer)
            break

    assignment = np.argmax(V, axis=1)
    partition = build_partition(interaction.reports, assignment.tolist(), K)
    runtime_ms = (time.perf_counter() - started) * 1000.0
    return AnnealResult(partition, state, t_critical, runtime_ms)


def energy(interaction: InteractionMatrix, assignment: Sequence[int], cluster_count: int, gamma: float, alpha: float) -> float:
    """Potts energy of a one-hot assignment, including the γ and α terms."""
    values = interaction.values
    labels = np.asarray(assignment)
    same = labels[:, None] == labels[None, :]
    coupling = 0.5 * float(values[same].sum())
    sizes = np.bincount(labels, minlength=cluster_count)
    return coupling - 0.5 * gamma * len(labels) + 0.5 * alpha * float((sizes * sizes).sum())


def is_local_minimum(
    interaction: InteractionMatrix,
    assignment: Sequence[int],
    cluster_count: int,
    gamma: float,
    alpha: float,
    tol: float = 1e-9,
) -> bool:
    """True when no single-report reassignment lowers the energy by more than ``tol``."""
    base = energy(interaction, assignment, cluster_count, gamma, alpha)
    moved = list(assignment)
    for i, current in enumerate(assignment):
        for cluster in range(cluster_count):
            if cluster == current:
                continue
            moved[i] = cluster
            if energy(interaction, moved, cluster_count, gamma, alpha) < base - tol:
                return False
        moved[i] = current
    return True


# =============================================================================
# Exhaustive oracle
# =============================================================================


def _stirling2(n: int, k: int) -> int:
    return sum((-1) ** i * math.comb(k, i) * (k - i) ** n for i in range(k + 1)) // math.factorial(k)


def partition_count(n: int, q: int) -> int:
    """Number of set partitions of n items into at most q blocks."""
    return sum(_stirling2(n, k) for k in range(1, min(n, q) + 1))


def _restricted_growth_strings(n: int, q: int):
    """Canonical labellings of set partitions into at most q blocks, in lexicographic order."""
    labels = [0] * n

    def extend(i: int, used: int):
        if i == n:
            yield tuple(labels)
            return
        for label in range(min(used + 1, q)):
            labels[i] = label
            yield from extend(i + 1, max(used, label + 1))

    yield from extend(1, 1)


def brute_force_partition(
    reports: Sequence[Report],
    q: int,
    max_partitions: Optional[int] = None,
) -> Partition:
    """
    Find a partition of globally minimal metaconflict by exhaustive search.

    Blocks are unlabeled; ties keep the first partition in enumeration order.

    Args:
        reports: Reports to partition.
        q: Maximum number of blocks.
        max_partitions: Enumeration cap; defaults to the count for 10 reports
            and 4 blocks.

    Raises:
        InstanceTooLarge: the enumeration would exceed the cap.
        KOutOfRange: q is below one.
    """
    if not reports:
        raise EmptyInput("Nothing to partition")
    if q < 1:
        raise KOutOfRange(f"Cannot partition into q={q} blocks")
    n = len(reports)
    cap = max_partitions if max_partitions is not None else partition_count(ORACLE_MAX_REPORTS, ORACLE_MAX_BLOCKS)
    total = partition_count(n, q)
    if total > cap:
        raise InstanceTooLarge(f"{total} partitions of {n} reports into <= {q} blocks exceed the cap of {cap}")

    cache: dict[int, float] = {}

    def block_conflict(mask: int) -> float:
        if mask not in cache:
            cache[mask] = cluster_conflict([reports[i] for i in range(n) if mask >> i & 1])
        return cache[mask]

    best: Optional[tuple[int, ...]] = None
    best_value = math.inf
    for labels in _restricted_growth_strings(n, q):
        masks = [0] * q
        for i, label in enumerate(labels):
            masks[label] |= 1 << i
        value = metaconflict([block_conflict(mask) for mask in masks if mask])
        if value < best_value:
            best, best_value = labels, value

    logger.debug("Oracle enumerated %d partitions, minimum %.9g", total, best_value)
    return build_partition(reports, best, q)

