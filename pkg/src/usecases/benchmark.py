"""
Benchmark - Synthetic instances, performance metrics and validation harnesses.

This module provides:
1. The 2^K - 1 report test problem, which always admits a zero-metaconflict
   K-partition, and its constructive witness
2. Random simple-support instances for the exhaustive oracle comparison
3. Multi-event report corpora with ground truth for pipeline runs
4. Performance metrics and the N² log² N scaling study, aggregated with pandas
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.loader import AnnealConfig
from domain.errors import EmptyInput, InvalidMass, KOutOfRange
from domain.evidence import make_mass_function, simple_support_mass
from domain.models import Frame, MassFunction, Partition, Report, Subset
from usecases.potts_clustering import (
    AnnealResult,
    anneal,
    brute_force_partition,
    build_partition,
    interactions,
)

logger = logging.getLogger(__name__)

MAX_BENCHMARK_K = 16
LARGE_K = 10
MATCH_TOLERANCE = 1e-9
NEGATIVE_GAP_TOLERANCE = 1e-12
SCALING_FACTOR_BOUND = 4.0

# Largest runs reported for the mean-field method (2047 reports, 11 clusters);
# printed for comparison only.
REFERENCE_ROW = {"K": 11, "N": 2047, "mean_per_evidence": 0.008, "median_per_evidence": 0.024}


# =============================================================================
# Support values
# =============================================================================


@dataclass(frozen=True)
class SupportMode:
    """Source of simple-support values: a fixed value or a seeded uniform range."""

    low: float = 0.1
    high: float = 0.9

    def __post_init__(self) -> None:
        if not 0.0 < self.low <= self.high < 1.0:
            raise InvalidMass(f"Support range [{self.low}, {self.high}] must lie inside (0, 1)")

    @property
    def is_fixed(self) -> bool:
        return self.low == self.high

    @classmethod
    def parse(cls, text: str) -> "SupportMode":
        """
        Parse ``fixed:<v>`` or ``range:<lo>,<hi>``.

        Raises:
            InvalidMass: malformed text or values outside (0, 1).
        """
        kind, _, values = text.partition(":")
        try:
            if kind == "fixed":
                value = float(values)
                return cls(value, value)
            if kind == "range":
                low, high = (float(v) for v in values.split(","))
                return cls(low, high)
        except ValueError:
            pass
        raise InvalidMass(f"Unknown support mode {text!r}, expected fixed:<v> or range:<lo>,<hi>")

    def draw(self, rng: np.random.Generator) -> float:
        """Draw one support value; fixed modes consume no random numbers."""
        if self.is_fixed:
            return self.low
        return float(rng.uniform(self.low, self.high))

    def __str__(self) -> str:
        return f"fixed:{self.low}" if self.is_fixed else f"range:{self.low},{self.high}"


def numbered_frame(size: int) -> Frame:
    """Frame with labels "1" .. "size"."""
    return Frame(tuple(str(i) for i in range(1, size + 1)))


# =============================================================================
# Instances
# =============================================================================


def generate_benchmark(cluster_count: int, support: SupportMode = SupportMode(), seed: int = 0) -> list[Report]:
    """
    One simple-support report per nonempty subset of Θ = {1..K}.

    The report focused on Θ itself is vacuous. Reports are ordered by
    ascending bit pattern; support values are drawn in that order.

    Raises:
        KOutOfRange: K outside 1..16.
    """
    if not 1 <= cluster_count <= MAX_BENCHMARK_K:
        raise KOutOfRange(f"K={cluster_count} is outside 1..{MAX_BENCHMARK_K}")
    frame = numbered_frame(cluster_count)
    rng = np.random.default_rng(seed)
    reports = []
    for bits in range(1, frame.full_bits + 1):
        mass = simple_support_mass(frame, Subset(frame, bits), support.draw(rng))
        reports.append(Report(id=f"b{bits:05d}", timestamp=0.0, mass=mass, source_tag="benchmark"))
    return reports


def _lowest_label(bits: int) -> int:
    return (bits & -bits).bit_length() - 1


def witness_partition(reports: Sequence[Report], cluster_count: int) -> Partition:
    """
    Constructive zero-metaconflict partition of a benchmark instance.

    A report is put in the cluster of the lowest label shared by all its
    focal elements; every member of cluster a then contains label a, so no
    disjoint pair exists inside any cluster.
    """
    assignment = []
    for report in reports:
        core = report.frame.full_bits
        for bits, _ in report.mass.entries:
            core &= bits
        if core == 0:
            raise InvalidMass(f"Report {report.id} has no label common to all its focal elements")
        assignment.append(min(_lowest_label(core), cluster_count - 1))
    return build_partition(reports, assignment, cluster_count)


def _random_nonempty_bits(rng: np.random.Generator, size: int, proper: bool) -> int:
    full = (1 << size) - 1
    while True:
        flags = rng.random(size) < 0.5
        bits = sum(1 << i for i, flag in enumerate(flags) if flag)
        if bits and not (proper and bits == full):
            return bits


def random_instance(n: int, frame_size: int = 4, seed: int = 0, support: SupportMode = SupportMode()) -> list[Report]:
    """Random simple-support reports with foci drawn among the proper nonempty subsets."""
    if frame_size < 2:
        raise KOutOfRange("Random instances need a frame of at least two labels")
    frame = numbered_frame(frame_size)
    rng = np.random.default_rng(seed)
    reports = []
    for i in range(n):
        focus = Subset(frame, _random_nonempty_bits(rng, frame_size, proper=True))
        mass = simple_support_mass(frame, focus, support.draw(rng))
        reports.append(Report(id=f"r{i:03d}", timestamp=float(i), mass=mass, source_tag="random"))
    return reports


def random_mass_function(frame: Frame, rng: np.random.Generator, max_focal: int = 4) -> MassFunction:
    """Random mass function with up to ``max_focal`` focal elements and Dirichlet masses."""
    count = int(rng.integers(1, max_focal + 1))
    focal = {_random_nonempty_bits(rng, frame.size, proper=False) for _ in range(count)}
    masses = rng.dirichlet(np.ones(len(focal)))
    return make_mass_function(frame, ((Subset(frame, bits), float(m)) for bits, m in zip(sorted(focal), masses)))


class CorpusSpec(BaseModel):
    """Parameters of a synthetic multi-event corpus."""

    model_config = ConfigDict(frozen=True)

    frame_size: int = Field(default=8, ge=1, le=64)
    count: int = Field(default=100, ge=0)
    events: int = Field(default=2, ge=1)
    noise: float = Field(default=0.0, ge=0.0, le=1.0, description="Probability of a focus drawn over the whole frame")
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def validate_events(self) -> "CorpusSpec":
        """Every event needs its own anchor label."""
        if self.events > self.frame_size:
            raise ValueError(f"{self.events} events do not fit a frame of {self.frame_size} labels")
        return self


def gen_corpus(spec: CorpusSpec, support: SupportMode = SupportMode()) -> list[Report]:
    """
    Generate reports around ``events`` disjoint ground-truth foci.

    Labels are dealt round-robin to the events, label j being the anchor of
    event j. A clean report focuses on its event's anchor plus a random part
    of the event's other labels; with probability ``noise`` the focus is
    drawn uniformly over all nonempty subsets instead. The event id is kept
    in ``meta`` under "event".
    """
    frame = numbered_frame(spec.frame_size)
    blocks = [[i for i in range(spec.frame_size) if i % spec.events == j] for j in range(spec.events)]
    rng = np.random.default_rng(spec.seed)

    reports = []
    for i in range(spec.count):
        noisy = rng.random() < spec.noise
        event = int(rng.integers(spec.events))
        if noisy:
            bits = _random_nonempty_bits(rng, spec.frame_size, proper=False)
        else:
            anchor, *others = blocks[event]
            bits = 1 << anchor
            for label, flag in zip(others, rng.random(len(others)) < 0.5):
                if flag:
                    bits |= 1 << label
        mass = simple_support_mass(frame, Subset(frame, bits), support.draw(rng))
        reports.append(
            Report(
                id=f"c{i:06d}",
                timestamp=float(i),
                mass=mass,
                source_tag="corpus",
                meta=(("event", str(event)), ("noisy", "1" if noisy else "0")),
            )
        )
    return reports


# =============================================================================
# Performance metrics
# =============================================================================


@dataclass(frozen=True)
class PerformanceReport:
    """Aggregated clustering quality over several runs."""

    runs: int
    mean_metaconflict: float
    median_metaconflict: float
    mean_per_cluster: float
    median_per_cluster: float
    mean_per_evidence: float
    median_per_evidence: float
    mean_runtime_ms: float
    median_runtime_ms: float
    mean_sweeps: float
    mean_outer_steps: float
    converged_runs: int


def runs_frame(
    partitions: Sequence[Partition],
    runtimes_ms: Optional[Sequence[float]] = None,
    sweeps: Optional[Sequence[int]] = None,
    outer_steps: Optional[Sequence[int]] = None,
    converged: Optional[Sequence[bool]] = None,
) -> pd.DataFrame:
    """One row per run with metaconflict per cluster (Mcf/q) and per evidence (Mcf/n)."""
    count = len(partitions)
    df = pd.DataFrame(
        {
            "metaconflict": [p.metaconflict for p in partitions],
            "q": [p.cluster_count for p in partitions],
            "n": [len(p.report_ids) for p in partitions],
            "runtime_ms": list(runtimes_ms) if runtimes_ms is not None else [0.0] * count,
            "sweeps": list(sweeps) if sweeps is not None else [0] * count,
            "outer_steps": list(outer_steps) if outer_steps is not None else [0] * count,
            "converged": list(converged) if converged is not None else [True] * count,
        }
    )
    df["per_cluster"] = df["metaconflict"] / df["q"]
    df["per_evidence"] = df["metaconflict"] / df["n"]
    return df


def performance_report(
    partitions: Sequence[Partition],
    runtimes_ms: Optional[Sequence[float]] = None,
    sweeps: Optional[Sequence[int]] = None,
    outer_steps: Optional[Sequence[int]] = None,
    converged: Optional[Sequence[bool]] = None,
) -> PerformanceReport:
    """
    Mean and median metaconflict, per cluster and per evidence, over runs.

    Raises:
        EmptyInput: no partition given.
    """
    if not partitions:
        raise EmptyInput("No run to report on")
    df = runs_frame(partitions, runtimes_ms, sweeps, outer_steps, converged)
    return PerformanceReport(
        runs=len(df),
        mean_metaconflict=float(df["metaconflict"].mean()),
        median_metaconflict=float(df["metaconflict"].median()),
        mean_per_cluster=float(df["per_cluster"].mean()),
        median_per_cluster=float(df["per_cluster"].median()),
        mean_per_evidence=float(df["per_evidence"].mean()),
        median_per_evidence=float(df["per_evidence"].median()),
        mean_runtime_ms=float(df["runtime_ms"].mean()),
        median_runtime_ms=float(df["runtime_ms"].median()),
        mean_sweeps=float(df["sweeps"].mean()),
        mean_outer_steps=float(df["outer_steps"].mean()),
        converged_runs=int(df["converged"].sum()),
    )


def report_from_results(results: Sequence[AnnealResult]) -> PerformanceReport:
    """Performance report straight from annealing results."""
    return performance_report(
        [r.partition for r in results],
        runtimes_ms=[r.runtime_ms for r in results],
        sweeps=[r.state.inner_steps for r in results],
        outer_steps=[r.state.outer_steps for r in results],
        converged=[r.converged for r in results],
    )


# =============================================================================
# Scaling study
# =============================================================================


@dataclass(frozen=True)
class ScalingRow:
    """Benchmark results for one K, N = 2^K - 1."""

    K: int
    N: int
    performance: PerformanceReport


@dataclass(frozen=True)
class ScalingRatio:
    """Observed growth between two consecutive K against the N² log² N prediction."""

    k_from: int
    k_to: int
    runtime_ratio: float
    sweeps_ratio: float
    predicted_ratio: float

    @property
    def within_bound(self) -> bool:
        if self.predicted_ratio <= 0.0 or self.runtime_ratio <= 0.0:
            return False
        factor = self.runtime_ratio / self.predicted_ratio
        return 1.0 / SCALING_FACTOR_BOUND <= factor <= SCALING_FACTOR_BOUND


def predicted_cost(n: int) -> float:
    """N² log² N."""
    return n * n * math.log(n) ** 2


def bench_cluster_count(
    cluster_count: int,
    runs: int,
    seed: int,
    anneal_config: AnnealConfig,
    support: SupportMode = SupportMode(),
) -> ScalingRow:
    """
    Anneal the K benchmark instance ``runs`` times.

    The instance is drawn with ``seed``; run r anneals with seed + r.
    """
    if runs < 1:
        raise EmptyInput("At least one run is required")
    reports = generate_benchmark(cluster_count, support, seed)
    if len(reports) < 2:
        # K=1: a single vacuous report, nothing to anneal.
        partition = build_partition(reports, [0] * len(reports), cluster_count)
        return ScalingRow(cluster_count, len(reports), performance_report([partition] * runs))

    matrix = interactions(reports)
    results = []
    for r in range(runs):
        result = anneal(matrix, anneal_config.for_clusters(cluster_count, seed=seed + r))
        logger.debug("K=%d run %d: metaconflict %.9g in %.1f ms", cluster_count, r, result.partition.metaconflict, result.runtime_ms)
        results.append(result)
    return ScalingRow(cluster_count, len(reports), report_from_results(results))


def scaling_table(
    k_values: Sequence[int],
    runs: int,
    seed: int,
    anneal_config: AnnealConfig,
    support: SupportMode = SupportMode(),
) -> list[ScalingRow]:
    """One ScalingRow per K, in the given order."""
    return [bench_cluster_count(k, runs, seed, anneal_config, support) for k in k_values]


def scaling_ratios(rows: Sequence[ScalingRow]) -> list[ScalingRatio]:
    """Ratios between consecutive rows; rows whose prediction is zero (N=1) are skipped."""
    ratios = []
    for before, after in zip(rows, rows[1:]):
        base = predicted_cost(before.N)
        if base == 0.0:
            continue
        ratio = ScalingRatio(
            k_from=before.K,
            k_to=after.K,
            runtime_ratio=_safe_ratio(after.performance.mean_runtime_ms, before.performance.mean_runtime_ms),
            sweeps_ratio=_safe_ratio(after.performance.mean_sweeps, before.performance.mean_sweeps),
            predicted_ratio=predicted_cost(after.N) / base,
        )
        if not ratio.within_bound:
            logger.warning(
                "Runtime ratio K=%d→%d is %.3g, prediction %.3g",
                ratio.k_from,
                ratio.k_to,
                ratio.runtime_ratio,
                ratio.predicted_ratio,
            )
        ratios.append(ratio)
    return ratios


def _safe_ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator > 0.0 else 0.0


# =============================================================================
# Oracle comparison
# =============================================================================


@dataclass(frozen=True)
class OracleComparison:
    """Annealing against exhaustive search on one instance."""

    seed: int
    anneal_metaconflict: float
    oracle_metaconflict: float
    converged: bool

    @property
    def gap(self) -> float:
        return self.anneal_metaconflict - self.oracle_metaconflict

    @property
    def match(self) -> bool:
        return abs(self.gap) <= MATCH_TOLERANCE


@dataclass(frozen=True)
class OracleSummary:
    """All comparisons of a seeded oracle run."""

    n: int
    q: int
    comparisons: tuple[OracleComparison, ...]

    @property
    def match_rate(self) -> float:
        if not self.comparisons:
            return 0.0
        return sum(c.match for c in self.comparisons) / len(self.comparisons)

    @property
    def negative_gaps(self) -> int:
        return sum(c.gap < -NEGATIVE_GAP_TOLERANCE for c in self.comparisons)


def compare_with_oracle(
    n: int,
    q: int,
    instances: int,
    seed: int,
    anneal_config: AnnealConfig,
    frame_size: int = 4,
    max_partitions: Optional[int] = None,
) -> OracleSummary:
    """
    Anneal ``instances`` random instances and compare with the exhaustive minimum.

    Instance i is drawn and annealed with seed + i.

    Raises:
        InstanceTooLarge: (n, q) exceeds the enumeration cap.
    """
    comparisons = []
    for i in range(instances):
        reports = random_instance(n, frame_size, seed + i)
        oracle = brute_force_partition(reports, q, max_partitions)
        result = anneal(interactions(reports), anneal_config.for_clusters(q, seed=seed + i))
        comparison = OracleComparison(seed + i, result.partition.metaconflict, oracle.metaconflict, result.converged)
        if comparison.gap < -NEGATIVE_GAP_TOLERANCE:
            logger.error("Instance %d: annealing beat the exhaustive minimum by %.3g", seed + i, -comparison.gap)
        comparisons.append(comparison)
    summary = OracleSummary(n, q, tuple(comparisons))
    logger.info("Oracle comparison n=%d q=%d: match rate %.3f over %d instances", n, q, summary.match_rate, instances)
    return summary
