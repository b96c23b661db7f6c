"""
Prototype extraction and fast classification.

Membership of a report in a cluster is judged by the metalevel evidence
m(e ∉ χ_j): the share of the conflict of χ_j ∪ {e} that is due to e,
normalized by the conflict-free mass of χ_j without e. Every orientation
used here (moving a member out, moving an outsider in, classifying an
incoming report) is (c_with - c_without) / (1 - c_without), which always
lies in [0, 1].
"""

import logging
import math
from collections.abc import Mapping, Sequence

from domain.errors import (
    AllImplausible,
    DegeneratePartition,
    EmptyTable,
    FrameMismatch,
    TotalConflict,
    UnknownReport,
)
from domain.evidence import combine_dempster
from domain.models import (
    ClassificationResult,
    Credibility,
    MassFunction,
    MembershipEvidence,
    Partition,
    PrototypeCluster,
    PrototypeTable,
    Report,
    Verdict,
)
from usecases.potts_clustering import CONFLICT_CLAMP, cluster_conflict

logger = logging.getLogger(__name__)


def _evidence_against(c_with: float, c_without: float) -> float:
    value = (c_with - c_without) / (1.0 - c_without)
    return min(max(value, 0.0), 1.0)


def _lookup(store: Mapping[str, Report], report_id: str) -> Report:
    try:
        return store[report_id]
    except KeyError:
        raise UnknownReport(f"Report {report_id} is not in the store") from None


def membership_evidence(report: Report, partition: Partition, store: Mapping[str, Report]) -> MembershipEvidence:
    """
    Evidence against membership of ``report`` in every cluster of ``partition``.

    For the cluster holding the report the conflict with and without it is
    compared; for any other cluster the report is tentatively added.

    Args:
        report: The report to judge.
        partition: A partition over reports of ``store``.
        store: Report id → Report.

    Returns:
        MembershipEvidence with one entry per cluster.
    """
    clusters = [[_lookup(store, rid) for rid in partition.members(j)] for j in range(partition.cluster_count)]
    for members in clusters:
        if members and not members[0].frame.same_as(report.frame):
            raise FrameMismatch(f"Report {report.id} uses another frame than the partition")

    against = []
    for members in clusters:
        others = [m for m in members if m.id != report.id]
        c_without = cluster_conflict(others)
        c_with = cluster_conflict(others + [report])
        against.append(_evidence_against(c_with, c_without))
    return MembershipEvidence(tuple(against))


def credibility(evidence: MembershipEvidence) -> Credibility:
    """
    α_j = Pls_j² / Σ_k Pls_k with Pls_j = 1 - m(e ∉ χ_j).

    Raises:
        AllImplausible: every cluster has zero plausibility.
    """
    plausibilities = [1.0 - a for a in evidence.against]
    total = math.fsum(plausibilities)
    if total <= 0.0:
        raise AllImplausible("The report is implausible in every cluster")
    return Credibility(tuple(p * p / total for p in plausibilities), evidence.against)


def _combine_prototypes(prototypes: Sequence[Report]) -> tuple[tuple[str, ...], MassFunction, float]:
    """Combine prototypes in order, skipping any that would cause total conflict."""
    kept = [prototypes[0]]
    combined = prototypes[0].mass
    survival = 1.0
    for report in prototypes[1:]:
        try:
            combined, k = combine_dempster(combined, report.mass)
        except TotalConflict:
            logger.warning("Prototype %s is totally conflicting with its cluster, skipped", report.id)
            continue
        survival *= 1.0 - k
        kept.append(report)
    return tuple(r.id for r in kept), combined, min(1.0 - survival, CONFLICT_CLAMP)


def extract_prototypes(
    partition: Partition,
    store: Mapping[str, Report],
    proto_count: int,
    threshold: float,
) -> PrototypeTable:
    """
    Select up to ``proto_count`` prototypes per cluster and pre-combine them.

    Rule 1: every report is a potential prototype of the cluster against
    which it has the least membership evidence. Rule 2: each cluster keeps
    its ``proto_count`` most credible potential prototypes (ties by id).
    Only clusters holding members of the partition are eligible under
    rule 1. Reports implausible in every cluster are never prototypes.
    Clusters without potential prototypes are kept empty and take no part
    in classification.

    Raises:
        DegeneratePartition: the partition has no report.
    """
    if not partition.report_ids:
        raise DegeneratePartition("Cannot extract prototypes from an empty partition")

    candidates: list[list[tuple[float, str]]] = [[] for _ in range(partition.cluster_count)]
    # Empty clusters score zero against every report.
    occupied = sorted(set(partition.assignment))
    for report_id in partition.report_ids:
        report = _lookup(store, report_id)
        evidence = membership_evidence(report, partition, store)
        try:
            alpha = credibility(evidence)
        except AllImplausible:
            logger.debug("Report %s is implausible everywhere, not a prototype", report_id)
            continue
        best = min(occupied, key=lambda j: (evidence.against[j], j))
        candidates[best].append((alpha.alpha[best], report_id))

    clusters = []
    for index, potential in enumerate(candidates):
        if not potential:
            clusters.append(PrototypeCluster(index, (), None, 0.0))
            continue
        ranked = sorted(potential, key=lambda item: (-item[0], item[1]))[:proto_count]
        prototype_ids, combined, conflict = _combine_prototypes([store[rid] for _, rid in ranked])
        clusters.append(PrototypeCluster(index, prototype_ids, combined, conflict))

    frame = _lookup(store, partition.report_ids[0]).frame
    return PrototypeTable(frame=frame, threshold=threshold, proto_count=proto_count, clusters=tuple(clusters))


def classify(report: Report, table: PrototypeTable) -> ClassificationResult:
    """
    Classify one report with a single Dempster combination per cluster.

    With k_j the conflict between the report and cluster j's combined
    prototypes, c_j* = 1 - (1 - c_j)(1 - k_j) and
    m(e ∉ χ_j) = (c_j* - c_j) / (1 - c_j). Empty clusters hold evidence 1
    without a combination, so ``combinations_used`` counts the active
    clusters only; it is the cluster count when no cluster is empty.
    The report is rejected when the smallest evidence exceeds the table
    threshold, else assigned to that cluster (lowest index on ties).

    Raises:
        FrameMismatch: the report uses another frame.
        EmptyTable: the table has no classifiable cluster.
    """
    if not report.frame.same_as(table.frame):
        raise FrameMismatch(f"Report {report.id} uses another frame than the prototype table")
    if not table.active_clusters:
        raise EmptyTable("The prototype table has no classifiable cluster")

    against = []
    combinations = 0
    for cluster in table.clusters:
        if cluster.combined is None:
            against.append(1.0)
            continue
        combinations += 1
        try:
            _, k = combine_dempster(report.mass, cluster.combined)
        except TotalConflict:
            k = 1.0
        c_star = min(1.0 - (1.0 - cluster.baseline_conflict) * (1.0 - k), 1.0)
        against.append(_evidence_against(c_star, cluster.baseline_conflict))

    evidence = MembershipEvidence(tuple(against))
    best = evidence.best_cluster
    if evidence.against[best] > table.threshold:
        return ClassificationResult(Verdict.REJECTED, None, evidence, combinations)
    return ClassificationResult(Verdict.ASSIGNED, best, evidence, combinations)


def classify_batch(reports: Sequence[Report], table: PrototypeTable) -> list[ClassificationResult]:
    """Classify several reports against the same table."""
    return [classify(report, table) for report in reports]
