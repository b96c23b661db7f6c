"""
Data transformers - Convert domain models to records, JSON and DataFrames.

This module contains the logic for transforming domain models into:

1. JSON-ready records validated by pydantic models (NDJSON streams, partition
   and prototype table files, snapshot state)
2. pandas DataFrames with an explicit PyArrow schema for Parquet storage of DB1

This transformation belongs in the use case layer because:

1. The domain layer should remain pure (no pydantic/pandas/pyarrow dependencies)
2. The storage port should be generic (no domain knowledge)
3. The use case orchestrates between domain and infrastructure
"""

import json
import math
from functools import lru_cache
from typing import Any, Optional

import pandas as pd
import pyarrow as pa
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from domain.errors import DuplicateFocalElement, ReportFormatError
from domain.evidence import make_mass_function
from domain.models import (
    ClassificationResult,
    EpochOutcome,
    Frame,
    MassFunction,
    MembershipEvidence,
    Partition,
    PrototypeCluster,
    PrototypeTable,
    Report,
    RoutingDecision,
    Verdict,
)

SIGNIFICANT_DIGITS = 9


# =============================================================================
# PyArrow Schemas
# =============================================================================

REPORT_SCHEMA = pa.schema(
    [
        ("id", pa.string()),
        ("timestamp", pa.float64()),
        ("source", pa.string()),
        ("frame", pa.string()),  # JSON-encoded list of labels
        ("focal", pa.string()),  # JSON-encoded list of {"set", "mass"}
        ("meta", pa.string()),  # JSON-encoded object
    ]
)


# =============================================================================
# Records
# =============================================================================


class FocalRecord(BaseModel):
    """One focal element: its labels and mass."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    labels: list[str] = Field(alias="set")
    mass: float


class MassRecord(BaseModel):
    """JSON form of a mass function."""

    model_config = ConfigDict(extra="forbid")

    frame: list[str]
    focal: list[FocalRecord]


class ReportRecord(MassRecord):
    """JSON form of a report: a mass function plus identity."""

    model_config = ConfigDict(extra="ignore")

    id: str
    timestamp: float
    source: str = ""
    meta: dict[str, str] = Field(default_factory=dict)


class PartitionRecord(BaseModel):
    """JSON form of a partition; clustering metrics are optional."""

    model_config = ConfigDict(extra="ignore")

    report_ids: list[str]
    assignment: list[int]
    cluster_count: int
    cluster_conflicts: list[float] = Field(default_factory=list)
    metaconflict: float = 0.0
    clamped: bool = False


class PrototypeClusterRecord(BaseModel):
    index: int
    prototype_ids: list[str]
    combined: Optional[MassRecord] = None
    baseline_conflict: float = 0.0


class PrototypeTableRecord(BaseModel):
    """JSON form of a prototype table."""

    frame: list[str]
    threshold: float
    proto_count: int
    clusters: list[PrototypeClusterRecord]


def _validate(model: type[BaseModel], obj: Any) -> Any:
    try:
        return model.model_validate(obj)
    except ValidationError as e:
        raise ReportFormatError(f"Invalid {model.__name__}: {e}") from e


@lru_cache(maxsize=256)
def _frame(labels: tuple[str, ...]) -> Frame:
    return Frame(labels)


# =============================================================================
# Mass functions & reports
# =============================================================================


def mass_to_record(m: MassFunction) -> dict:
    """Focal elements in canonical order."""
    return {
        "frame": list(m.frame.labels),
        "focal": [{"set": list(subset.labels), "mass": mass} for subset, mass in m.items()],
    }


def mass_from_record(obj: Any, normalize: bool = True) -> MassFunction:
    """
    Parse and validate a mass function.

    Args:
        obj: Decoded JSON object or a MassRecord.
        normalize: Renormalize masses within tolerance of one; stored
            snapshots are decoded as-is so they round-trip bit for bit.

    Raises:
        ReportFormatError: the object does not have the expected shape.
        EvidenceError: the mass function breaks an invariant.
    """
    record = obj if isinstance(obj, MassRecord) else _validate(MassRecord, obj)
    frame = _frame(tuple(record.frame))
    pairs = [(frame.subset(*focal.labels), focal.mass) for focal in record.focal]
    if normalize:
        return make_mass_function(frame, pairs)
    seen: set[int] = set()
    for subset, _ in pairs:
        if subset.bits in seen:
            raise DuplicateFocalElement(f"Focal element {subset!r} listed twice")
        seen.add(subset.bits)
    return MassFunction(frame, tuple((subset.bits, mass) for subset, mass in pairs))


def report_to_record(report: Report) -> dict:
    record = {"id": report.id, "timestamp": report.timestamp, "source": report.source_tag}
    record.update(mass_to_record(report.mass))
    if report.meta:
        record["meta"] = dict(report.meta)
    return record


def report_from_record(obj: Any, normalize: bool = True) -> Report:
    """Parse one report; see ``mass_from_record``."""
    record = _validate(ReportRecord, obj)
    mass = mass_from_record(MassRecord(frame=record.frame, focal=record.focal), normalize)
    return Report(
        id=record.id,
        timestamp=record.timestamp,
        mass=mass,
        source_tag=record.source,
        meta=tuple(sorted(record.meta.items())),
    )


def parse_report_line(line: str) -> Report:
    """
    Parse one NDJSON line.

    Raises:
        ReportFormatError: invalid JSON or shape.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise ReportFormatError(f"Invalid JSON: {e}") from e
    return report_from_record(obj)


# =============================================================================
# Clustering & classification
# =============================================================================


def partition_to_record(partition: Partition) -> dict:
    return {
        "report_ids": list(partition.report_ids),
        "assignment": list(partition.assignment),
        "cluster_count": partition.cluster_count,
        "cluster_conflicts": list(partition.cluster_conflicts),
        "metaconflict": partition.metaconflict,
        "clamped": partition.clamped,
    }


def partition_from_record(obj: Any) -> PartitionRecord:
    """Validate a partition file; conflicts are recomputed by the caller from the reports."""
    record = _validate(PartitionRecord, obj)
    if len(record.report_ids) != len(record.assignment):
        raise ReportFormatError("Partition needs one cluster index per report id")
    if any(not 0 <= a < record.cluster_count for a in record.assignment):
        raise ReportFormatError("Partition assignment out of range")
    return record


def table_to_record(table: PrototypeTable) -> dict:
    return {
        "frame": list(table.frame.labels),
        "threshold": table.threshold,
        "proto_count": table.proto_count,
        "clusters": [
            {
                "index": cluster.index,
                "prototype_ids": list(cluster.prototype_ids),
                "combined": mass_to_record(cluster.combined) if cluster.combined is not None else None,
                "baseline_conflict": cluster.baseline_conflict,
            }
            for cluster in table.clusters
        ],
    }


def table_from_record(obj: Any) -> PrototypeTable:
    """Decode a prototype table exactly as it was stored."""
    record = _validate(PrototypeTableRecord, obj)
    clusters = []
    for cluster in record.clusters:
        combined = mass_from_record(cluster.combined, normalize=False) if cluster.combined is not None else None
        clusters.append(PrototypeCluster(cluster.index, tuple(cluster.prototype_ids), combined, cluster.baseline_conflict))
    try:
        return PrototypeTable(
            frame=_frame(tuple(record.frame)),
            threshold=record.threshold,
            proto_count=record.proto_count,
            clusters=tuple(clusters),
        )
    except ValueError as e:
        raise ReportFormatError(f"Invalid prototype table: {e}") from e


def result_to_record(report_id: str, result: ClassificationResult) -> dict:
    return {
        "id": report_id,
        "verdict": result.verdict.value,
        "cluster": result.cluster,
        "against": list(result.evidence.against),
        "combinations_used": result.combinations_used,
    }


def routing_to_record(decision: RoutingDecision) -> dict:
    record = {"id": decision.report_id, "verdict": decision.verdict.value, "cluster": decision.cluster}
    if decision.result is not None:
        record["against"] = list(decision.result.evidence.against)
        record["combinations_used"] = decision.result.combinations_used
    return record


def routing_from_record(obj: dict) -> RoutingDecision:
    result = None
    verdict = Verdict(obj["verdict"])
    if "against" in obj:
        result = ClassificationResult(
            verdict=verdict,
            cluster=obj["cluster"],
            evidence=MembershipEvidence(tuple(float(a) for a in obj["against"])),
            combinations_used=int(obj["combinations_used"]),
        )
    return RoutingDecision(obj["id"], verdict, obj["cluster"], result)


# =============================================================================
# DB1 DataFrame
# =============================================================================


def reports_to_dataframe(reports: list[Report]) -> pd.DataFrame:
    """
    Convert reports to a DataFrame matching REPORT_SCHEMA.

    Nested structures (frame labels, focal elements, meta) are JSON-encoded
    strings.
    """
    records = []
    for report in reports:
        mass = mass_to_record(report.mass)
        records.append(
            {
                "id": report.id,
                "timestamp": report.timestamp,
                "source": report.source_tag,
                "frame": json.dumps(mass["frame"]),
                "focal": json.dumps(mass["focal"]),
                "meta": json.dumps(dict(report.meta)),
            }
        )

    df = pd.DataFrame(records, columns=[field.name for field in REPORT_SCHEMA])
    df["timestamp"] = df["timestamp"].astype("float64")
    return df


def dataframe_to_reports(df: pd.DataFrame) -> list[Report]:
    """Inverse of ``reports_to_dataframe``; masses are decoded without renormalization."""
    reports = []
    for row in df.itertuples(index=False):
        try:
            record = {
                "id": row.id,
                "timestamp": float(row.timestamp),
                "source": str(row.source),
                "frame": json.loads(row.frame),
                "focal": json.loads(row.focal),
                "meta": json.loads(row.meta),
            }
        except (TypeError, json.JSONDecodeError) as e:
            raise ReportFormatError(f"Unreadable DB1 row {row.id!r}: {e}") from e
        reports.append(report_from_record(record, normalize=False))
    return reports


# =============================================================================
# Output helpers
# =============================================================================


def round_significant(value: Any, digits: int = SIGNIFICANT_DIGITS) -> Any:
    """Round every float in a JSON-ready structure to ``digits`` significant digits."""
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        return float(f"{value:.{digits}g}") if math.isfinite(value) else value
    if isinstance(value, dict):
        return {k: round_significant(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_significant(v, digits) for v in value]
    return value


def outcome_to_record(outcome: EpochOutcome) -> dict:
    """Epoch summary as logged on the epoch stream."""
    return {
        "epoch": outcome.epoch,
        "adopted": int(outcome.adopted) if outcome.adopted is not None else None,
        "q": outcome.q,
        "q_next": outcome.q_next,
        "max_conflicts": list(outcome.max_conflicts),
        "metaconflict": outcome.metaconflict,
        "reclassified": outcome.reclassified,
        "fusion_max_conflict": outcome.fusion_max_conflict,
        "converged": outcome.converged,
    }
