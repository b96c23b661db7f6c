"""
Pipeline Use Case.

This use case orchestrates the whole intelligence flow:
1. Ingestion: summarize each report, store it in DB1 and classify it at once
   against the current prototype table (fusing it into its subset)
2. Clustering epochs: rank DB1 into DB2, cluster DB2 twice in parallel (q and
   q - 1 subsets), adopt one result and adapt q for the next epoch
3. Refresh: rebuild the prototype table, reroute every report and rebuild the
   per-subset fusion stubs
4. Snapshots: persist DB1 and the pipeline state through SnapshotStoragePort

The use case has no knowledge of how snapshots are stored or where records
come from; it only knows about domain models, ports and transformers.

Ingestion never waits for clustering: the two clusterings run in worker
threads on immutable inputs and the new state is swapped in under a short
lock once both are done.
"""

import asyncio
import json
import logging
import threading
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field, replace
from typing import Any, Optional

from config.loader import AnnealParams, Config
from domain.errors import (
    DuplicateReport,
    EmptyInput,
    EvidenceError,
    FrameMismatch,
    NoConvergence,
    TooFewReports,
    TotalConflict,
)
from domain.evidence import combine_dempster
from domain.models import (
    Adoption,
    EpochOutcome,
    FusionStub,
    MassFunction,
    Partition,
    PrototypeTable,
    Report,
    RoutingDecision,
    Verdict,
)
from ports.record_stream import RecordSinkPort
from ports.snapshot_storage import SchemaVersionMismatch, SnapshotStoragePort
from usecases.data_transformers import (
    REPORT_SCHEMA,
    PartitionRecord,
    dataframe_to_reports,
    mass_from_record,
    mass_to_record,
    outcome_to_record,
    partition_to_record,
    report_from_record,
    reports_to_dataframe,
    round_significant,
    routing_from_record,
    routing_to_record,
    table_from_record,
    table_to_record,
)
from usecases.potts_clustering import CONFLICT_CLAMP, anneal, build_partition, interactions
from usecases.prototypes import classify, extract_prototypes
from usecases.triage import rank_select, summarize

logger = logging.getLogger(__name__)
epoch_logger = logging.getLogger("intel_prefusion.epochs")

SNAPSHOT_SCHEMA_VERSION = 1
DB1_FILE = "db1.parquet"
STATE_FILE = "state.json"

Clusterer = Callable[[Sequence[Report], AnnealParams], Partition]


# =============================================================================
# Pure building blocks
# =============================================================================


def anneal_clusterer(reports: Sequence[Report], params: AnnealParams) -> Partition:
    """
    Default clusterer: Potts mean-field annealing.

    Raises:
        NoConvergence: the spins never saturated (carries the partial result).
    """
    if len(reports) < 2:
        return build_partition(reports, [0] * len(reports), params.cluster_count)
    return anneal(interactions(reports), params).raise_for_convergence().partition


def adapt_cluster_count(max_c1: float, max_c2: Optional[float], threshold: float, q: int) -> tuple[Adoption, int]:
    """
    Choose between the two clusterings of an epoch and the next q.

    The q - 1 clustering wins as soon as its largest subset conflict is
    below the threshold. Otherwise the q clustering is used, and q grows
    when even that one has a subset above the threshold.

    Args:
        max_c1: Largest subset conflict with q subsets.
        max_c2: Largest subset conflict with q - 1 subsets, None if not run.
        threshold: Conflict threshold.
        q: Current number of subsets.

    Returns:
        (adopted clustering, q for the next epoch).
    """
    if max_c2 is not None and max_c2 < threshold:
        return Adoption.ONE_FEWER, q - 1
    if max_c1 > threshold:
        return Adoption.SAME_COUNT, q + 1
    return Adoption.SAME_COUNT, q


def _fold(mass: Optional[MassFunction], conflict: float, report: Report) -> tuple[MassFunction, float, bool]:
    """Fuse one more report into a running combination; False when it was totally conflicting."""
    if mass is None:
        return report.mass, conflict, True
    try:
        fused, k = combine_dempster(mass, report.mass)
    except TotalConflict:
        logger.warning("Report %s totally conflicts with its subset, left out of the fusion", report.id)
        return mass, CONFLICT_CLAMP, False
    return fused, min(1.0 - (1.0 - conflict) * (1.0 - k), CONFLICT_CLAMP), True


def fuse_subset(reports: Sequence[Report]) -> tuple[MassFunction, float]:
    """
    Dempster combination of a subset with its running conflict.

    Reports that would make the combination undefined are left out and the
    conflict is reported as 1 - 1e-12.

    Raises:
        EmptyInput: no report.
    """
    if not reports:
        raise EmptyInput("Nothing to fuse")
    mass, conflict = None, 0.0
    for report in reports:
        mass, conflict, _ = _fold(mass, conflict, report)
    return mass, conflict


# =============================================================================
# State
# =============================================================================


@dataclass
class PipelineState:
    """
    Everything the pipeline knows.

    ``db1`` keeps insertion order; ``db2`` holds the ids selected for the
    last clustering, best ranked first. ``pending`` counts reports ingested
    since the last epoch.
    """

    q: int
    seed: int
    db1: dict[str, Report] = field(default_factory=dict)
    db2: tuple[str, ...] = ()
    table: Optional[PrototypeTable] = None
    fusion: tuple[FusionStub, ...] = ()
    routing: dict[str, RoutingDecision] = field(default_factory=dict)
    epoch: int = 0
    last_clustering: Optional[Partition] = None
    pending: int = 0


# =============================================================================
# Use case
# =============================================================================


class Pipeline:
    """
    Use case running the ingest / classify / cluster / refresh loop.

    One orchestrator owns the state; classification reads the current
    prototype table, which is only ever replaced as a whole.
    """

    def __init__(
        self,
        config: Config,
        clusterer: Clusterer = anneal_clusterer,
        state: Optional[PipelineState] = None,
    ):
        """
        Initialize the pipeline.

        Args:
            config: Application configuration.
            clusterer: Function partitioning reports into ``params.cluster_count`` subsets.
            state: State to resume from; a fresh state by default.
        """
        self._config = config
        self._clusterer = clusterer
        self._state = state or PipelineState(q=config.pipeline.initial_q, seed=config.pipeline.seed)
        self._lock = threading.Lock()
        self._epoch_lock = asyncio.Lock()
        self._rerouted: tuple[RoutingDecision, ...] = ()

    @property
    def state(self) -> PipelineState:
        return self._state

    @property
    def table(self) -> Optional[PrototypeTable]:
        return self._state.table

    @property
    def epoch_due(self) -> bool:
        return self._state.pending >= self._config.pipeline.epoch_every

    @property
    def rerouted(self) -> tuple[RoutingDecision, ...]:
        """Decisions changed by the last epoch."""
        return self._rerouted

    def routing_of(self, report_id: str) -> Optional[RoutingDecision]:
        return self._state.routing.get(report_id)

    def fusion_conflicts(self) -> tuple[float, ...]:
        """Running conflict of every fusion stub; a steady rise flags subsets worth re-examining."""
        return tuple(stub.conflict for stub in self._state.fusion)

    # -------------------------------------------------------------------------
    # Ingestion
    # -------------------------------------------------------------------------

    def _route(self, report: Report, table: Optional[PrototypeTable]) -> RoutingDecision:
        if table is None or not table.active_clusters:
            return RoutingDecision(report.id, Verdict.DEFERRED)
        result = classify(report, table)
        return RoutingDecision(report.id, result.verdict, result.cluster, result)

    def ingest(self, report: Report) -> RoutingDecision:
        """
        Summarize, store and classify one report.

        Returns:
            The routing decision; DEFERRED until a first epoch built a table.

        Raises:
            DuplicateReport: the id is already in DB1.
            FrameMismatch: the report uses another frame than DB1.
        """
        filtered = replace(report, mass=summarize(report.mass, self._config.filter))
        with self._lock:
            state = self._state
            if filtered.id in state.db1:
                raise DuplicateReport(f"Report {filtered.id} was already ingested")
            if state.db1:
                first = next(iter(state.db1.values()))
                if not first.frame.same_as(filtered.frame):
                    raise FrameMismatch(f"Report {filtered.id} uses another frame than DB1")
            decision = self._route(filtered, state.table)

            state.db1[filtered.id] = filtered
            state.routing[filtered.id] = decision
            state.pending += 1
            if decision.verdict is Verdict.ASSIGNED and decision.cluster < len(state.fusion):
                stub = state.fusion[decision.cluster]
                mass, conflict, fused = _fold(stub.mass, stub.conflict, filtered)
                if fused:
                    stubs = list(state.fusion)
                    stubs[decision.cluster] = FusionStub(stub.cluster, stub.report_ids + (filtered.id,), mass, conflict)
                    state.fusion = tuple(stubs)
        return decision

    def ingest_record(self, obj: Any) -> RoutingDecision:
        """Parse and ingest one JSON record; nothing changes when it is invalid."""
        return self.ingest(report_from_record(obj))

    # -------------------------------------------------------------------------
    # Clustering epochs
    # -------------------------------------------------------------------------

    def _rebuild_fusion(self, routing: dict[str, RoutingDecision], db1: dict[str, Report], cluster_count: int) -> tuple[FusionStub, ...]:
        members: list[list[Report]] = [[] for _ in range(cluster_count)]
        for report_id, report in db1.items():
            decision = routing.get(report_id)
            if decision is not None and decision.verdict is Verdict.ASSIGNED:
                members[decision.cluster].append(report)

        stubs = []
        for cluster, reports in enumerate(members):
            mass, conflict, fused_ids = None, 0.0, []
            for report in reports:
                mass, conflict, fused = _fold(mass, conflict, report)
                if fused:
                    fused_ids.append(report.id)
            stubs.append(FusionStub(cluster, tuple(fused_ids), mass, conflict))
        return tuple(stubs)

    async def _cluster(self, reports: Sequence[Report], q: int, seed: int) -> list[Any]:
        anneal_config = self._config.anneal
        jobs = [asyncio.to_thread(self._clusterer, reports, anneal_config.for_clusters(q, seed=seed))]
        if q - 1 >= 1:
            jobs.append(asyncio.to_thread(self._clusterer, reports, anneal_config.for_clusters(q - 1, seed=seed)))
        return await asyncio.gather(*jobs, return_exceptions=True)

    def _emit(self, outcome: EpochOutcome) -> EpochOutcome:
        epoch_logger.info(json.dumps(round_significant(outcome_to_record(outcome))))
        return outcome

    async def run_epoch(self) -> EpochOutcome:
        """
        Run one clustering epoch.

        DB2 is re-ranked from DB1 (the newest DB1 timestamp is "now"), then
        clustered with q and q - 1 subsets; epoch e anneals with seed + e.
        Reports of DB2 are routed by the adopted partition, every other
        report, including those ingested while clustering ran, by the new
        prototype table.

        Returns:
            EpochOutcome; ``converged`` is False when a clustering failed to
            converge, in which case the previous table is kept.

        Raises:
            TooFewReports: DB1 holds fewer than two reports.
        """
        async with self._epoch_lock:
            with self._lock:
                state = self._state
                reports = list(state.db1.values())
                q, epoch = state.q, state.epoch + 1
                cutoff = state.pending
            if len(reports) < 2:
                raise TooFewReports(f"An epoch needs at least 2 reports, DB1 holds {len(reports)}")

            now = max(r.timestamp for r in reports)
            db2 = rank_select(reports, now, self._config.ranking)
            results = await self._cluster(db2, q, state.seed + epoch)

            for result in results:
                if isinstance(result, BaseException) and not isinstance(result, NoConvergence):
                    raise result
            if any(isinstance(result, NoConvergence) for result in results):
                return self._emit(self._failed_epoch(epoch, q, results, cutoff))

            pdsc1 = results[0]
            pdsc2 = results[1] if len(results) > 1 else None
            threshold = self._config.pipeline.conflict_threshold
            adopted, q_next = adapt_cluster_count(pdsc1.max_conflict, pdsc2.max_conflict if pdsc2 else None, threshold, q)
            partition = pdsc1 if adopted is Adoption.SAME_COUNT else pdsc2
            if q_next == 1:
                logger.warning("Epoch %d: q is down to 1, every report now shares a single subset", epoch)

            store = {r.id: r for r in reports}
            classifier = self._config.classifier
            table = extract_prototypes(partition, store, classifier.proto_count, classifier.threshold)

            with self._lock:
                state = self._state
                routing: dict[str, RoutingDecision] = {
                    rid: RoutingDecision(rid, Verdict.ASSIGNED, cluster) for rid, cluster in zip(partition.report_ids, partition.assignment)
                }
                for rid, report in state.db1.items():
                    if rid not in routing:
                        routing[rid] = self._route(report, table)

                rerouted = tuple(d for rid, d in routing.items() if _changed(state.routing.get(rid), d))
                fusion = self._rebuild_fusion(routing, state.db1, partition.cluster_count)
                self._state = replace(
                    state,
                    db2=tuple(r.id for r in db2),
                    table=table,
                    fusion=fusion,
                    routing=routing,
                    q=q_next,
                    epoch=epoch,
                    last_clustering=partition,
                    pending=state.pending - cutoff,
                )
                self._rerouted = rerouted

        outcome = EpochOutcome(
            epoch=epoch,
            adopted=adopted,
            q=q,
            q_next=q_next,
            max_conflicts=(pdsc1.max_conflict, pdsc2.max_conflict if pdsc2 else None),
            metaconflict=partition.metaconflict,
            reclassified=len(rerouted),
            converged=True,
            fusion_max_conflict=max((stub.conflict for stub in fusion), default=0.0),
        )
        logger.info(
            "Epoch %d adopted clustering %d with %d subsets, next q=%d, %d reports rerouted",
            epoch,
            int(adopted),
            partition.cluster_count,
            q_next,
            len(rerouted),
        )
        return self._emit(outcome)

    def _failed_epoch(self, epoch: int, q: int, results: list[Any], cutoff: int) -> EpochOutcome:
        partials: list[Optional[Partition]] = []
        for result in results:
            if isinstance(result, NoConvergence):
                partials.append(result.result.partition if result.result is not None else None)
            else:
                partials.append(result)
        partials += [None] * (2 - len(partials))
        logger.warning("Epoch %d: clustering did not converge, keeping the previous table", epoch)

        with self._lock:
            self._state = replace(self._state, epoch=epoch, pending=self._state.pending - cutoff)
            self._rerouted = ()
        return EpochOutcome(
            epoch=epoch,
            adopted=None,
            q=q,
            q_next=q,
            max_conflicts=tuple(p.max_conflict if p is not None else None for p in partials),
            metaconflict=partials[0].metaconflict if partials[0] is not None else None,
            reclassified=0,
            converged=False,
            fusion_max_conflict=max(self.fusion_conflicts(), default=0.0),
        )

    async def run(self, records: Iterable[Any], sink: RecordSinkPort, final_epoch: bool = True) -> list[EpochOutcome]:
        """
        Stream records through the pipeline.

        Every record yields one routing line; invalid records yield an error
        line and leave the state untouched. An epoch runs whenever
        ``epoch_every`` reports were ingested since the last one, and once
        more at the end of the stream when reports are pending.

        Epochs are awaited in stream order, so routing output pauses while
        one runs and replays stay deterministic. Callers that need ingestion
        to continue during clustering schedule ``run_epoch`` as a task.
        """
        outcomes = []
        for obj in records:
            try:
                decision = self.ingest_record(obj)
            except EvidenceError as e:
                logger.warning("Record rejected: %s", e)
                report_id = obj.get("id") if isinstance(obj, dict) else None
                sink.write({"id": report_id, "error": type(e).__name__, "message": str(e)})
                continue
            sink.write(round_significant(routing_to_record(decision)))
            if self.epoch_due:
                outcomes.extend(await self._run_epoch_into(sink))
        if final_epoch and self._state.pending:
            outcomes.extend(await self._run_epoch_into(sink))
        return outcomes

    async def _run_epoch_into(self, sink: RecordSinkPort) -> list[EpochOutcome]:
        try:
            outcome = await self.run_epoch()
        except TooFewReports as e:
            logger.debug("Epoch skipped: %s", e)
            return []
        for decision in self._rerouted:
            record = routing_to_record(decision)
            record["epoch"] = outcome.epoch
            sink.write(round_significant(record))
        return [outcome]

    # -------------------------------------------------------------------------
    # Snapshots
    # -------------------------------------------------------------------------

    def snapshot(self, storage: SnapshotStoragePort) -> str:
        """
        Persist DB1 as Parquet and the rest of the state as JSON.

        DB1 is written first; the state document, written last, lists the
        DB1 ids it expects so a torn snapshot is detected on restore.
        """
        with self._lock:
            state = self._state
            reports = list(state.db1.values())
            document = {
                "schema_version": SNAPSHOT_SCHEMA_VERSION,
                "q": state.q,
                "seed": state.seed,
                "epoch": state.epoch,
                "pending": state.pending,
                "db1_ids": [r.id for r in reports],
                "db2": list(state.db2),
                "routing": [routing_to_record(d) for d in state.routing.values()],
                "table": table_to_record(state.table) if state.table is not None else None,
                "fusion": [
                    {
                        "cluster": stub.cluster,
                        "report_ids": list(stub.report_ids),
                        "mass": mass_to_record(stub.mass) if stub.mass is not None else None,
                        "conflict": stub.conflict,
                    }
                    for stub in state.fusion
                ],
                "last_clustering": partition_to_record(state.last_clustering) if state.last_clustering is not None else None,
            }
        storage.write_table(reports_to_dataframe(reports), DB1_FILE, schema=REPORT_SCHEMA)
        path = storage.write_document(document, STATE_FILE)
        logger.info("Snapshot of %d reports written to %s", len(reports), storage.base_path)
        return path

    @classmethod
    def restore(cls, storage: SnapshotStoragePort, config: Config, clusterer: Clusterer = anneal_clusterer) -> "Pipeline":
        """
        Rebuild a pipeline from a snapshot.

        Raises:
            StorageError: the snapshot files are missing.
            SchemaVersionMismatch: wrong version or any decoding failure; no
                partial state is ever returned.
        """
        document = storage.read_document(STATE_FILE)
        version = document.get("schema_version")
        if version != SNAPSHOT_SCHEMA_VERSION:
            raise SchemaVersionMismatch(f"Snapshot schema version {version!r}, expected {SNAPSHOT_SCHEMA_VERSION}")
        df = storage.read_table(DB1_FILE, schema=REPORT_SCHEMA)
        try:
            state = _decode_state(document, dataframe_to_reports(df))
        except (EvidenceError, KeyError, TypeError, ValueError) as e:
            raise SchemaVersionMismatch(f"Corrupted snapshot in {storage.base_path}: {e}") from e
        logger.info("Restored %d reports at epoch %d", len(state.db1), state.epoch)
        return cls(config, clusterer, state)


def _changed(before: Optional[RoutingDecision], after: RoutingDecision) -> bool:
    return before is None or (before.verdict, before.cluster) != (after.verdict, after.cluster)


def _decode_state(document: dict, reports: list[Report]) -> PipelineState:
    db1 = {r.id: r for r in reports}
    if list(db1) != document["db1_ids"]:
        raise ValueError("DB1 does not hold the reports listed in the state document")

    fusion = tuple(
        FusionStub(
            cluster=int(stub["cluster"]),
            report_ids=tuple(stub["report_ids"]),
            mass=mass_from_record(stub["mass"], normalize=False) if stub["mass"] is not None else None,
            conflict=float(stub["conflict"]),
        )
        for stub in document["fusion"]
    )
    last = None
    if document["last_clustering"] is not None:
        record = PartitionRecord.model_validate(document["last_clustering"])
        last = Partition(
            report_ids=tuple(record.report_ids),
            assignment=tuple(record.assignment),
            cluster_count=record.cluster_count,
            cluster_conflicts=tuple(record.cluster_conflicts),
            metaconflict=record.metaconflict,
            clamped=record.clamped,
        )
    routing = {}
    for obj in document["routing"]:
        decision = routing_from_record(obj)
        routing[decision.report_id] = decision

    return PipelineState(
        q=int(document["q"]),
        seed=int(document["seed"]),
        db1=db1,
        db2=tuple(document["db2"]),
        table=table_from_record(document["table"]) if document["table"] is not None else None,
        fusion=fusion,
        routing=routing,
        epoch=int(document["epoch"]),
        last_clustering=last,
        pending=int(document["pending"]),
    )
