"""
Command line interface.

Subcommands:
    bench           Benchmark scaling study on the 2^K - 1 report problem
    oracle-compare  Annealing against exhaustive search on random instances
    gen-corpus      Synthetic multi-event report corpus (NDJSON)
    cluster         Cluster an NDJSON report file into K subsets
    prototypes      Build a prototype table from a partition
    classify        Classify reports against a prototype table
    pipeline run    Stream reports through the full pipeline

Exit codes: 0 success, 1 validation error, 2 no convergence, 3 I/O error.
"""

import argparse
import asyncio
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Optional

import pandas as pd
from pydantic import ValidationError

from adapters.ndjson import NdjsonRecordSink, NdjsonRecordSource
from adapters.storage import LocalSnapshotStore
from config.loader import AnnealConfig, Config
from domain.errors import EvidenceError, NoConvergence, UnknownReport
from domain.models import Report
from ports.snapshot_storage import StorageError
from usecases.benchmark import (
    LARGE_K,
    REFERENCE_ROW,
    CorpusSpec,
    SupportMode,
    compare_with_oracle,
    gen_corpus,
    scaling_ratios,
    scaling_table,
)
from usecases.data_transformers import (
    partition_from_record,
    partition_to_record,
    report_from_record,
    report_to_record,
    result_to_record,
    round_significant,
    table_from_record,
    table_to_record,
)
from usecases.pipeline import STATE_FILE, Pipeline
from usecases.potts_clustering import anneal, build_partition, interactions
from usecases.prototypes import classify_batch, extract_prototypes

logger = logging.getLogger("intel_prefusion")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NO_CONVERGENCE = 2
EXIT_IO = 3


# =============================================================================
# Helpers
# =============================================================================


def _setup_logging(level: str, epoch_log: Optional[Path]) -> None:
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )
    epochs = logging.getLogger("intel_prefusion.epochs")
    epochs.handlers.clear()
    handler = logging.FileHandler(epoch_log, encoding="utf-8") if epoch_log else logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    epochs.addHandler(handler)
    epochs.setLevel(logging.INFO)
    epochs.propagate = False


def _seed(args: argparse.Namespace, default: int) -> int:
    return args.seed if args.seed is not None else default


def _anneal_config(args: argparse.Namespace, config: Config) -> AnnealConfig:
    overrides = {
        key: getattr(args, key)
        for key in ("gamma", "alpha", "tau", "epsilon", "max_outer")
        if getattr(args, key, None) is not None
    }
    return AnnealConfig(**{**config.anneal.model_dump(), **overrides})


def _read_reports(path: str) -> list[Report]:
    return [report_from_record(record) for _, record in NdjsonRecordSource(path)]


def _read_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise StorageError(f"Cannot read {path}: {e}")
    except json.JSONDecodeError as e:
        raise EvidenceError(f"{path} is not valid JSON: {e}")


def _write_document(args: argparse.Namespace, document: dict, text: Optional[str] = None) -> None:
    """Write a JSON document, or its text rendering, to --output."""
    body = text if args.format == "text" and text is not None else json.dumps(document, indent=2, allow_nan=False)
    if args.output == "-":
        sys.stdout.write(body + "\n")
        return
    try:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(body + "\n", encoding="utf-8")
    except OSError as e:
        raise StorageError(f"Cannot write {args.output}: {e}")


# =============================================================================
# Commands
# =============================================================================


def _parse_k_range(text: str) -> list[int]:
    low, sep, high = text.partition("..")
    try:
        return list(range(int(low), int(high) + 1)) if sep else [int(low)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected K or LOW..HIGH, got {text!r}")


def cmd_bench(args: argparse.Namespace, config: Config) -> int:
    k_values = args.k
    if max(k_values) >= LARGE_K:
        if not args.allow_large:
            logger.error("K >= %d needs --allow-large", LARGE_K)
            return EXIT_VALIDATION
        logger.warning("Running K >= %d: expect long runtimes and widely fluctuating results", LARGE_K)

    anneal_config = _anneal_config(args, config)
    rows = scaling_table(k_values, args.runs, _seed(args, anneal_config.seed), anneal_config, SupportMode.parse(args.support))
    document = round_significant(
        {
            "support": args.support,
            "rows": [{"K": row.K, "N": row.N, **asdict(row.performance)} for row in rows],
            "ratios": [{**asdict(ratio), "within_bound": ratio.within_bound} for ratio in scaling_ratios(rows)],
            "reference": REFERENCE_ROW,
        }
    )

    # Text is rendered from the JSON document only.
    text = "\n\n".join(
        [
            pd.DataFrame(document["rows"]).to_string(index=False),
            pd.DataFrame(document["ratios"]).to_string(index=False) if document["ratios"] else "(no ratio)",
            "reference (not run): " + ", ".join(f"{k}={v}" for k, v in document["reference"].items()),
        ]
    )
    _write_document(args, document, text)
    return EXIT_OK


def cmd_oracle_compare(args: argparse.Namespace, config: Config) -> int:
    anneal_config = _anneal_config(args, config)
    summary = compare_with_oracle(args.n, args.q, args.instances, _seed(args, anneal_config.seed), anneal_config, args.frame_size)
    document = round_significant(
        {
            "n": summary.n,
            "q": summary.q,
            "instances": [{**asdict(c), "gap": c.gap, "match": c.match} for c in summary.comparisons],
            "match_rate": summary.match_rate,
            "negative_gaps": summary.negative_gaps,
        }
    )
    text = pd.DataFrame(document["instances"]).to_string(index=False) + f"\n\nmatch rate {document['match_rate']}, negative gaps {document['negative_gaps']}"
    _write_document(args, document, text)
    return EXIT_OK


def cmd_gen_corpus(args: argparse.Namespace, config: Config) -> int:
    spec = CorpusSpec(frame_size=args.frame_size, count=args.count, events=args.events, noise=args.noise, seed=_seed(args, 0))
    with NdjsonRecordSink(args.output) as sink:
        for report in gen_corpus(spec, SupportMode.parse(args.support)):
            sink.write(report_to_record(report))
    return EXIT_OK


def cmd_cluster(args: argparse.Namespace, config: Config) -> int:
    reports = _read_reports(args.input)
    params = _anneal_config(args, config).for_clusters(args.k, seed=args.seed)
    result = anneal(interactions(reports), params)
    document = {
        **partition_to_record(result.partition),
        "steps": {"outer": result.state.outer_steps, "inner": result.state.inner_steps},
        "critical_temperature": result.critical_temperature,
        "runtime_ms": result.runtime_ms,
        "converged": result.converged,
    }
    _write_document(args, round_significant(document))
    result.raise_for_convergence()
    return EXIT_OK


def cmd_prototypes(args: argparse.Namespace, config: Config) -> int:
    record = partition_from_record(_read_json(args.partition))
    store = {r.id: r for r in _read_reports(args.input)}
    missing = [rid for rid in record.report_ids if rid not in store]
    if missing:
        raise UnknownReport(f"Partition references reports missing from {args.input}: {missing[:5]}")
    partition = build_partition([store[rid] for rid in record.report_ids], record.assignment, record.cluster_count)
    proto_count = args.n if args.n is not None else config.classifier.proto_count
    threshold = args.threshold if args.threshold is not None else config.classifier.threshold
    table = extract_prototypes(partition, store, proto_count, threshold)
    # Full precision: the table is read back by ``classify``.
    _write_document(args, table_to_record(table))
    return EXIT_OK


def cmd_classify(args: argparse.Namespace, config: Config) -> int:
    table = table_from_record(_read_json(args.table))
    if args.threshold is not None:
        table = replace(table, threshold=args.threshold)
    reports = _read_reports(args.input)
    with NdjsonRecordSink(args.output) as sink:
        for report, result in zip(reports, classify_batch(reports, table)):
            sink.write(round_significant(result_to_record(report.id, result)))
    return EXIT_OK


def _section(section: Any, **overrides: Any) -> Any:
    """Rebuild a config section with the given non-None overrides, re-validating it."""
    values = {key: value for key, value in overrides.items() if value is not None}
    return type(section)(**{**section.model_dump(), **values})


def cmd_pipeline_run(args: argparse.Namespace, config: Config) -> int:
    config = config.model_copy(
        update={
            "filter": _section(config.filter, p0=args.p0),
            "ranking": _section(config.ranking, capacity=args.db2_capacity, aging_rate=args.aging_rate),
            "pipeline": _section(config.pipeline, seed=_seed(args, config.pipeline.seed), epoch_every=args.epoch_every),
        }
    )

    snapshot_dir = args.snapshot or config.storage.snapshot_directory
    storage = LocalSnapshotStore(snapshot_dir) if snapshot_dir else None
    if storage is not None and storage.exists(STATE_FILE):
        pipeline = Pipeline.restore(storage, config)
    else:
        pipeline = Pipeline(config)

    records = (record for _, record in NdjsonRecordSource(args.input, strict=False))
    with NdjsonRecordSink(args.output) as sink:
        outcomes = asyncio.run(pipeline.run(records, sink))
    if storage is not None:
        pipeline.snapshot(storage)
    if any(not outcome.converged for outcome in outcomes):
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


# =============================================================================
# Parser
# =============================================================================


def _anneal_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("annealing (defaults from the [anneal] config section)")
    group.add_argument("--gamma", type=float, help="Self-coupling (default 0.5)")
    group.add_argument("--alpha", type=float, help="Balance term (default: per-K table)")
    group.add_argument("--tau", type=float, help="Cooling factor (default 0.9)")
    group.add_argument("--epsilon", type=float, help="Noise amplitude (default 0.001)")
    group.add_argument("--max-outer", type=int, dest="max_outer", help="Cap on temperature steps (default 1000)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="TOML configuration file (default: config.toml)")
    common.add_argument("--seed", type=int, help="Random seed (mandatory when CI is set)")
    common.add_argument("--output", type=str, default="-", help="Output path, - for stdout (default: -)")
    common.add_argument("--format", choices=("json", "text"), default="json", help="Output format (default: json)")
    common.add_argument("--log-level", type=str, dest="log_level", help="Log level (default from [logging])")

    parser = argparse.ArgumentParser(
        prog="intel-prefusion",
        description="Conflict-driven clustering and classification of uncertain intelligence reports",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    bench = commands.add_parser("bench", parents=[common], help="Scaling study on the 2^K - 1 report problem")
    bench.add_argument("--k", type=_parse_k_range, default=[2, 3, 4, 5, 6], help="K or LOW..HIGH (default: 2..6)")
    bench.add_argument("--runs", type=int, default=5, help="Seeded runs per K (default: 5)")
    bench.add_argument("--support", default="range:0.1,0.9", help="fixed:<v> or range:<lo>,<hi> (default: range:0.1,0.9)")
    bench.add_argument("--allow-large", action="store_true", dest="allow_large", help=f"Allow K >= {LARGE_K}")
    _anneal_options(bench)
    bench.set_defaults(handler=cmd_bench, needs_seed=True)

    oracle = commands.add_parser("oracle-compare", parents=[common], help="Annealing against exhaustive search")
    oracle.add_argument("--n", type=int, default=8, help="Reports per instance (default: 8)")
    oracle.add_argument("--q", type=int, default=3, help="Number of subsets (default: 3)")
    oracle.add_argument("--instances", type=int, default=50, help="Seeded instances (default: 50)")
    oracle.add_argument("--frame-size", type=int, default=4, dest="frame_size", help="Frame size (default: 4)")
    _anneal_options(oracle)
    oracle.set_defaults(handler=cmd_oracle_compare, needs_seed=True)

    corpus = commands.add_parser("gen-corpus", parents=[common], help="Synthetic multi-event NDJSON corpus")
    corpus.add_argument("--frame-size", type=int, default=8, dest="frame_size", help="Frame size (default: 8)")
    corpus.add_argument("--count", type=int, default=100, help="Number of reports (default: 100)")
    corpus.add_argument("--events", type=int, default=2, help="Ground-truth events (default: 2)")
    corpus.add_argument("--noise", type=float, default=0.0, help="Probability of a random focus (default: 0)")
    corpus.add_argument("--support", default="range:0.1,0.9", help="fixed:<v> or range:<lo>,<hi> (default: range:0.1,0.9)")
    corpus.set_defaults(handler=cmd_gen_corpus, needs_seed=True)

    cluster = commands.add_parser("cluster", parents=[common], help="Cluster reports into K subsets")
    cluster.add_argument("--input", required=True, help="NDJSON reports, - for stdin")
    cluster.add_argument("--k", type=int, required=True, help="Number of subsets")
    _anneal_options(cluster)
    cluster.set_defaults(handler=cmd_cluster, needs_seed=True)

    prototypes = commands.add_parser("prototypes", parents=[common], help="Build a prototype table")
    prototypes.add_argument("--partition", required=True, help="Partition JSON from the cluster command")
    prototypes.add_argument("--input", required=True, help="NDJSON reports of the partition")
    prototypes.add_argument("--n", type=int, help="Prototypes per subset (default from [classifier], 3)")
    prototypes.add_argument("--threshold", type=float, help="Rejection threshold (default from [classifier], 0.5)")
    prototypes.set_defaults(handler=cmd_prototypes, needs_seed=False)

    classify = commands.add_parser("classify", parents=[common], help="Classify reports against a prototype table")
    classify.add_argument("--table", required=True, help="Prototype table JSON")
    classify.add_argument("--input", required=True, help="NDJSON reports, - for stdin")
    classify.add_argument("--threshold", type=float, help="Override the table's rejection threshold")
    classify.set_defaults(handler=cmd_classify, needs_seed=False)

    pipeline = commands.add_parser("pipeline", help="End-to-end pipeline")
    pipeline_commands = pipeline.add_subparsers(dest="pipeline_command", required=True)
    run = pipeline_commands.add_parser(
        "run",
        parents=[common],
        help="Stream NDJSON reports through the pipeline",
        description=(
            "Routing decisions go to --output as NDJSON, epoch summaries to stderr or [logging] epoch_log. "
            "Defaults: filter p0=0.01, ranking capacity=256, conflict_threshold=0.2, initial_q=2, "
            "proto_count=3, threshold=0.5, epoch_every=64."
        ),
    )
    run.add_argument("--input", required=True, help="NDJSON reports, - for stdin")
    run.add_argument("--epoch-every", type=int, dest="epoch_every", help="Reports between clustering epochs (default 64)")
    run.add_argument("--snapshot", type=str, help="Snapshot directory, restored from when it holds a snapshot")
    run.add_argument("--p0", type=float, help="Summarization threshold (default 0.01)")
    run.add_argument("--db2-capacity", type=int, dest="db2_capacity", help="Reports admitted to clustering (default 256)")
    run.add_argument("--aging-rate", type=float, dest="aging_rate", help="Per-second uncertainty aging, 0 disables (default 0)")
    run.set_defaults(handler=cmd_pipeline_run, needs_seed=True)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """
    Main entry point.

    Returns:
        Exit code.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if os.environ.get("CI") and args.needs_seed and args.seed is None:
            parser.error("--seed is mandatory when CI is set")
    except SystemExit as e:
        # argparse exits with 2 on usage errors, which is reserved here.
        return EXIT_OK if e.code in (0, None) else EXIT_VALIDATION

    try:
        config = Config.load(args.config)
        _setup_logging(args.log_level.upper() if args.log_level else config.logging.level, config.logging.epoch_log)
        return args.handler(args, config)
    except NoConvergence as e:
        logger.error("%s", e)
        return EXIT_NO_CONVERGENCE
    except (EvidenceError, ValidationError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_VALIDATION
    except (StorageError, OSError) as e:
        logger.error("I/O error: %s", e)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
