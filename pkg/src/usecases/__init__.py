"""Use cases layer - Application business logic orchestration."""

from usecases.triage import summarize, total_uncertainty, aged_uncertainty, rank_select
from usecases.potts_clustering import (
    InteractionMatrix,
    SpinState,
    AnnealResult,
    interactions,
    critical_temperature,
    anneal,
    cluster_conflict,
    metaconflict,
    metaconflict_weight_sum,
    build_partition,
    brute_force_partition,
    energy,
    is_local_minimum,
)
from usecases.prototypes import membership_evidence, credibility, extract_prototypes, classify, classify_batch
from usecases.pipeline import Pipeline, PipelineState, adapt_cluster_count, fuse_subset, anneal_clusterer
from usecases.benchmark import (
    SupportMode,
    CorpusSpec,
    PerformanceReport,
    ScalingRow,
    generate_benchmark,
    witness_partition,
    random_instance,
    gen_corpus,
    performance_report,
    scaling_table,
    compare_with_oracle,
)
from usecases.data_transformers import REPORT_SCHEMA, reports_to_dataframe, dataframe_to_reports

__all__ = [
    # Triage
    "summarize",
    "total_uncertainty",
    "aged_uncertainty",
    "rank_select",
    # Clustering
    "InteractionMatrix",
    "SpinState",
    "AnnealResult",
    "interactions",
    "critical_temperature",
    "anneal",
    "cluster_conflict",
    "metaconflict",
    "metaconflict_weight_sum",
    "build_partition",
    "brute_force_partition",
    "energy",
    "is_local_minimum",
    # Prototypes
    "membership_evidence",
    "credibility",
    "extract_prototypes",
    "classify",
    "classify_batch",
    # Pipeline
    "Pipeline",
    "PipelineState",
    "adapt_cluster_count",
    "fuse_subset",
    "anneal_clusterer",
    # Benchmark
    "SupportMode",
    "CorpusSpec",
    "PerformanceReport",
    "ScalingRow",
    "generate_benchmark",
    "witness_partition",
    "random_instance",
    "gen_corpus",
    "performance_report",
    "scaling_table",
    "compare_with_oracle",
    # Storage
    "REPORT_SCHEMA",
    "reports_to_dataframe",
    "dataframe_to_reports",
]
