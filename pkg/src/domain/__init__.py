"""Domain layer - Pure evidence entities, errors and Dempster-Shafer algebra."""

from domain.models import (
    # Frames & mass functions
    Frame,
    Subset,
    MassFunction,
    SimpleSupport,
    Report,
    # Clustering
    Partition,
    # Classification
    MembershipEvidence,
    Credibility,
    PrototypeCluster,
    PrototypeTable,
    ClassificationResult,
    Verdict,
    # Pipeline
    Adoption,
    FusionStub,
    RoutingDecision,
    EpochOutcome,
)
from domain.evidence import (
    make_mass_function,
    vacuous,
    simple_support_mass,
    pairwise_conflict,
    combine_dempster,
    combine_all,
    plausibility,
    weight_of_conflict,
)

__all__ = [
    # Frames & mass functions
    "Frame",
    "Subset",
    "MassFunction",
    "SimpleSupport",
    "Report",
    # Clustering
    "Partition",
    # Classification
    "MembershipEvidence",
    "Credibility",
    "PrototypeCluster",
    "PrototypeTable",
    "ClassificationResult",
    "Verdict",
    # Pipeline
    "Adoption",
    "FusionStub",
    "RoutingDecision",
    "EpochOutcome",
    # Algebra
    "make_mass_function",
    "vacuous",
    "simple_support_mass",
    "pairwise_conflict",
    "combine_dempster",
    "combine_all",
    "plausibility",
    "weight_of_conflict",
]
