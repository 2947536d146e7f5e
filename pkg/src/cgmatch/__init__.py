"""cgmatch: complete-graph token matching and reduction analysis.

Core pipeline: cosine similarities over token keys, a priority
dependency mask, source selection (optionally guided by cross-token
importance), stack construction, and ensembling. Baselines, closed-form
expectations with Monte Carlo validation, reduction schedules, and an
analytic FLOPs model round out the toolkit. A FastAPI service wraps the
library; the ``cgmatch`` CLI is a thin client for it.
"""

__version__ = "0.1.0"

from .analysis import (
    MatchMethod,
    ReductionReport,
    ScheduleConfig,
    SimulatedMatcher,
    effective_r,
    expectation_bipartite,
    expectation_cgsm,
    halving_schedule,
    layered_reduction_run,
    objective,
    simulate_optimal_match_rate,
    synthetic_tokens,
)
from .baselines import (
    bipartite_soft_match,
    exhaustive_optimal,
    greedy_match,
    kmeans_match,
    random_match,
)
from .bench import run_matching_benchmark, time_complete_graph_match
from .errors import (
    BadMagic,
    CgmatchError,
    DimensionMismatch,
    EmptyInput,
    FileFormatError,
    IndexOutOfRange,
    InstanceTooLarge,
    InvalidSchedule,
    LengthMismatch,
    MissingImportance,
    MissingReference,
    NonFinite,
    ReductionTooLarge,
    TooFewTokens,
    TruncatedPayload,
    UnsupportedOption,
    UnsupportedVersion,
)
from .fileio import (
    parse_csv_tokens,
    parse_embedding_file,
    serialize_embedding_file,
)
from .flops import (
    BranchConfig,
    FlopsReport,
    ModelConfig,
    clip_like_model,
    flops_estimate,
)
from .guidance import (
    AttentionProjection,
    CrossToken,
    InitStrategy,
    LossConfig,
    Modality,
    ProjectionPair,
    attention_reuse_importance,
    cross_importance,
    init_cross_token,
    js_divergence_grad,
    js_divergence_loss,
    total_loss,
)
from .matching import (
    EnsembleMode,
    MatchPlan,
    PriorityMaskedSimilarity,
    ReductionOptions,
    StackSet,
    build_stacks,
    ensemble_stacks,
    priority_mask,
    reduce_tokens,
    select_match_plan,
)
from .numerics import (
    Permutation,
    SimilarityMatrix,
    TokenMatrix,
    cosine_similarity_matrix,
    softmax,
    stable_argsort_desc,
)

__all__ = [
    "__version__",
    "AttentionProjection",
    "BadMagic",
    "BranchConfig",
    "CgmatchError",
    "CrossToken",
    "DimensionMismatch",
    "EmptyInput",
    "EnsembleMode",
    "FileFormatError",
    "FlopsReport",
    "IndexOutOfRange",
    "InitStrategy",
    "InstanceTooLarge",
    "InvalidSchedule",
    "LengthMismatch",
    "LossConfig",
    "MissingImportance",
    "MissingReference",
    "NonFinite",
    "ReductionTooLarge",
    "TooFewTokens",
    "TruncatedPayload",
    "UnsupportedOption",
    "UnsupportedVersion",
    "MatchMethod",
    "MatchPlan",
    "Modality",
    "ModelConfig",
    "Permutation",
    "PriorityMaskedSimilarity",
    "ProjectionPair",
    "ReductionOptions",
    "ReductionReport",
    "ScheduleConfig",
    "SimilarityMatrix",
    "SimulatedMatcher",
    "StackSet",
    "TokenMatrix",
    "attention_reuse_importance",
    "bipartite_soft_match",
    "build_stacks",
    "clip_like_model",
    "cosine_similarity_matrix",
    "cross_importance",
    "effective_r",
    "ensemble_stacks",
    "exhaustive_optimal",
    "expectation_bipartite",
    "expectation_cgsm",
    "flops_estimate",
    "greedy_match",
    "halving_schedule",
    "init_cross_token",
    "js_divergence_grad",
    "js_divergence_loss",
    "kmeans_match",
    "layered_reduction_run",
    "objective",
    "parse_csv_tokens",
    "parse_embedding_file",
    "priority_mask",
    "random_match",
    "reduce_tokens",
    "run_matching_benchmark",
    "select_match_plan",
    "serialize_embedding_file",
    "simulate_optimal_match_rate",
    "softmax",
    "stable_argsort_desc",
    "synthetic_tokens",
    "time_complete_graph_match",
    "total_loss",
]
