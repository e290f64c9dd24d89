"""Hypothesis clustering and merging for multi-talker ASR post-processing.

Turns redundant speaker-token-conditioned recognition hypotheses into a
final set of per-speaker transcriptions with an automatically determined
speaker count, plus the speaker-tokenization, evaluation, and synthetic
corpus tooling to verify the pipeline end to end.
"""

from .clustering import (
    Hypothesis,
    HypothesisClustering,
    MergeStep,
    ahc_threshold,
    cluster_fixed_k,
    clustering_diagnostics,
    pairwise_matrix,
)
from .errors import DataError, ValidationError
from .merging import (
    ConfusionNetwork,
    MergedOutput,
    MergedTranscription,
    Slot,
    build_confusion_network,
    merge_clusters,
    rover_vote,
    simple_vote,
)
from .pipeline import (
    CountReport,
    FileProvider,
    HypothesisProvider,
    Reference,
    ReferenceSet,
    TokenDistribution,
    WerEntry,
    WerReport,
    count_accuracy,
    format_count_table,
    run_hcm,
    run_hcm_detailed,
    score_wer,
    select_candidates,
)
from .simulate import (
    SimConfig,
    SimCorpus,
    SyntheticProvider,
    generate_corpus,
    synthetic_provider,
    write_corpus,
)
from .speaker_tokens import (
    Codebook,
    MixSource,
    MixtureRecord,
    SpeakerEmbedding,
    assign_token,
    build_mixture_records,
    kmeans_train,
)
from .textdist import (
    EditStats,
    WordSeq,
    distance_only,
    edit_distance,
    normalized_edit_distance,
    words,
)

__version__ = "0.1.0"

__all__ = [
    "Codebook",
    "ConfusionNetwork",
    "CountReport",
    "DataError",
    "EditStats",
    "FileProvider",
    "Hypothesis",
    "HypothesisClustering",
    "HypothesisProvider",
    "MergeStep",
    "MergedOutput",
    "MergedTranscription",
    "MixSource",
    "MixtureRecord",
    "Reference",
    "ReferenceSet",
    "SimConfig",
    "SimCorpus",
    "Slot",
    "SpeakerEmbedding",
    "SyntheticProvider",
    "TokenDistribution",
    "ValidationError",
    "WerEntry",
    "WerReport",
    "WordSeq",
    "ahc_threshold",
    "assign_token",
    "build_confusion_network",
    "build_mixture_records",
    "cluster_fixed_k",
    "clustering_diagnostics",
    "count_accuracy",
    "distance_only",
    "edit_distance",
    "format_count_table",
    "generate_corpus",
    "kmeans_train",
    "merge_clusters",
    "normalized_edit_distance",
    "pairwise_matrix",
    "rover_vote",
    "run_hcm",
    "run_hcm_detailed",
    "score_wer",
    "select_candidates",
    "simple_vote",
    "synthetic_provider",
    "words",
    "write_corpus",
]
