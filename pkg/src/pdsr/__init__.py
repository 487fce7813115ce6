"""Privacy-preserving cross-platform service recommendation via LSH similarity graphs."""

from .exceptions import (
    ConfigError,
    DatasetError,
    DecodeError,
    EmptyCandidatesError,
    PDSRError,
    SearchSpaceTooLarge,
    UnknownUserError,
)
from .federation import PlatformDataset, SignatureMessage, audit_privacy, deserialize_message, serialize_message
from .graph import SimilarityGraph, build_graph, expanded_set, expansion_ratio
from .lsh import LshFamily, collision_probability, edge_probability, hash_vector, sample_family
from .pipeline import EvalReport, PipelineConfig, load_config, run_pipeline, sweep
from .recommend import (
    RecommendationList,
    RecommendationQuery,
    brute_force_topk,
    build_pool,
    greedy_topk,
    objective_F,
    surrogate_Fprime,
)

__version__ = "0.1.0"
