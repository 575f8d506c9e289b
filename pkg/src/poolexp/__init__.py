"""Workbench for checking whether graph pooling operators preserve the
distinguishing power of 1-WL color refinement."""

from ._backend import BACKEND
from .conditions import (
    ConditionReport,
    DistinguishabilityVerdict,
    NotDistinguishableError,
    audit_operator,
    build_topk_counterexample,
    check_condition2,
    check_condition3,
    empirical_pool_distinct,
    real_pipeline_readouts,
    distinguishability_oracle,
)
from .gin import (
    EmbeddingMatrix,
    GinLayer,
    MlpSpec,
    exact_color_embedding,
    gin_forward,
    gin_forward_dense,
    global_readout,
    random_mlp_forward,
)
from .graphs import (
    DatasetFormatError,
    DatasetStats,
    GenerationError,
    Graph,
    GraphPair,
    complement,
    complete_graph,
    cycle_graph,
    dataset_stats,
    disjoint_union,
    empty_graph,
    erdos_renyi,
    generate_wl_pairs,
    graphs_equal,
    is_connected,
    load_dataset,
    path_graph,
    save_dataset,
)
from .pooling import (
    OPERATOR_IDS,
    ROW_STOCHASTIC_OPERATORS,
    AssignmentMatrix,
    PoolConfig,
    PooledGraph,
    UnreachableRatioError,
    heavy_edge_matching,
    pool,
    topk_pool_with_scores,
)
from .wl import (
    ColoringResult,
    MultisetDigest,
    brute_force_isomorphic,
    multiset_digest,
    refinement_divergence_round,
    wl_distinguishable,
    wl_refine_joint,
)

__version__ = "0.1.0"
