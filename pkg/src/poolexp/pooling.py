"""Pooling operators in select/reduce/connect form.

Every operator emits an explicit assignment matrix S (nodes x supernodes) so
the structural checks can inspect it from the outside:

* ``dense``        row-softmax of a seeded random MLP; features S^T X
* ``rand-dense``   row-normalized nonnegative random S; features S^T X
* ``graclus``      greedy unit-weight matching, recursed to the target ratio
* ``cmp-graclus``  the same matching run on the complement graph
* ``kmis``         centroids of a greedy maximal independent set of the k-hop
                   graph, every node assigned to its nearest centroid
* ``ecpool``       edge contraction by descending seeded edge scores;
                   features r * (S^T X) with r the per-supernode scores
* ``topk``         keep the top-scoring ceil(ratio*N) nodes (seeded projector),
                   gate kept features by tanh(score), induced subgraph
* ``sagpool``      as topk with the score taken from one aggregation step
* ``rand-sparse``  as topk with scores drawn from a standard normal
* ``identity``     K = N, S = I

All operators are deterministic given (graph, features, config). The random
ones (``rand-dense``, ``rand-sparse``) and the unit-weight matching
tie-breaks depend on the node numbering by construction, so they are not
permutation-consistent; the feature-scored operators are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import greedy_matching, greedy_mis, hop_matrix
from .gin import EmbeddingMatrix, MlpSpec, random_mlp_forward, neighbor_sum
from .graphs import REAL_MODE, Graph, complement

OPERATOR_IDS = (
    "dense",
    "rand-dense",
    "graclus",
    "cmp-graclus",
    "kmis",
    "ecpool",
    "topk",
    "sagpool",
    "rand-sparse",
    "identity",
)

RATIO_OPERATORS = frozenset(
    {"dense", "rand-dense", "graclus", "cmp-graclus", "ecpool", "topk", "sagpool", "rand-sparse"}
)
K_OPERATORS = frozenset({"kmis"})
# Operators whose S rows all sum to the same positive constant.
ROW_STOCHASTIC_OPERATORS = frozenset(
    {"dense", "rand-dense", "graclus", "cmp-graclus", "kmis", "ecpool", "identity"}
)


class UnreachableRatioError(RuntimeError):
    """A halving operator could not reach the target ratio."""

    def __init__(self, operator_id, achieved_ratio, target_ratio, levels):
        self.operator_id = operator_id
        self.achieved_ratio = achieved_ratio
        self.target_ratio = target_ratio
        self.levels = levels
        super().__init__(
            f"{operator_id}: stalled at achieved ratio {achieved_ratio:.3f} "
            f"(target {target_ratio:.3f}) after {levels} levels"
        )


@dataclass(frozen=True)
class PoolConfig:
    """Operator knobs: ratio for size-controlled operators, k for the k-hop
    independent-set operator, plus the seed for any random parameters."""

    ratio: float | None = None
    k: int | None = None
    seed: int = 0
    recursion_limit: int = 30


@dataclass(frozen=True)
class AssignmentMatrix:
    """Node-to-supernode membership scores, dense storage."""

    dense: np.ndarray
    lambda_claim: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.dense)
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise ValueError(f"assignment must be N x K with K >= 1, got {arr.shape}")
        if not np.isfinite(arr.astype(np.float64)).all():
            raise ValueError("assignment scores must be finite")
        object.__setattr__(self, "dense", arr)

    @property
    def shape(self):
        return self.dense.shape

    def sparse(self):
        """Per-node list of (supernode, score) for the nonzero entries."""
        rows = []
        for row in self.dense:
            nz = np.nonzero(row)[0]
            rows.append([(int(j), row[j].item()) for j in nz])
        return rows


@dataclass(frozen=True)
class PooledGraph:
    """A coarsened graph plus the provenance needed to audit it."""

    graph: Graph
    adjacency: np.ndarray
    features: EmbeddingMatrix
    assignment: AssignmentMatrix
    operator_id: str
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        k = self.graph.num_nodes
        if self.features.rows != k:
            raise ValueError(
                f"pooled features have {self.features.rows} rows for {k} supernodes"
            )
        if self.adjacency.shape != (k, k):
            raise ValueError(
                f"pooled adjacency shape {self.adjacency.shape} != ({k}, {k})"
            )

    @property
    def num_supernodes(self) -> int:
        return self.graph.num_nodes


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def target_supernodes(ratio: float, n: int) -> int:
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    return max(1, math.ceil(ratio * n))


def _graph_from_pattern(adjacency: np.ndarray, features: EmbeddingMatrix) -> Graph:
    pattern = np.asarray(adjacency) != 0
    u, v = np.nonzero(np.triu(pattern, k=1))
    return Graph(
        features.rows,
        np.stack([u, v], axis=1) if u.size else [],
        node_features=features.values,
        feature_mode=features.mode,
    )


def _csr_from_pattern(adjacency: np.ndarray):
    pattern = np.asarray(adjacency) != 0
    np.fill_diagonal(pattern, False)
    indptr = np.zeros(pattern.shape[0] + 1, dtype=np.int64)
    np.cumsum(pattern.sum(axis=1), out=indptr[1:])
    indices = np.nonzero(pattern)[1].astype(np.int64)
    return indptr, indices


def _binary_con(s: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    coarse = s.T @ adjacency @ s
    out = (coarse != 0).astype(np.int64)
    np.fill_diagonal(out, 0)
    return out


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _one_hot_assignment(cluster_of: np.ndarray, k: int) -> np.ndarray:
    s = np.zeros((cluster_of.size, k), dtype=np.int64)
    s[np.arange(cluster_of.size), cluster_of] = 1
    return s


def _clusters_from_matching(match: np.ndarray):
    """Cluster ids in order of first appearance by ascending node index."""
    n = match.size
    cluster_of = np.full(n, -1, dtype=np.int64)
    k = 0
    for v in range(n):
        if cluster_of[v] >= 0:
            continue
        cluster_of[v] = k
        partner = match[v]
        if partner != v:
            cluster_of[partner] = k
        k += 1
    return cluster_of, k


def _projector_scores(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    p = rng.standard_normal(values.shape[1])
    norm = np.linalg.norm(p)
    if norm == 0.0:
        norm = 1.0
    return values.astype(np.float64) @ (p / norm)


# ---------------------------------------------------------------------------
# Dense family
# ---------------------------------------------------------------------------


def _pool_dense(g: Graph, x: EmbeddingMatrix, cfg: PoolConfig, op: str) -> PooledGraph:
    n = g.num_nodes
    k = target_supernodes(cfg.ratio, n)
    rng = np.random.default_rng(cfg.seed)
    if op == "rand-dense":
        raw = rng.uniform(0.0, 1.0, size=(n, k)) + 1e-12
        s = raw / raw.sum(axis=1, keepdims=True)
    else:
        spec = MlpSpec((x.width, 64, k), activation="elu", seed=cfg.seed)
        logits = random_mlp_forward(x.as_real(), spec).values
        s = _softmax_rows(logits)
    x_pooled = EmbeddingMatrix(s.T @ x.values.astype(np.float64), REAL_MODE)
    adjacency = s.T @ g.adjacency_matrix().astype(np.float64) @ s
    return PooledGraph(
        graph=_graph_from_pattern(adjacency, x_pooled),
        adjacency=adjacency,
        features=x_pooled,
        assignment=AssignmentMatrix(s, lambda_claim=1.0),
        operator_id=op,
        aux={"achieved_ratio": k / n},
    )


def _pool_identity(g: Graph, x: EmbeddingMatrix, cfg: PoolConfig) -> PooledGraph:
    n = g.num_nodes
    s = np.eye(n, dtype=np.int64)
    return PooledGraph(
        graph=g.with_features(x.values, x.mode),
        adjacency=g.adjacency_matrix(),
        features=x,
        assignment=AssignmentMatrix(s, lambda_claim=1.0),
        operator_id="identity",
        aux={"achieved_ratio": 1.0},
    )


# ---------------------------------------------------------------------------
# Matching-based coarsening
# ---------------------------------------------------------------------------


def heavy_edge_matching(g: Graph) -> np.ndarray:
    """One greedy matching pass; match[v] == v marks singletons."""
    return greedy_matching(g.indptr, g.indices)


def _pool_matching(g: Graph, x: EmbeddingMatrix, cfg: PoolConfig, on_complement: bool) -> PooledGraph:
    op = "cmp-graclus" if on_complement else "graclus"
    n = g.num_nodes
    target = target_supernodes(cfg.ratio, n)
    original = g.adjacency_matrix()
    # matching runs on the (complement) pattern, coarsened level by level
    match_pattern = complement(g).adjacency_matrix() if on_complement else original.copy()
    values = x.values
    s_total = np.eye(n, dtype=np.int64)
    levels = []
    k_cur = n
    while k_cur > target and len(levels) < cfg.recursion_limit:
        indptr, indices = _csr_from_pattern(match_pattern)
        match = greedy_matching(indptr, indices)
        cluster_of, k_next = _clusters_from_matching(match)
        if k_next == k_cur:
            break
        s_level = _one_hot_assignment(cluster_of, k_next)
        new_values = s_level.T @ values
        levels.append({"assignment": s_level, "x_in": values, "x_out": new_values, "r": None})
        values = new_values
        match_pattern = _binary_con(s_level, match_pattern)
        s_total = s_total @ s_level
        k_cur = k_next
    if k_cur > target:
        raise UnreachableRatioError(op, k_cur / n, cfg.ratio, len(levels))
    mode = x.mode if np.issubdtype(values.dtype, np.integer) else REAL_MODE
    feats = EmbeddingMatrix(values, mode)
    adjacency = _binary_con(s_total, original)
    return PooledGraph(
        graph=_graph_from_pattern(adjacency, feats),
        adjacency=adjacency,
        features=feats,
        assignment=AssignmentMatrix(s_total, lambda_claim=1.0),
        operator_id=op,
        aux={"levels": levels, "achieved_ratio": k_cur / n},
    )


# ---------------------------------------------------------------------------
# k-hop independent set
# ---------------------------------------------------------------------------


def _pool_kmis(g: Graph, x: EmbeddingMatrix, cfg: PoolConfig) -> PooledGraph:
    if cfg.k is None or cfg.k < 1:
        raise ValueError("kmis requires k >= 1")
    n = g.num_nodes
    rng = np.random.default_rng(cfg.seed)
    ranking = _projector_scores(x.values, rng)
    hops = hop_matrix(g.indptr, g.indices, cfg.k)
    within = (hops >= 1) & (hops <= cfg.k)
    # CSR of the k-hop graph, neighbor lists sorted by construction
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(within.sum(axis=1), out=indptr[1:])
    indices = np.nonzero(within)[1].astype(np.int64)

    order = np.lexsort((np.arange(n), -ranking))
    selected = greedy_mis(indptr, indices, order)
    centroids = np.flatnonzero(selected)
    k = centroids.size

    # nearest centroid in hops; ties prefer higher ranking, then lower id
    dist = hops[:, centroids].astype(np.int64)
    tie_rank = np.lexsort((centroids, -ranking[centroids]))
    rank_of_col = np.empty(k, dtype=np.int64)
    rank_of_col[tie_rank] = np.arange(k)
    choice = np.argmin(dist * (k + 1) + rank_of_col[None, :], axis=1)
    unreached = dist[np.arange(n), choice] > cfg.k
    if unreached.any():
        raise AssertionError("maximal independent set left a node unassigned")

    s = _one_hot_assignment(choice, k)
    values = s.T @ x.values
    mode = x.mode if np.issubdtype(values.dtype, np.integer) else REAL_MODE
    feats = EmbeddingMatrix(values, mode)
    adjacency = _binary_con(s, g.adjacency_matrix())
    return PooledGraph(
        graph=_graph_from_pattern(adjacency, feats),
        adjacency=adjacency,
        features=feats,
        assignment=AssignmentMatrix(s, lambda_claim=1.0),
        operator_id="kmis",
        aux={
            "centroids": centroids,
            "ranking": ranking,
            "k": cfg.k,
            "achieved_ratio": k / n,
        },
    )


# ---------------------------------------------------------------------------
# Edge contraction
# ---------------------------------------------------------------------------


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _contract_edges(adjacency: np.ndarray, values: np.ndarray, w, b):
    """One contraction pass; returns (S, r, new_values, new_adjacency) or None."""
    n = adjacency.shape[0]
    u, v = np.nonzero(np.triu(adjacency, k=1))
    if u.size == 0:
        return None
    fdim = values.shape[1]
    # scored symmetrically over both orientations so the operator does not
    # depend on how the undirected edge happens to be stored
    xu = values[u].astype(np.float64)
    xv = values[v].astype(np.float64)
    scores = 0.5 * (
        _sigmoid(xu @ w[:fdim] + xv @ w[fdim:] + b)
        + _sigmoid(xv @ w[:fdim] + xu @ w[fdim:] + b)
    )
    order = np.lexsort((v, u, -scores))
    free = np.ones(n, dtype=bool)
    partner = np.full(n, -1, dtype=np.int64)
    edge_score = np.zeros(n, dtype=np.float64)
    contracted = 0
    for e in order:
        a, c = u[e], v[e]
        if free[a] and free[c]:
            free[a] = free[c] = False
            partner[a], partner[c] = c, a
            edge_score[a] = edge_score[c] = scores[e]
            contracted += 1
    if contracted == 0:
        return None
    match = np.where(partner >= 0, partner, np.arange(n))
    cluster_of, k_next = _clusters_from_matching(match)
    s = _one_hot_assignment(cluster_of, k_next)
    r = np.ones(k_next, dtype=np.float64)
    for a in range(n):
        if partner[a] >= 0:
            r[cluster_of[a]] = edge_score[a]
    new_values = r[:, None] * (s.T @ values.astype(np.float64))
    new_adjacency = _binary_con(s, adjacency)
    return s, r, new_values, new_adjacency


def _pool_ecpool(g: Graph, x: EmbeddingMatrix, cfg: PoolConfig) -> PooledGraph:
    n = g.num_nodes
    target = target_supernodes(cfg.ratio, n)
    rng = np.random.default_rng(cfg.seed)
    w = rng.standard_normal(2 * x.width)
    b = float(rng.standard_normal())
    adjacency = g.adjacency_matrix()
    values = x.values
    s_total = np.eye(n, dtype=np.int64)
    levels = []
    k_cur = n
    while k_cur > target and len(levels) < cfg.recursion_limit:
        step = _contract_edges(adjacency, values, w, b)
        if step is None:
            break
        s_level, r, new_values, adjacency = step
        levels.append({"assignment": s_level, "x_in": values, "x_out": new_values, "r": r})
        values = new_values
        s_total = s_total @ s_level
        k_cur = s_level.shape[1]
    if k_cur > target:
        raise UnreachableRatioError("ecpool", k_cur / n, cfg.ratio, len(levels))
    feats = EmbeddingMatrix(values, REAL_MODE)
    aux = {"levels": levels, "achieved_ratio": k_cur / n}
    if len(levels) == 1:
        aux["r"] = levels[0]["r"]
    return PooledGraph(
        graph=_graph_from_pattern(adjacency, feats),
        adjacency=adjacency,
        features=feats,
        assignment=AssignmentMatrix(s_total, lambda_claim=1.0),
        operator_id="ecpool",
        aux=aux,
    )


# ---------------------------------------------------------------------------
# Score-and-keep family
# ---------------------------------------------------------------------------


def topk_pool_with_scores(g: Graph, x: EmbeddingMatrix, scores, k: int,
                          operator_id: str = "topk", aux=None) -> PooledGraph:
    """Keep the k best-scoring nodes; kept features are gated by tanh(score)."""
    scores = np.asarray(scores, dtype=np.float64)
    n = g.num_nodes
    if scores.shape != (n,):
        raise ValueError(f"scores shape {scores.shape} != ({n},)")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    order = np.argsort(-scores, kind="stable")
    kept = np.sort(order[:k])
    gate = np.tanh(scores[kept])
    s = np.zeros((n, k), dtype=np.int64)
    s[kept, np.arange(k)] = 1
    values = gate[:, None] * x.values[kept].astype(np.float64)
    feats = EmbeddingMatrix(values, REAL_MODE)
    adjacency = g.adjacency_matrix()[np.ix_(kept, kept)]
    full_aux = {"kept": kept, "scores": scores, "gate": gate, "achieved_ratio": k / n}
    full_aux.update(aux or {})
    return PooledGraph(
        graph=_graph_from_pattern(adjacency, feats),
        adjacency=adjacency,
        features=feats,
        assignment=AssignmentMatrix(s, lambda_claim=None),
        operator_id=operator_id,
        aux=full_aux,
    )


def _pool_score_keep(g: Graph, x: EmbeddingMatrix, cfg: PoolConfig, op: str) -> PooledGraph:
    n = g.num_nodes
    k = target_supernodes(cfg.ratio, n)
    rng = np.random.default_rng(cfg.seed)
    if op == "rand-sparse":
        scores = rng.standard_normal(n)
    elif op == "sagpool":
        # one aggregation step before projecting; scores standardized so the
        # tanh gate stays away from exact saturation
        agg = x.values + neighbor_sum(g, x.values)
        raw = _projector_scores(agg, rng)
        spread = raw.std()
        scores = (raw - raw.mean()) / (spread if spread > 0 else 1.0)
    else:
        scores = _projector_scores(x.values, rng)
    return topk_pool_with_scores(g, x, scores, k, operator_id=op)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


def _validate_knob(op: str, cfg: PoolConfig):
    if op in RATIO_OPERATORS:
        if cfg.ratio is None or cfg.k is not None:
            raise ValueError(f"{op} is controlled by ratio (and only ratio)")
    elif op in K_OPERATORS:
        if cfg.k is None or cfg.ratio is not None:
            raise ValueError(f"{op} is controlled by k (and only k)")
    elif cfg.ratio is not None or cfg.k is not None:
        raise ValueError(f"{op} takes neither ratio nor k")


def pool(op: str, g: Graph, x: EmbeddingMatrix, cfg: PoolConfig) -> PooledGraph:
    """Run one pooling operator; deterministic for a fixed config."""
    if op not in OPERATOR_IDS:
        raise ValueError(f"unknown operator {op!r}; choose from {OPERATOR_IDS}")
    if x.rows != g.num_nodes:
        raise ValueError(
            f"embedding has {x.rows} rows for a graph with {g.num_nodes} nodes"
        )
    if g.num_nodes == 0:
        raise ValueError("cannot pool an empty graph")
    _validate_knob(op, cfg)
    if op in ("dense", "rand-dense"):
        return _pool_dense(g, x, cfg, op)
    if op == "identity":
        return _pool_identity(g, x, cfg)
    if op in ("graclus", "cmp-graclus"):
        return _pool_matching(g, x, cfg, on_complement=op == "cmp-graclus")
    if op == "kmis":
        return _pool_kmis(g, x, cfg)
    if op == "ecpool":
        return _pool_ecpool(g, x, cfg)
    return _pool_score_keep(g, x, cfg, op)
