"""Operator catalog contracts: assignment structure, reductions, connectivity,
recursion behavior, and permutation consistency."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poolexp import (
    EmbeddingMatrix,
    Graph,
    PoolConfig,
    UnreachableRatioError,
    brute_force_isomorphic,
    complement,
    cycle_graph,
    disjoint_union,
    erdos_renyi,
    graphs_equal,
    heavy_edge_matching,
    is_connected,
    multiset_digest,
    pool,
    topk_pool_with_scores,
)
from poolexp._kernels import hop_matrix
from poolexp.pooling import OPERATOR_IDS, ROW_STOCHASTIC_OPERATORS, target_supernodes

RATIO_CFG = PoolConfig(ratio=0.5, seed=0)


def connected_graph(seed, n_lo=6, n_hi=12, feature_dim=2, real=False):
    rng = np.random.default_rng(seed)
    while True:
        n = int(rng.integers(n_lo, n_hi + 1))
        g = erdos_renyi(n, rng.uniform(0.3, 0.6), rng)
        if g.num_edges and is_connected(g):
            break
    if real:
        return g.with_features(rng.normal(size=(n, feature_dim)), "real")
    return g.with_features(rng.integers(0, 5, size=(n, feature_dim)), "int")


def cfg_for(op, ratio=0.5, k=2, seed=0):
    if op == "kmis":
        return PoolConfig(k=k, seed=seed)
    if op == "identity":
        return PoolConfig(seed=seed)
    return PoolConfig(ratio=ratio, seed=seed)


# ---------------------------------------------------------------------------
# Shared contracts
# ---------------------------------------------------------------------------


def test_row_sums_per_operator():
    g = connected_graph(0)
    x = EmbeddingMatrix.from_graph(g)
    for op in OPERATOR_IDS:
        pooled = pool(op, g, x, cfg_for(op))
        sums = pooled.assignment.dense.sum(axis=1).astype(np.float64)
        if op in ROW_STOCHASTIC_OPERATORS:
            assert np.allclose(sums, 1.0, atol=1e-9), f"{op} rows should sum to 1"
        else:
            assert pooled.num_supernodes < g.num_nodes
            assert (sums == 0).any(), f"{op} should drop nodes"


def test_pooled_graph_shape_consistency():
    g = connected_graph(1)
    x = EmbeddingMatrix.from_graph(g)
    for op in OPERATOR_IDS:
        pooled = pool(op, g, x, cfg_for(op))
        k = pooled.num_supernodes
        assert pooled.features.rows == k
        assert pooled.adjacency.shape == (k, k)
        assert pooled.assignment.shape == (g.num_nodes, k)
        assert pooled.graph.num_nodes == k
        assert pooled.operator_id == op


def test_determinism_per_seed():
    g = connected_graph(2)
    x = EmbeddingMatrix.from_graph(g)
    for op in OPERATOR_IDS:
        a = pool(op, g, x, cfg_for(op, seed=5))
        b = pool(op, g, x, cfg_for(op, seed=5))
        assert np.array_equal(a.assignment.dense, b.assignment.dense)
        assert np.array_equal(a.features.values, b.features.values)


def test_ratio_semantics():
    g = connected_graph(3, n_lo=10, n_hi=10)
    x = EmbeddingMatrix.from_graph(g)
    for ratio, expected in ((0.5, 5), (0.31, 4), (0.05, 1), (1.0, 10)):
        assert target_supernodes(ratio, 10) == expected
        pooled = pool("topk", g, x, PoolConfig(ratio=ratio, seed=0))
        assert pooled.num_supernodes == expected


def test_knob_validation():
    g = connected_graph(4)
    x = EmbeddingMatrix.from_graph(g)
    with pytest.raises(ValueError, match="ratio"):
        pool("dense", g, x, PoolConfig(k=2))
    with pytest.raises(ValueError, match="k"):
        pool("kmis", g, x, PoolConfig(ratio=0.5))
    with pytest.raises(ValueError, match="neither"):
        pool("identity", g, x, PoolConfig(ratio=0.5))
    with pytest.raises(ValueError, match="unknown operator"):
        pool("asapool", g, x, PoolConfig(ratio=0.5))


# ---------------------------------------------------------------------------
# Dense family
# ---------------------------------------------------------------------------


def test_dense_softmax_rows_sum_to_one():
    g = connected_graph(5)
    x = EmbeddingMatrix.from_graph(g)
    pooled = pool("dense", g, x, PoolConfig(ratio=0.2, seed=1))
    assert np.allclose(pooled.assignment.dense.sum(axis=1), 1.0, atol=1e-9)
    assert (pooled.assignment.dense > 0).all()


def test_dense_reduction_is_st_x():
    g = connected_graph(6)
    x = EmbeddingMatrix.from_graph(g)
    for op in ("dense", "rand-dense"):
        pooled = pool(op, g, x, RATIO_CFG)
        s = pooled.assignment.dense
        np.testing.assert_allclose(pooled.features.values, s.T @ x.values, atol=1e-12)
        np.testing.assert_allclose(
            pooled.adjacency, s.T @ g.adjacency_matrix() @ s, atol=1e-12
        )


def test_identity_returns_structural_copy():
    g = connected_graph(7)
    x = EmbeddingMatrix.from_graph(g)
    pooled = pool("identity", g, x, PoolConfig())
    assert graphs_equal(pooled.graph, g)
    assert np.array_equal(pooled.features.values, x.values)
    assert np.array_equal(pooled.assignment.dense, np.eye(g.num_nodes, dtype=np.int64))


# ---------------------------------------------------------------------------
# Matching-based
# ---------------------------------------------------------------------------


@given(st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_matching_pairs_disjoint_and_adjacent(seed):
    g = random_any_graph(seed)
    match = heavy_edge_matching(g)
    adj = {tuple(e) for e in g.edges.tolist()}
    seen = set()
    supernodes = 0
    for v in range(g.num_nodes):
        if v in seen:
            continue
        partner = int(match[v])
        supernodes += 1
        seen.add(v)
        if partner != v:
            assert partner not in seen
            seen.add(partner)
            assert (min(v, partner), max(v, partner)) in adj
    assert match[match].tolist() == list(range(g.num_nodes))
    assert (g.num_nodes + 1) // 2 <= supernodes <= g.num_nodes


def random_any_graph(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 14))
    return erdos_renyi(n, rng.uniform(0.0, 0.9), rng)


def test_graclus_reaches_target_and_reduces_exactly():
    g = connected_graph(8, n_lo=20, n_hi=30)
    x = EmbeddingMatrix.from_graph(g)
    pooled = pool("graclus", g, x, PoolConfig(ratio=0.1, seed=0))
    assert pooled.num_supernodes <= target_supernodes(0.1, g.num_nodes)
    s = pooled.assignment.dense
    assert set(np.unique(s)) <= {0, 1}
    assert np.array_equal(s.sum(axis=1), np.ones(g.num_nodes, dtype=np.int64))
    assert np.array_equal(pooled.features.values, s.T @ x.values)
    assert pooled.features.mode == "int"
    assert pooled.aux["achieved_ratio"] == pooled.num_supernodes / g.num_nodes


def test_graclus_levels_compose():
    g = connected_graph(9, n_lo=16, n_hi=24)
    x = EmbeddingMatrix.from_graph(g)
    pooled = pool("graclus", g, x, PoolConfig(ratio=0.2, seed=0))
    total = np.eye(g.num_nodes, dtype=np.int64)
    for level in pooled.aux["levels"]:
        np.testing.assert_array_equal(level["x_out"], level["assignment"].T @ level["x_in"])
        total = total @ level["assignment"]
    np.testing.assert_array_equal(total, pooled.assignment.dense)


def test_graclus_stalls_with_informative_error():
    two_triangles = disjoint_union(cycle_graph(3), cycle_graph(3))
    x = EmbeddingMatrix.from_graph(two_triangles)
    with pytest.raises(UnreachableRatioError, match="achieved ratio 0.333"):
        pool("graclus", two_triangles, x, PoolConfig(ratio=0.1, seed=0))
    try:
        pool("graclus", two_triangles, x, PoolConfig(ratio=0.1, seed=0))
    except UnreachableRatioError as exc:
        assert exc.achieved_ratio == pytest.approx(2 / 6)


def test_cmp_graclus_first_level_matches_on_complement():
    g = connected_graph(10, n_lo=8, n_hi=8)
    x = EmbeddingMatrix.from_graph(g)
    pooled = pool("cmp-graclus", g, x, PoolConfig(ratio=0.5, seed=0))
    first = pooled.aux["levels"][0]["assignment"]
    comp_edges = {tuple(e) for e in complement(g).edges.tolist()}
    for col in range(first.shape[1]):
        members = np.nonzero(first[:, col])[0]
        if members.size == 2:
            u, v = int(members[0]), int(members[1])
            assert (u, v) in comp_edges
    # connectivity of the pooled graph still comes from the original edges
    s = pooled.assignment.dense
    expected = ((s.T @ g.adjacency_matrix() @ s) != 0).astype(np.int64)
    np.fill_diagonal(expected, 0)
    np.testing.assert_array_equal(pooled.adjacency, expected)


# ---------------------------------------------------------------------------
# k-hop independent set
# ---------------------------------------------------------------------------


def test_kmis_centroids_are_maximal_independent_in_k_hop():
    for seed in range(6):
        g = connected_graph(20 + seed, n_lo=10, n_hi=16)
        x = EmbeddingMatrix.from_graph(g)
        for k in (1, 2):
            pooled = pool("kmis", g, x, PoolConfig(k=k, seed=seed))
            centroids = pooled.aux["centroids"]
            hops = hop_matrix(g.indptr, g.indices, k)
            inside = hops[np.ix_(centroids, centroids)]
            off_diag = inside[~np.eye(len(centroids), dtype=bool)]
            assert (off_diag > k).all(), "centroids must be k-hop independent"
            others = np.setdiff1d(np.arange(g.num_nodes), centroids)
            if others.size:
                assert (hops[np.ix_(others, centroids)].min(axis=1) <= k).all(), (
                    "every non-centroid must see a centroid within k hops"
                )


def test_kmis_assignment_prefers_nearest_then_rank():
    g = connected_graph(30, n_lo=10, n_hi=14)
    x = EmbeddingMatrix.from_graph(g)
    pooled = pool("kmis", g, x, PoolConfig(k=2, seed=3))
    centroids = pooled.aux["centroids"]
    ranking = pooled.aux["ranking"]
    hops = hop_matrix(g.indptr, g.indices, 2).astype(np.int64)
    s = pooled.assignment.dense
    for v in range(g.num_nodes):
        chosen = int(np.nonzero(s[v])[0][0])
        dists = hops[v, centroids]
        assert dists[chosen] == dists.min()
        best_rank = max(
            ranking[centroids[j]] for j in range(len(centroids)) if dists[j] == dists.min()
        )
        assert ranking[centroids[chosen]] == best_rank


def test_kmis_ratio_non_increasing_in_k():
    for seed in range(8):
        g = connected_graph(40 + seed, n_lo=12, n_hi=20)
        x = EmbeddingMatrix.from_graph(g)
        ratios = [
            pool("kmis", g, x, PoolConfig(k=k, seed=1)).aux["achieved_ratio"]
            for k in (1, 2, 3)
        ]
        assert ratios == sorted(ratios, reverse=True)


# ---------------------------------------------------------------------------
# Edge contraction
# ---------------------------------------------------------------------------


def test_ecpool_single_level_structure():
    g = connected_graph(50, n_lo=8, n_hi=12)
    x = EmbeddingMatrix.from_graph(g)
    pooled = pool("ecpool", g, x, PoolConfig(ratio=0.5, seed=2))
    s = pooled.assignment.dense
    col_sizes = s.sum(axis=0)
    assert set(col_sizes.tolist()) <= {1, 2}
    assert np.array_equal(s.sum(axis=1), np.ones(g.num_nodes, dtype=np.int64))
    assert len(pooled.aux["levels"]) == 1
    r = pooled.aux["r"]
    np.testing.assert_allclose(
        pooled.features.values, r[:, None] * (s.T @ x.values), atol=1e-12
    )
    assert ((0 < r) & (r <= 1)).all()
    assert np.isclose(r[col_sizes == 1], 1.0).all()
    assert (r[col_sizes == 2] < 1.0).all()


def test_ecpool_contracts_by_descending_score():
    g = connected_graph(51, n_lo=8, n_hi=10)
    x = EmbeddingMatrix.from_graph(g)
    pooled = pool("ecpool", g, x, PoolConfig(ratio=0.5, seed=0))
    s = pooled.aux["levels"][0]["assignment"]
    edges = {tuple(e) for e in g.edges.tolist()}
    for col in range(s.shape[1]):
        members = np.nonzero(s[:, col])[0]
        if members.size == 2:
            assert (int(members[0]), int(members[1])) in edges


def test_ecpool_recursion_reaches_aggressive_ratio():
    g = connected_graph(52, n_lo=24, n_hi=32)
    x = EmbeddingMatrix.from_graph(g)
    pooled = pool("ecpool", g, x, PoolConfig(ratio=0.1, seed=0))
    assert pooled.num_supernodes <= target_supernodes(0.1, g.num_nodes)
    for level in pooled.aux["levels"]:
        np.testing.assert_allclose(
            level["x_out"],
            level["r"][:, None] * (level["assignment"].T @ level["x_in"]),
            atol=1e-12,
        )


def test_ecpool_stalls_on_edgeless_remainder():
    two_triangles = disjoint_union(cycle_graph(3), cycle_graph(3))
    x = EmbeddingMatrix.from_graph(two_triangles)
    with pytest.raises(UnreachableRatioError, match="ecpool"):
        pool("ecpool", two_triangles, x, PoolConfig(ratio=0.1, seed=0))


# ---------------------------------------------------------------------------
# Score-and-keep family
# ---------------------------------------------------------------------------


def test_topk_keeps_exactly_k_unit_entries():
    g = connected_graph(60, n_lo=4, n_hi=4)
    x = EmbeddingMatrix.from_graph(g)
    pooled = pool("topk", g, x, PoolConfig(ratio=0.5, seed=0))
    assert pooled.num_supernodes == 2
    assert int(np.count_nonzero(pooled.assignment.dense)) == 2
    assert set(np.unique(pooled.assignment.dense)) <= {0, 1}


def test_topk_with_scores_selects_and_gates():
    g = Graph(4, [(0, 1), (1, 2), (2, 3)], node_features=np.array([[1], [2], [3], [4]]))
    x = EmbeddingMatrix.from_graph(g)
    pooled = topk_pool_with_scores(g, x, np.array([0.1, 3.0, -1.0, 2.0]), k=2)
    assert pooled.aux["kept"].tolist() == [1, 3]
    np.testing.assert_allclose(
        pooled.features.values,
        np.tanh([3.0, 2.0])[:, None] * np.array([[2.0], [4.0]]),
    )
    assert pooled.adjacency.tolist() == [[0, 0], [0, 0]]  # nodes 1 and 3 not adjacent


def test_topk_induced_subgraph_topology():
    g = cycle_graph(6)
    x = EmbeddingMatrix.from_graph(g)
    pooled = topk_pool_with_scores(g, x, np.array([5.0, 4.0, 3.0, 0.0, 0.0, 2.9]), k=3)
    assert pooled.aux["kept"].tolist() == [0, 1, 2]
    assert pooled.adjacency.tolist() == [[0, 1, 0], [1, 0, 1], [0, 1, 0]]


def test_sparse_family_drops_rows():
    g = connected_graph(61, n_lo=10, n_hi=10)
    x = EmbeddingMatrix.from_graph(g)
    for op in ("topk", "sagpool", "rand-sparse"):
        pooled = pool(op, g, x, PoolConfig(ratio=0.3, seed=1))
        sums = pooled.assignment.dense.sum(axis=1)
        assert (sums == 0).sum() == g.num_nodes - pooled.num_supernodes


# ---------------------------------------------------------------------------
# Permutation consistency (feature-scored operators)
# ---------------------------------------------------------------------------


def quantized_feature_graph(pooled, eps=1e-9):
    # equal feature multisets shift identically, so the per-graph offset is safe
    q = np.round(pooled.features.values / eps).astype(np.int64)
    q = q - q.min() + 1
    return Graph(pooled.num_supernodes, pooled.graph.edges, node_features=q)


@pytest.mark.parametrize("op", ["dense", "topk", "sagpool", "kmis", "ecpool"])
def test_permutation_consistency_for_feature_scored_ops(op):
    rng = np.random.default_rng(123)
    g = connected_graph(70, n_lo=8, n_hi=10, real=True)
    perm = rng.permutation(g.num_nodes)
    gp = g.permuted(perm)
    cfg = cfg_for(op, ratio=0.5, k=1, seed=7)
    a = pool(op, g, EmbeddingMatrix.from_graph(g), cfg)
    b = pool(op, gp, EmbeddingMatrix.from_graph(gp), cfg)
    assert a.num_supernodes == b.num_supernodes
    da = multiset_digest(a.features.values, mode="real", eps=1e-9)
    db = multiset_digest(b.features.values, mode="real", eps=1e-9)
    assert da == db
    assert brute_force_isomorphic(quantized_feature_graph(a), quantized_feature_graph(b))


def test_rand_sparse_depends_on_node_order():
    # documented: the random-score operators are tied to the node numbering
    g = connected_graph(71, n_lo=10, n_hi=10, real=True)
    perm = np.roll(np.arange(10), 3)
    gp = g.permuted(perm)
    cfg = PoolConfig(ratio=0.3, seed=0)
    a = pool("rand-sparse", g, EmbeddingMatrix.from_graph(g), cfg)
    b = pool("rand-sparse", gp, EmbeddingMatrix.from_graph(gp), cfg)
    same_kept = np.array_equal(np.sort(perm[a.aux["kept"]]), b.aux["kept"])
    assert not same_kept


def test_unit_weight_matching_depends_on_node_order():
    # documented: with unit weights the matching is driven by index
    # tie-breaking, so relabeling can change the pooled topology
    rng = np.random.default_rng(0)
    witness = False
    for _ in range(500):
        n = int(rng.integers(5, 9))
        g = erdos_renyi(n, rng.uniform(0.3, 0.7), rng)
        if not (g.num_edges and is_connected(g)):
            continue
        perm = rng.permutation(n)
        gp = g.permuted(perm)
        cfg = PoolConfig(ratio=0.5, seed=0)
        try:
            a = pool("graclus", g, EmbeddingMatrix.from_graph(g), cfg)
            b = pool("graclus", gp, EmbeddingMatrix.from_graph(gp), cfg)
        except UnreachableRatioError:
            continue
        if a.num_supernodes != b.num_supernodes:
            witness = True
            break
        if multiset_digest(a.features.values) != multiset_digest(b.features.values):
            witness = True
            break
        if not brute_force_isomorphic(a.graph, b.graph):
            witness = True
            break
    assert witness


def test_assignment_sparse_view_matches_dense():
    g = connected_graph(72)
    x = EmbeddingMatrix.from_graph(g)
    pooled = pool("graclus", g, x, PoolConfig(ratio=0.5, seed=0))
    sparse = pooled.assignment.sparse()
    dense = pooled.assignment.dense
    rebuilt = np.zeros_like(dense)
    for i, row in enumerate(sparse):
        for j, score in row:
            rebuilt[i, j] = score
    np.testing.assert_array_equal(rebuilt, dense)
