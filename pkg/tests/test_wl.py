"""Color refinement, digests, and the exhaustive isomorphism oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poolexp import (
    brute_force_isomorphic,
    complete_graph,
    cycle_graph,
    disjoint_union,
    erdos_renyi,
    generate_wl_pairs,
    multiset_digest,
    path_graph,
    refinement_divergence_round,
    wl_distinguishable,
    wl_refine_joint,
)
from poolexp.wl import joint_coloring


def random_graph(seed, n_lo=2, n_hi=10):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_lo, n_hi + 1))
    return erdos_renyi(n, rng.uniform(0.1, 0.9), rng)


def same_partition(a, b):
    if a.size != b.size:
        return False
    return len(set(zip(a.tolist(), b.tolist()))) == len(set(a.tolist())) == len(set(b.tolist()))


# ---------------------------------------------------------------------------
# Joint refinement
# ---------------------------------------------------------------------------


def test_c6_vs_two_triangles_indistinguishable():
    c6 = cycle_graph(6)
    cc = disjoint_union(cycle_graph(3), cycle_graph(3))
    r1, r2 = wl_refine_joint(c6, cc, init="uniform")
    assert r1.histogram == r2.histogram
    assert not wl_distinguishable(c6, cc)


def test_k3_vs_p3_diverges_at_round_one():
    r1, r2 = wl_refine_joint(complete_graph(3), path_graph(3), init="uniform")
    assert r1.histogram != r2.histogram
    assert refinement_divergence_round(complete_graph(3), path_graph(3), init="uniform") == 1


def test_generated_pairs_have_differing_histograms():
    for p in generate_wl_pairs(5, nodes=(8, 14), seed=5):
        r1, r2 = wl_refine_joint(p.left, p.right, init="uniform")
        assert r1.histogram != r2.histogram


def test_coloring_result_invariants():
    g1, g2 = complete_graph(4), path_graph(4)
    r1, r2 = wl_refine_joint(g1, g2, init="uniform")
    palette = {c for c, _ in r1.histogram} | {c for c, _ in r2.histogram}
    assert palette == set(range(max(palette) + 1))
    assert sum(k for _, k in r1.histogram) == g1.num_nodes
    assert sum(k for _, k in r2.histogram) == g2.num_nodes
    assert 1 <= r1.rounds == r2.rounds <= g1.num_nodes + g2.num_nodes


@given(st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_refinement_is_stable_at_fixpoint(seed):
    g1 = random_graph(seed)
    g2 = random_graph(seed + 1)
    c1, c2, _, rounds = joint_coloring(g1, g2, init="uniform")
    d1, d2, _, _ = joint_coloring(g1, g2, init="uniform", rounds=rounds + 1)
    assert same_partition(np.concatenate([c1, c2]), np.concatenate([d1, d2]))


@given(st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_joint_refinement_is_symmetric(seed):
    g1 = random_graph(seed)
    g2 = random_graph(seed + 1)
    a1, a2 = wl_refine_joint(g1, g2, init="uniform")
    b2, b1 = wl_refine_joint(g2, g1, init="uniform")
    assert a1.histogram == b1.histogram
    assert a2.histogram == b2.histogram


def test_init_mode_validation():
    g = complete_graph(3)
    with pytest.raises(ValueError, match="labels"):
        wl_refine_joint(g, g, init="from-labels")
    real = g.with_features(np.ones((3, 1)), "real")
    with pytest.raises(ValueError, match="integer"):
        wl_refine_joint(real, real, init="from-integer-features")


def test_feature_init_separates_at_round_zero():
    a = complete_graph(3).with_features(np.array([[1], [1], [1]]), "int")
    b = complete_graph(3).with_features(np.array([[1], [1], [2]]), "int")
    assert refinement_divergence_round(a, b) == 0
    assert wl_distinguishable(a, b)


def test_size_short_circuit():
    assert wl_distinguishable(complete_graph(5), complete_graph(6))
    assert refinement_divergence_round(complete_graph(5), complete_graph(6)) == 0


# ---------------------------------------------------------------------------
# Distinguishability vs isomorphism
# ---------------------------------------------------------------------------


@given(st.integers(0, 10_000))
@settings(max_examples=80, deadline=None)
def test_relabeled_graphs_are_never_distinguishable(seed):
    g = random_graph(seed)
    rng = np.random.default_rng(seed + 77)
    h = g.permuted(rng.permutation(g.num_nodes))
    assert not wl_distinguishable(g, h)


@given(st.integers(0, 10_000))
@settings(max_examples=80, deadline=None)
def test_distinguishable_implies_non_isomorphic(seed):
    g1 = random_graph(seed, n_lo=3, n_hi=7)
    g2 = random_graph(seed + 1, n_lo=3, n_hi=7)
    if g1.num_nodes != g2.num_nodes:
        return
    if wl_distinguishable(g1, g2):
        assert not brute_force_isomorphic(g1, g2)


def test_brute_force_on_shuffled_graph():
    g = erdos_renyi(8, 0.4, np.random.default_rng(1))
    h = g.permuted(np.random.default_rng(2).permutation(8))
    assert brute_force_isomorphic(g, h)


def test_brute_force_k3_vs_p3():
    assert not brute_force_isomorphic(complete_graph(3), path_graph(3))


def test_brute_force_c6_vs_two_triangles():
    c6 = cycle_graph(6)
    cc = disjoint_union(cycle_graph(3), cycle_graph(3))
    assert not brute_force_isomorphic(c6, cc)
    assert not wl_distinguishable(c6, cc)


def test_brute_force_respects_features():
    heavy_center = path_graph(3, node_features=np.array([[1], [2], [1]]))
    heavy_end = path_graph(3, node_features=np.array([[2], [1], [1]]))
    other_end = path_graph(3, node_features=np.array([[1], [1], [2]]))
    assert not brute_force_isomorphic(heavy_center, heavy_end)
    assert brute_force_isomorphic(heavy_end, other_end)


def test_brute_force_size_limit():
    with pytest.raises(ValueError, match="10"):
        brute_force_isomorphic(complete_graph(11), complete_graph(11))


# ---------------------------------------------------------------------------
# Multiset digests
# ---------------------------------------------------------------------------


@given(st.integers(0, 10_000))
@settings(max_examples=80, deadline=None)
def test_digest_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    rows = rng.integers(-5, 6, size=(int(rng.integers(1, 9)), int(rng.integers(1, 5))))
    perm = rng.permutation(rows.shape[0])
    assert multiset_digest(rows) == multiset_digest(rows[perm])


def test_digest_multiplicity_matters():
    assert multiset_digest(np.array([[1, 2], [1, 2]])) != multiset_digest(np.array([[1, 2]]))


def test_digest_simple_permutation():
    assert multiset_digest(np.array([[1, 2], [3, 4]])) == multiset_digest(np.array([[3, 4], [1, 2]]))


def test_digest_real_quantization():
    # bucket oracle: round(x / eps) must coincide for the pair below
    eps = 1e-8
    assert round(1.0 / eps) == round((1.0 + 1e-12) / eps)
    a = multiset_digest(np.array([[1.0]]), mode="real", eps=eps)
    b = multiset_digest(np.array([[1.0 + 1e-12]]), mode="real", eps=eps)
    assert a == b
    c = multiset_digest(np.array([[1.0 + 1e-7]]), mode="real", eps=eps)
    assert a != c


def test_digest_rejects_non_finite():
    with pytest.raises(ValueError, match="non-finite"):
        multiset_digest(np.array([[np.nan]]), mode="real")


def test_digest_rejects_empty():
    with pytest.raises(ValueError, match="non-empty"):
        multiset_digest(np.zeros((0, 2)))


def test_digest_modes_are_tagged():
    ints = multiset_digest(np.array([[1]]))
    reals = multiset_digest(np.array([[1.0]]), mode="real")
    assert ints.mode == "int" and reals.mode.startswith("real")
    assert ints != reals
