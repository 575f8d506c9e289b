"""The numba kernels and their numpy fallbacks must agree bit for bit."""

import numpy as np
import pytest

from poolexp import _kernels
from poolexp._backend import USE_NUMBA
from poolexp.graphs import erdos_renyi

needs_numba = pytest.mark.skipif(not USE_NUMBA, reason="numba backend inactive")


def random_csr(seed, n_lo=2, n_hi=40):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_lo, n_hi + 1))
    g = erdos_renyi(n, rng.uniform(0.0, 0.7), rng)
    return g, rng


@needs_numba
@pytest.mark.parametrize("seed", range(12))
def test_wl_signatures_backends_agree(seed):
    g, rng = random_csr(seed)
    colors = rng.integers(0, max(2, g.num_nodes // 2), size=g.num_nodes)
    max_deg = int(g.degrees.max(initial=0))
    a = _kernels._wl_signatures_numba(g.indptr, g.indices, colors, max_deg)
    b = _kernels._wl_signatures_numpy(g.indptr, g.indices, colors, max_deg)
    np.testing.assert_array_equal(a, b)


@needs_numba
@pytest.mark.parametrize("seed", range(12))
def test_hop_matrix_backends_agree(seed):
    g, rng = random_csr(seed)
    cap = int(rng.integers(1, 5))
    a = _kernels._hop_matrix_numba(g.indptr, g.indices, cap)
    b = _kernels._hop_matrix_numpy(g.indptr, g.indices, cap)
    np.testing.assert_array_equal(a, b)


@needs_numba
@pytest.mark.parametrize("seed", range(12))
def test_matching_backends_agree(seed):
    g, _ = random_csr(seed)
    a = _kernels._greedy_matching_numba(g.indptr, g.indices)
    b = _kernels._greedy_matching_numpy(g.indptr, g.indices)
    np.testing.assert_array_equal(a, b)


@needs_numba
@pytest.mark.parametrize("seed", range(12))
def test_mis_backends_agree(seed):
    g, rng = random_csr(seed)
    order = rng.permutation(g.num_nodes)
    a = _kernels._greedy_mis_numba(g.indptr, g.indices, order)
    b = _kernels._greedy_mis_numpy(g.indptr, g.indices, order)
    np.testing.assert_array_equal(a, b)


def test_hop_matrix_against_bfs_oracle():
    g, _ = random_csr(99, n_lo=8, n_hi=14)
    cap = 3

    def bfs(src):
        dist = {src: 0}
        frontier = [src]
        while frontier:
            nxt = []
            for v in frontier:
                for u in g.neighbors(v):
                    if u not in dist:
                        dist[int(u)] = dist[v] + 1
                        nxt.append(int(u))
            frontier = nxt
        return dist

    hops = _kernels.hop_matrix(g.indptr, g.indices, cap)
    for s in range(g.num_nodes):
        full = bfs(s)
        for t in range(g.num_nodes):
            expected = full.get(t, g.num_nodes + 1)
            if expected > cap:
                expected = g.num_nodes + 1
            assert hops[s, t] == expected


def test_signature_rows_are_canonical():
    g = erdos_renyi(6, 0.5, np.random.default_rng(0))
    colors = np.array([1, 0, 1, 2, 0, 1])
    max_deg = int(g.degrees.max(initial=0))
    sig = _kernels.wl_signatures(g.indptr, g.indices, colors, max_deg)
    for v in range(g.num_nodes):
        row = sig[v]
        assert row[0] == colors[v]
        block = row[1:]
        assert list(block) == sorted(block)
        neigh = sorted(colors[g.neighbors(v)].tolist())
        assert [c for c in block if c >= 0] == neigh


def test_mis_output_is_independent_and_maximal():
    g, rng = random_csr(3, n_lo=6, n_hi=20)
    order = rng.permutation(g.num_nodes)
    picked = _kernels.greedy_mis(g.indptr, g.indices, order)
    chosen = np.flatnonzero(picked)
    chosen_set = set(chosen.tolist())
    for v in chosen:
        assert not (set(g.neighbors(v).tolist()) & chosen_set)
    for v in range(g.num_nodes):
        if v not in chosen_set:
            assert set(g.neighbors(v).tolist()) & chosen_set
