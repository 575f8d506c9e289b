"""1-WL color refinement, distinguishability decisions, and canonical
multiset digests.

Two graphs are refined jointly so their node colors come from one shared
palette and the per-graph color histograms are directly comparable. A color
update replaces each node's color with a canonical re-indexing of
(own color, sorted multiset of neighbor colors); re-indexing compares the
full signatures, so color collisions are impossible. Stabilization is
detected by partition equality, and refinement of n nodes stabilizes within
n rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import wl_signatures
from .graphs import INT_MODE, Graph

INIT_MODES = ("uniform", "from-labels", "from-integer-features")


@dataclass(frozen=True)
class ColoringResult:
    """Stable coloring of one graph from a joint refinement run."""

    colors: np.ndarray
    histogram: tuple
    rounds: int


@dataclass(frozen=True)
class MultisetDigest:
    """Canonical byte string identifying a multiset of feature rows."""

    digest: bytes
    mode: str


# ---------------------------------------------------------------------------
# Joint refinement
# ---------------------------------------------------------------------------


def _reindex_rows(sig: np.ndarray):
    """Contiguous ids for distinct rows, ordered lexicographically."""
    n, width = sig.shape
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0
    base = max(int(sig.max()) + 2, 2)
    if width * math.log2(base) <= 62:
        # positional encoding keeps lexicographic order, so ids match the
        # slow path exactly
        code = (sig[:, 0] + 1).astype(np.int64)
        for j in range(1, width):
            code = code * base + (sig[:, j] + 1)
        _, inv = np.unique(code, return_inverse=True)
    else:
        _, inv = np.unique(sig, axis=0, return_inverse=True)
    inv = np.asarray(inv, dtype=np.int64).ravel()
    return inv, int(inv.max()) + 1


def _canonical_1d(values: np.ndarray):
    _, inv = np.unique(values, return_inverse=True)
    inv = np.asarray(inv, dtype=np.int64).ravel()
    return inv, (int(inv.max()) + 1 if inv.size else 0)


def _same_partition(old, new, old_count, new_count) -> bool:
    if old_count != new_count:
        return False
    pair = old * np.int64(new_count) + new
    return int(np.unique(pair).size) == new_count


def _split_histograms(colors, count, n1):
    h1 = np.bincount(colors[:n1], minlength=count)
    h2 = np.bincount(colors[n1:], minlength=count)
    return h1, h2


def _union_csr(g1: Graph, g2: Graph):
    n1 = g1.num_nodes
    indptr = np.concatenate([g1.indptr, g1.indptr[-1] + g2.indptr[1:]])
    indices = np.concatenate([g1.indices, g2.indices + n1])
    max_deg = int(max(g1.degrees.max(initial=0), g2.degrees.max(initial=0)))
    return indptr, indices, max_deg


def _initial_colors(g1: Graph, g2: Graph, init: str) -> np.ndarray:
    if init not in INIT_MODES:
        raise ValueError(f"init must be one of {INIT_MODES}, got {init!r}")
    n = g1.num_nodes + g2.num_nodes
    if init == "uniform":
        return np.zeros(n, dtype=np.int64)
    if init == "from-labels":
        if g1.node_labels is None or g2.node_labels is None:
            raise ValueError("from-labels init requires node labels on both graphs")
        colors, _ = _canonical_1d(np.concatenate([g1.node_labels, g2.node_labels]))
        return colors
    if g1.feature_mode != INT_MODE or g2.feature_mode != INT_MODE:
        raise ValueError(
            "from-integer-features init requires exact-integer feature mode"
        )
    rows = np.concatenate([g1.node_features, g2.node_features])
    colors, _ = _reindex_rows(rows)
    return colors


def default_init(g1: Graph, g2: Graph) -> str:
    """Label init when both graphs carry labels, else integer features, else uniform."""
    if g1.node_labels is not None and g2.node_labels is not None:
        return "from-labels"
    if g1.feature_mode == INT_MODE and g2.feature_mode == INT_MODE:
        return "from-integer-features"
    return "uniform"


def _refine(indptr, indices, max_deg, colors, split=None, stop_at_divergence=False,
            max_rounds=None):
    """Iterate color updates; returns (colors, count, rounds, divergence_round).

    ``divergence_round`` is the first round (0 = initial colors) at which the
    two sides of ``split`` show different color histograms, or None. With
    ``stop_at_divergence`` the loop exits as soon as that happens; divergence
    is monotone, so later rounds cannot undo it.
    """
    n = colors.size
    colors, count = _canonical_1d(colors)
    if n == 0:
        return colors, count, 0, None
    divergence = None
    if split is not None:
        h1, h2 = _split_histograms(colors, count, split)
        if not np.array_equal(h1, h2):
            divergence = 0
            if stop_at_divergence:
                return colors, count, 0, divergence
    limit = n if max_rounds is None else min(max_rounds, n)
    rounds = 0
    while rounds < limit:
        sig = wl_signatures(indptr, indices, colors, max_deg)
        new_colors, new_count = _reindex_rows(sig)
        rounds += 1
        if divergence is None and split is not None:
            h1, h2 = _split_histograms(new_colors, new_count, split)
            if not np.array_equal(h1, h2):
                divergence = rounds
                if stop_at_divergence:
                    return new_colors, new_count, rounds, divergence
        stable = _same_partition(colors, new_colors, count, new_count)
        colors, count = new_colors, new_count
        if stable:
            break
    return colors, count, rounds, divergence


def joint_coloring(g1: Graph, g2: Graph, init: str | None = None,
                   rounds: int | None = None):
    """Refine both graphs on a shared palette.

    Returns (colors1, colors2, palette_size, rounds_run). ``rounds=None``
    refines to stabilization, otherwise exactly ``rounds`` update steps are
    applied (fewer if the partition stabilizes first, which changes nothing).
    """
    if init is None:
        init = default_init(g1, g2)
    indptr, indices, max_deg = _union_csr(g1, g2)
    colors = _initial_colors(g1, g2, init)
    colors, count, rounds_run, _ = _refine(
        indptr, indices, max_deg, colors, max_rounds=rounds
    )
    n1 = g1.num_nodes
    return colors[:n1], colors[n1:], count, rounds_run


def wl_refine_joint(g1: Graph, g2: Graph, init: str = "uniform"):
    """Joint refinement to stabilization; one ColoringResult per graph."""
    indptr, indices, max_deg = _union_csr(g1, g2)
    colors = _initial_colors(g1, g2, init)
    colors, count, rounds, _ = _refine(indptr, indices, max_deg, colors)
    n1 = g1.num_nodes

    def result(part):
        hist = np.bincount(part, minlength=count)
        histogram = tuple((int(c), int(k)) for c, k in enumerate(hist) if k)
        return ColoringResult(colors=part, histogram=histogram, rounds=rounds)

    return result(colors[:n1]), result(colors[n1:])


def refinement_divergence_round(g1: Graph, g2: Graph, init: str | None = None):
    """First round at which the color histograms differ, or None.

    Round 0 means the initial colorings already differ; graphs of different
    size differ at round 0 by definition.
    """
    if g1.num_nodes != g2.num_nodes:
        return 0
    if init is None:
        init = default_init(g1, g2)
    colors = _initial_colors(g1, g2, init)
    if colors.size and colors.max() == 0:
        # constant initial coloring: the round-1 split is exactly the degree
        # split, so differing degree histograms decide without refining
        width = int(max(g1.degrees.max(initial=0), g2.degrees.max(initial=0))) + 1
        h1 = np.bincount(g1.degrees, minlength=width)
        h2 = np.bincount(g2.degrees, minlength=width)
        if not np.array_equal(h1, h2):
            return 1
    indptr, indices, max_deg = _union_csr(g1, g2)
    _, _, _, divergence = _refine(
        indptr, indices, max_deg, colors, split=g1.num_nodes, stop_at_divergence=True
    )
    return divergence


def wl_distinguishable(g1: Graph, g2: Graph) -> bool:
    """True iff stable refinement histograms differ.

    Graphs of different size are distinguishable outright. Initial colors
    come from node labels when both graphs carry them, else from exact
    integer features, else a uniform coloring.
    """
    return refinement_divergence_round(g1, g2) is not None


# ---------------------------------------------------------------------------
# Multiset digests
# ---------------------------------------------------------------------------


def multiset_digest(rows, mode: str | None = None, eps: float = 1e-8) -> MultisetDigest:
    """Canonical digest of a multiset of feature rows.

    Two digests are equal iff the row multisets are equal: exactly in
    ``"int"`` mode, and up to per-component quantization round(x / eps) in
    ``"real"`` mode. The digest is the full canonical byte string, so there
    is no collision risk.
    """
    arr = np.asarray(rows)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("multiset_digest requires a non-empty 2-D matrix")
    if mode is None:
        mode = INT_MODE if np.issubdtype(arr.dtype, np.integer) else "real"
    if mode == INT_MODE:
        canon = np.asarray(arr, dtype=np.int64)
        if not np.array_equal(canon, arr):
            raise ValueError("int mode requires integer-valued rows")
        tag = "int"
    elif mode == "real":
        arr = np.asarray(arr, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise ValueError("non-finite rows rejected in real mode")
        scaled = np.round(arr / eps)
        if np.abs(scaled).max(initial=0.0) >= 2.0**62:
            raise ValueError("values too large for the requested quantization")
        canon = scaled.astype(np.int64)
        tag = f"real:{eps:g}"
    else:
        raise ValueError(f"unknown digest mode {mode!r}")
    order = np.lexsort(canon.T[::-1])
    canon = np.ascontiguousarray(canon[order])
    header = f"{tag}|{canon.shape[0]}x{canon.shape[1]}|".encode()
    return MultisetDigest(digest=header + canon.tobytes(), mode=tag)


# ---------------------------------------------------------------------------
# Exhaustive isomorphism (small graphs)
# ---------------------------------------------------------------------------

_BRUTE_FORCE_LIMIT = 10


def brute_force_isomorphic(g1: Graph, g2: Graph) -> bool:
    """Exact isomorphism by backtracking search with degree pruning.

    Respects node features (and labels when present): a witnessing bijection
    must map nodes onto nodes with identical feature rows. Limited to graphs
    of at most 10 nodes.
    """
    if g1.num_nodes > _BRUTE_FORCE_LIMIT or g2.num_nodes > _BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"brute-force isomorphism is limited to {_BRUTE_FORCE_LIMIT} nodes"
        )
    n = g1.num_nodes
    if g2.num_nodes != n or g1.num_edges != g2.num_edges:
        return False
    if (g1.node_labels is None) != (g2.node_labels is None):
        return False

    def node_key(g, v):
        label = None if g.node_labels is None else int(g.node_labels[v])
        return (int(g.degrees[v]), g.node_features[v].tobytes(), label)

    keys1 = [node_key(g1, v) for v in range(n)]
    keys2 = [node_key(g2, v) for v in range(n)]
    if sorted(keys1) != sorted(keys2):
        return False

    adj1 = [set(g1.neighbors(v).tolist()) for v in range(n)]
    adj2 = [set(g2.neighbors(v).tolist()) for v in range(n)]
    order = sorted(range(n), key=lambda v: (-len(adj1[v]), v))
    mapping = [-1] * n
    used = [False] * n

    def extend(pos: int) -> bool:
        if pos == n:
            return True
        v = order[pos]
        for u in range(n):
            if used[u] or keys2[u] != keys1[v]:
                continue
            ok = True
            for w in order[:pos]:
                if (w in adj1[v]) != (mapping[w] in adj2[u]):
                    ok = False
                    break
            if ok:
                mapping[v] = u
                used[u] = True
                if extend(pos + 1):
                    return True
                used[u] = False
                mapping[v] = -1
        return False

    return extend(0)
