"""Immutable undirected graphs with node features, JSONL pair datasets, and
a seeded generator of refinement-distinguishable graph pairs.

Graphs carry a feature-mode tag: ``"int"`` features support the exact
(integer-arithmetic) checks, ``"real"`` features go through the float
pipeline with quantized comparisons. A dataset never mixes modes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

INT_MODE = "int"
REAL_MODE = "real"


class DatasetFormatError(ValueError):
    """A dataset file or record violates the JSONL pair schema."""


class GenerationError(RuntimeError):
    """The pair generator exhausted its attempt budget."""


def _as_edge_array(edges) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"edges must be pairs, got shape {arr.shape}")
    return arr


class Graph:
    """Undirected graph with one feature row per node.

    Edges are canonicalized to sorted (u, v) pairs with u < v and stored in
    lexicographic order; adjacency is kept in CSR form with neighbor lists
    sorted by node id. Downstream greedy operators rely on that deterministic
    order. Instances are immutable: all arrays are frozen after construction.
    """

    __slots__ = (
        "num_nodes",
        "edges",
        "node_features",
        "feature_mode",
        "node_labels",
        "indptr",
        "indices",
    )

    def __init__(
        self,
        num_nodes: int,
        edges,
        node_features=None,
        feature_mode: str | None = None,
        node_labels=None,
        allow_self_loops: bool = False,
    ):
        n = int(num_nodes)
        if n < 0:
            raise ValueError(f"num_nodes must be >= 0, got {n}")
        arr = _as_edge_array(edges)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            bad = arr[(arr < 0).any(axis=1) | (arr >= n).any(axis=1)][0]
            raise ValueError(
                f"edge ({bad[0]}, {bad[1]}) out of range: node indices must "
                f"lie in [0, {n})"
            )
        loops = arr[:, 0] == arr[:, 1]
        if loops.any() and not allow_self_loops:
            v = arr[loops][0, 0]
            raise ValueError(f"self-loop at node {v} (self-loops are rejected)")
        arr = np.sort(arr, axis=1)
        if arr.size:
            order = np.lexsort((arr[:, 1], arr[:, 0]))
            arr = arr[order]
            dup = (arr[1:] == arr[:-1]).all(axis=1)
            if dup.any():
                u, v = arr[1:][dup][0]
                raise ValueError(f"duplicate edge ({u}, {v})")

        if node_features is None:
            feats = np.ones((n, 1), dtype=np.int64)
        else:
            feats = np.asarray(node_features)
        if feats.ndim != 2:
            raise ValueError(f"node_features must be 2-D, got shape {feats.shape}")
        if feats.shape[0] != n:
            raise ValueError(
                f"node_features has {feats.shape[0]} rows, expected {n}"
            )
        if feats.shape[1] < 1:
            raise ValueError("feature dimension must be >= 1")

        if feature_mode is None:
            feature_mode = INT_MODE if np.issubdtype(feats.dtype, np.integer) else REAL_MODE
        if feature_mode == INT_MODE:
            as_int = np.asarray(feats, dtype=np.int64)
            if not np.array_equal(as_int, feats):
                raise ValueError("int feature mode requires integer feature values")
            if (as_int < 0).any():
                raise ValueError("int feature mode requires non-negative features")
            feats = as_int
        elif feature_mode == REAL_MODE:
            feats = np.asarray(feats, dtype=np.float64)
            if not np.isfinite(feats).all():
                raise ValueError("real features must be finite")
        else:
            raise ValueError(f"unknown feature mode {feature_mode!r}")

        labels = None
        if node_labels is not None:
            labels = np.asarray(node_labels, dtype=np.int64)
            if labels.shape != (n,):
                raise ValueError(
                    f"node_labels has shape {labels.shape}, expected ({n},)"
                )

        # CSR adjacency, neighbors sorted ascending (self-loops contribute once)
        degs = np.zeros(n, dtype=np.int64)
        if arr.size:
            both = np.concatenate([arr[:, 0], arr[arr[:, 0] != arr[:, 1], 1]])
            degs = np.bincount(both, minlength=n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(degs, out=indptr[1:])
        indices = np.empty(indptr[-1], dtype=np.int64)
        cursor = indptr[:-1].copy()
        for u, v in arr:
            indices[cursor[u]] = v
            cursor[u] += 1
            if u != v:
                indices[cursor[v]] = u
                cursor[v] += 1
        for v in range(n):
            indices[indptr[v]:indptr[v + 1]].sort()

        for a in (arr, feats, indptr, indices, labels):
            if a is not None:
                a.setflags(write=False)
        self.num_nodes = n
        self.edges = arr
        self.node_features = feats
        self.feature_mode = feature_mode
        self.node_labels = labels
        self.indptr = indptr
        self.indices = indices

    # -- accessors ---------------------------------------------------------

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.node_features.shape[1]

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def adjacency_matrix(self) -> np.ndarray:
        adj = np.zeros((self.num_nodes, self.num_nodes), dtype=np.int64)
        if self.edges.size:
            u, v = self.edges[:, 0], self.edges[:, 1]
            adj[u, v] = 1
            adj[v, u] = 1
        return adj

    def with_features(self, node_features, feature_mode=None) -> "Graph":
        return Graph(
            self.num_nodes,
            self.edges,
            node_features=node_features,
            feature_mode=feature_mode,
            node_labels=self.node_labels,
        )

    def permuted(self, perm) -> "Graph":
        """Relabel node i as perm[i], carrying features and labels along."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.num_nodes)):
            raise ValueError("perm must be a permutation of node indices")
        inv = np.empty_like(perm)
        inv[perm] = np.arange(self.num_nodes)
        edges = perm[self.edges] if self.edges.size else self.edges
        labels = None if self.node_labels is None else self.node_labels[inv]
        return Graph(
            self.num_nodes,
            edges,
            node_features=self.node_features[inv],
            feature_mode=self.feature_mode,
            node_labels=labels,
        )

    def __repr__(self):
        return (
            f"Graph(n={self.num_nodes}, m={self.num_edges}, "
            f"f={self.feature_dim}:{self.feature_mode})"
        )


def graphs_equal(a: Graph, b: Graph) -> bool:
    """Structural equality: same nodes, edge set, features, and labels."""
    if a.num_nodes != b.num_nodes or a.feature_mode != b.feature_mode:
        return False
    if not np.array_equal(a.edges, b.edges):
        return False
    if a.feature_mode == INT_MODE:
        if not np.array_equal(a.node_features, b.node_features):
            return False
    elif not np.allclose(a.node_features, b.node_features, atol=0, rtol=0):
        return False
    if (a.node_labels is None) != (b.node_labels is None):
        return False
    if a.node_labels is not None and not np.array_equal(a.node_labels, b.node_labels):
        return False
    return True


# ---------------------------------------------------------------------------
# Small constructors
# ---------------------------------------------------------------------------


def path_graph(n: int, **kw) -> Graph:
    return Graph(n, [(i, i + 1) for i in range(n - 1)], **kw)


def cycle_graph(n: int, **kw) -> Graph:
    return Graph(n, [(i, (i + 1) % n) for i in range(n)], **kw)


def complete_graph(n: int, **kw) -> Graph:
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)], **kw)


def empty_graph(n: int, **kw) -> Graph:
    return Graph(n, [], **kw)


def disjoint_union(a: Graph, b: Graph) -> Graph:
    if a.feature_mode != b.feature_mode or a.feature_dim != b.feature_dim:
        raise ValueError("cannot union graphs with different feature layouts")
    edges = np.concatenate([a.edges, b.edges + a.num_nodes]) if (a.edges.size or b.edges.size) else []
    feats = np.concatenate([a.node_features, b.node_features])
    labels = None
    if a.node_labels is not None and b.node_labels is not None:
        labels = np.concatenate([a.node_labels, b.node_labels])
    return Graph(
        a.num_nodes + b.num_nodes,
        edges,
        node_features=feats,
        feature_mode=a.feature_mode,
        node_labels=labels,
    )


def erdos_renyi(n: int, p: float, rng: np.random.Generator, **kw) -> Graph:
    iu = np.triu_indices(n, k=1)
    mask = rng.random(iu[0].size) < p
    edges = np.stack([iu[0][mask], iu[1][mask]], axis=1)
    return Graph(n, edges, **kw)


def complement(g: Graph) -> Graph:
    """Complement over unordered node pairs; features copied unchanged."""
    if g.edges.size and (g.edges[:, 0] == g.edges[:, 1]).any():
        raise ValueError("complement requires a self-loop-free graph")
    adj = g.adjacency_matrix().astype(bool)
    comp = ~adj
    np.fill_diagonal(comp, False)
    u, v = np.nonzero(np.triu(comp, k=1))
    return Graph(
        g.num_nodes,
        np.stack([u, v], axis=1),
        node_features=g.node_features,
        feature_mode=g.feature_mode,
        node_labels=g.node_labels,
    )


def is_connected(g: Graph) -> bool:
    if g.num_nodes == 0:
        return True
    seen = np.zeros(g.num_nodes, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        v = stack.pop()
        for u in g.neighbors(v):
            if not seen[u]:
                seen[u] = True
                stack.append(u)
    return bool(seen.all())


# ---------------------------------------------------------------------------
# Pairs and datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphPair:
    left: Graph
    right: Graph
    label_left: int = 0
    label_right: int = 1
    claimed_wl_distinguishable: bool = True


@dataclass(frozen=True)
class DatasetStats:
    num_graphs: int
    num_pairs: int
    mean_nodes: float
    mean_edges: float
    feature_dim: int


def dataset_stats(pairs) -> DatasetStats:
    pairs = list(pairs)
    if not pairs:
        raise DatasetFormatError("empty dataset: no pairs to summarize")
    graphs = [g for p in pairs for g in (p.left, p.right)]
    return DatasetStats(
        num_graphs=len(graphs),
        num_pairs=len(pairs),
        mean_nodes=float(np.mean([g.num_nodes for g in graphs])),
        mean_edges=float(np.mean([g.num_edges for g in graphs])),
        feature_dim=graphs[0].feature_dim,
    )


def _graph_record(g: Graph) -> dict:
    rec = {
        "n": g.num_nodes,
        "edges": [[int(u), int(v)] for u, v in g.edges],
        "x": g.node_features.tolist(),
    }
    if g.node_labels is not None:
        rec["y"] = g.node_labels.tolist()
    return rec


def save_dataset(pairs, path) -> None:
    """Write pairs as JSON lines, one pair per line after a meta header."""
    pairs = list(pairs)
    if not pairs:
        raise DatasetFormatError("refusing to write an empty dataset")
    mode = pairs[0].left.feature_mode
    dim = pairs[0].left.feature_dim
    for i, p in enumerate(pairs):
        for side, g in (("left", p.left), ("right", p.right)):
            if g.feature_mode != mode or g.feature_dim != dim:
                raise DatasetFormatError(
                    f"pair {i} {side}: feature mode/dim {g.feature_mode}/{g.feature_dim} "
                    f"does not match dataset header {mode}/{dim}"
                )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"meta": {"feature_mode": mode, "feature_dim": dim}}) + "\n")
        for p in pairs:
            rec = {
                "left": _graph_record(p.left),
                "right": _graph_record(p.right),
                "label_left": int(p.label_left),
                "label_right": int(p.label_right),
                "wl_distinct": bool(p.claimed_wl_distinguishable),
            }
            fh.write(json.dumps(rec) + "\n")


def _parse_graph(obj, mode: str, dim: int, where: str, allow_self_loops: bool) -> Graph:
    if not isinstance(obj, dict):
        raise DatasetFormatError(f"{where}: graph record must be an object")
    for key in ("n", "edges", "x"):
        if key not in obj:
            raise DatasetFormatError(f"{where}: missing key {key!r}")
    feats = np.asarray(obj["x"], dtype=np.int64 if mode == INT_MODE else np.float64)
    if feats.ndim != 2 or feats.shape[1] != dim:
        raise DatasetFormatError(
            f"{where}: feature matrix shape {feats.shape} does not match "
            f"declared feature_dim {dim}"
        )
    try:
        return Graph(
            obj["n"],
            obj["edges"],
            node_features=feats,
            feature_mode=mode,
            node_labels=obj.get("y"),
            allow_self_loops=allow_self_loops,
        )
    except ValueError as exc:
        raise DatasetFormatError(f"{where}: {exc}") from exc


def load_dataset(path, format: str = "jsonl-pairs", verify_wl: bool = False,
                 allow_self_loops: bool = False):
    """Load a pair dataset, validating every record.

    ``jsonl-pairs`` is the only wire format. With ``verify_wl`` each pair
    claiming distinguishability is re-checked against the refinement test
    and mismatches fail fast.
    """
    if format != "jsonl-pairs":
        raise DatasetFormatError(f"unknown dataset format {format!r}")
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.strip():
            raise DatasetFormatError("line 1: expected meta header, got empty line")
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"line 1: invalid JSON: {exc}") from exc
        meta = header.get("meta")
        if not isinstance(meta, dict) or "feature_mode" not in meta:
            raise DatasetFormatError('line 1: expected {"meta": {"feature_mode": ...}} header')
        mode = meta["feature_mode"]
        if mode not in (INT_MODE, REAL_MODE):
            raise DatasetFormatError(f"line 1: unknown feature_mode {mode!r}")
        dim = int(meta.get("feature_dim", 1))

        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"line {lineno}: invalid JSON: {exc}") from exc
            for key in ("left", "right", "label_left", "label_right", "wl_distinct"):
                if key not in rec:
                    raise DatasetFormatError(f"line {lineno}: missing key {key!r}")
            left = _parse_graph(rec["left"], mode, dim, f"line {lineno}: left graph", allow_self_loops)
            right = _parse_graph(rec["right"], mode, dim, f"line {lineno}: right graph", allow_self_loops)
            pairs.append(
                GraphPair(
                    left=left,
                    right=right,
                    label_left=int(rec["label_left"]),
                    label_right=int(rec["label_right"]),
                    claimed_wl_distinguishable=bool(rec["wl_distinct"]),
                )
            )
    if verify_wl:
        from .wl import wl_distinguishable

        for i, p in enumerate(pairs):
            if p.claimed_wl_distinguishable and not wl_distinguishable(p.left, p.right):
                raise DatasetFormatError(
                    f"pair {i}: claimed wl_distinct=true but refinement cannot "
                    f"separate the graphs"
                )
    return pairs


# ---------------------------------------------------------------------------
# Pair generator
# ---------------------------------------------------------------------------


def _double_edge_swap(edge_set: set, rng: np.random.Generator, tries: int = 40):
    """One degree-preserving rewire of two disjoint edges, or None."""
    edges = list(edge_set)
    for _ in range(tries):
        i, j = rng.integers(0, len(edges), size=2)
        if i == j:
            continue
        (a, b), (c, d) = edges[i], edges[j]
        if rng.random() < 0.5:
            c, d = d, c
        # candidate rewire: (a, c) and (b, d)
        if a == c or b == d:
            continue
        e1 = (min(a, c), max(a, c))
        e2 = (min(b, d), max(b, d))
        if e1 in edge_set or e2 in edge_set:
            continue
        new = set(edge_set)
        new.discard(edges[i])
        new.discard(edges[j])
        new.add(e1)
        new.add(e2)
        return new
    return None


def _degree_perturbation(edge_set: set, n: int, rng: np.random.Generator):
    """Move one edge to a random vacant slot, changing the degree sequence."""
    edges = list(edge_set)
    if not edges:
        return None
    for _ in range(40):
        u, v = rng.integers(0, n, size=2)
        if u == v:
            continue
        cand = (min(u, v), max(u, v))
        if cand in edge_set:
            continue
        drop = edges[rng.integers(0, len(edges))]
        new = set(edge_set)
        new.discard(drop)
        new.add(cand)
        return new
    return None


def generate_wl_pairs(count: int, nodes=(16, 32), seed: int = 0, difficulty: int = 1,
                      max_attempts: int = 400):
    """Generate connected same-size pairs separated by color refinement.

    Each pair is a base graph plus a rewired twin, rejected until the joint
    refinement first tells them apart at round >= ``difficulty`` and (for
    small graphs) an exhaustive isomorphism check confirms the pair is
    genuinely non-isomorphic. Deterministic: pair i draws its own generator
    from (seed, i).
    """
    from .wl import brute_force_isomorphic, refinement_divergence_round

    if count < 1:
        raise ValueError("count must be >= 1")
    lo, hi = int(nodes[0]), int(nodes[1])
    if lo < 4:
        raise ValueError("node range lower bound must be >= 4")
    if hi < lo:
        raise ValueError(f"invalid node range [{lo}, {hi}]")
    if difficulty < 1:
        raise ValueError("difficulty must be >= 1")

    pairs = []
    for index in range(count):
        rng = np.random.default_rng([seed, index])
        pair = None
        for attempt in range(max_attempts):
            n = int(rng.integers(lo, hi + 1))
            p_lo = min(0.5, 1.3 * math.log(max(n, 2)) / n)
            base = erdos_renyi(n, rng.uniform(p_lo, min(0.95, p_lo + 0.25)), rng)
            if base.num_edges < 2 or not is_connected(base):
                continue
            edge_set = {(int(u), int(v)) for u, v in base.edges}
            relax = difficulty == 1 and attempt >= max_attempts // 2
            twisted = (
                _degree_perturbation(edge_set, n, rng)
                if relax
                else _double_edge_swap(edge_set, rng)
            )
            if twisted is None:
                continue
            twin = Graph(n, sorted(twisted))
            if not is_connected(twin):
                continue
            div = refinement_divergence_round(base, twin)
            if div is None or div < difficulty:
                continue
            if n <= 10 and brute_force_isomorphic(base, twin):
                continue
            pair = GraphPair(left=base, right=twin)
            break
        if pair is None:
            raise GenerationError(
                f"pair {index}: no pair with divergence round >= {difficulty} "
                f"found in {max_attempts} attempts (nodes in [{lo}, {hi}])"
            )
        pairs.append(pair)
    return pairs
