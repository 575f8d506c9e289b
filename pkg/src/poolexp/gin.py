"""Forward-only message passing: GIN updates, seeded random MLPs, global
readouts, and the exact one-hot color embedding.

Nothing here is trained. MLP weights are drawn once from a seeded generator,
so every forward pass is a pure function of its inputs. The exact embedding
one-hot-encodes joint refinement colors, which makes the sum over node
features an injective multiset encoding for integer inputs: the column-sum
vectors of two embeddings differ exactly when the color histograms differ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import INT_MODE, REAL_MODE, Graph
from .wl import joint_coloring

ACTIVATIONS = ("elu", "relu", "identity")
READOUTS = ("sum", "mean", "max")


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Per-node feature rows plus the arithmetic mode they live in."""

    values: np.ndarray
    mode: str

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 2:
            raise ValueError(f"embedding must be 2-D, got shape {arr.shape}")
        if self.mode not in (INT_MODE, REAL_MODE):
            raise ValueError(f"unknown embedding mode {self.mode!r}")
        if self.mode == REAL_MODE and not np.isfinite(arr).all():
            raise ValueError("real embeddings must be finite")
        object.__setattr__(self, "values", arr)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @staticmethod
    def from_graph(g: Graph) -> "EmbeddingMatrix":
        return EmbeddingMatrix(g.node_features, g.feature_mode)

    def as_real(self) -> "EmbeddingMatrix":
        if self.mode == REAL_MODE:
            return self
        return EmbeddingMatrix(self.values.astype(np.float64), REAL_MODE)


@dataclass(frozen=True)
class MlpSpec:
    """Architecture and seed of a random-weight MLP.

    ``layer_widths[0]`` is the input width; a single-entry list is the
    identity map. Weights and biases are uniform in
    [-weight_scale, +weight_scale], drawn from ``seed`` in a fixed order.
    """

    layer_widths: tuple
    activation: str = "elu"
    seed: int = 0
    weight_scale: float = 1.0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if not widths or any(w < 1 for w in widths):
            raise ValueError(f"layer widths must be positive, got {widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        object.__setattr__(self, "layer_widths", widths)


@dataclass(frozen=True)
class GinLayer:
    """One sum-aggregation update: mlp((1 + epsilon) * x_v + sum of neighbors).

    The self term is carried by the (1 + epsilon) factor and the neighbor sum
    runs over the open neighborhood; ``closed_neighborhood`` adds x_v to the
    aggregate as well for the closed-neighborhood reading.
    """

    epsilon: float = 0.0
    mlp: MlpSpec | None = None
    closed_neighborhood: bool = False


def _activate(h: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(h, 0.0)
    if kind == "elu":
        # exponentiate only the negative part to keep large lanes overflow-free
        return np.where(h > 0, h, np.expm1(np.minimum(h, 0.0)))
    return h


def mlp_parameters(spec: MlpSpec):
    """Weight/bias list for the spec, deterministic for a fixed seed."""
    rng = np.random.default_rng(spec.seed)
    params = []
    widths = spec.layer_widths
    for w_in, w_out in zip(widths[:-1], widths[1:]):
        w = rng.uniform(-spec.weight_scale, spec.weight_scale, size=(w_in, w_out))
        b = rng.uniform(-spec.weight_scale, spec.weight_scale, size=w_out)
        params.append((w, b))
    return params


def random_mlp_forward(x: EmbeddingMatrix, spec: MlpSpec) -> EmbeddingMatrix:
    """Apply the seeded MLP; activation on every layer except the last."""
    if x.width != spec.layer_widths[0]:
        raise ValueError(
            f"input width {x.width} does not match spec width {spec.layer_widths[0]}"
        )
    params = mlp_parameters(spec)
    if not params:
        return x
    h = x.values.astype(np.float64)
    last = len(params) - 1
    for i, (w, b) in enumerate(params):
        h = h @ w + b
        if i != last:
            h = _activate(h, spec.activation)
        if not np.isfinite(h).all():
            raise FloatingPointError(f"non-finite values after mlp layer {i}")
    return EmbeddingMatrix(h, REAL_MODE)


def neighbor_sum(g: Graph, values: np.ndarray) -> np.ndarray:
    """Row v gets the sum of feature rows over v's neighbors."""
    out = np.zeros_like(values)
    if g.edges.size:
        u, v = g.edges[:, 0], g.edges[:, 1]
        plain = u != v
        np.add.at(out, u[plain], values[v[plain]])
        np.add.at(out, v[plain], values[u[plain]])
        loops = u[~plain]
        if loops.size:
            np.add.at(out, loops, values[loops])
    return out


def _gin_aggregate(values: np.ndarray, neigh: np.ndarray, layer: GinLayer):
    factor = 1.0 + layer.epsilon
    integral = np.issubdtype(values.dtype, np.integer) and float(factor).is_integer()
    if integral:
        pre = np.int64(factor) * values + neigh
    else:
        pre = factor * values.astype(np.float64) + neigh.astype(np.float64)
        integral = False
    if layer.closed_neighborhood:
        pre = pre + values
    return pre, integral


def gin_forward(g: Graph, x: EmbeddingMatrix, layer: GinLayer) -> EmbeddingMatrix:
    """One GIN update over the graph's adjacency."""
    if x.rows != g.num_nodes:
        raise ValueError(
            f"embedding has {x.rows} rows for a graph with {g.num_nodes} nodes"
        )
    pre, integral = _gin_aggregate(x.values, neighbor_sum(g, x.values), layer)
    if layer.mlp is None:
        return EmbeddingMatrix(pre, INT_MODE if integral and x.mode == INT_MODE else REAL_MODE)
    return random_mlp_forward(EmbeddingMatrix(pre.astype(np.float64), REAL_MODE), layer.mlp)


def gin_forward_dense(adjacency: np.ndarray, x: EmbeddingMatrix, layer: GinLayer) -> EmbeddingMatrix:
    """GIN update against an explicit (possibly weighted) adjacency matrix."""
    adjacency = np.asarray(adjacency)
    if adjacency.shape != (x.rows, x.rows):
        raise ValueError(
            f"adjacency shape {adjacency.shape} does not match {x.rows} nodes"
        )
    neigh = adjacency @ x.values
    pre, integral = _gin_aggregate(x.values, neigh, layer)
    if layer.mlp is None:
        keep_int = integral and x.mode == INT_MODE and np.issubdtype(adjacency.dtype, np.integer)
        return EmbeddingMatrix(pre, INT_MODE if keep_int else REAL_MODE)
    return random_mlp_forward(EmbeddingMatrix(pre.astype(np.float64), REAL_MODE), layer.mlp)


def global_readout(x: EmbeddingMatrix, kind: str = "sum") -> np.ndarray:
    """Component-wise aggregate over all node rows."""
    if kind not in READOUTS:
        raise ValueError(f"readout must be one of {READOUTS}")
    if x.rows == 0:
        raise ValueError("readout of an empty embedding")
    if kind == "sum":
        return x.values.sum(axis=0)
    if kind == "max":
        return x.values.max(axis=0)
    return x.values.mean(axis=0)


def exact_color_embedding(g1: Graph, g2: Graph, rounds: int | None = None):
    """One-hot refinement colors over a joint palette, as integer embeddings.

    With ``rounds=None`` refinement runs to stabilization. The column sums of
    the two embeddings differ exactly when the color histograms at that round
    differ, which is the injectivity handle the exact checks rely on.
    """
    c1, c2, palette, _ = joint_coloring(g1, g2, rounds=rounds)
    width = max(palette, 1)

    def one_hot(colors, n):
        m = np.zeros((n, width), dtype=np.int64)
        if n:
            m[np.arange(n), colors] = 1
        return m

    return (
        EmbeddingMatrix(one_hot(c1, g1.num_nodes), INT_MODE),
        EmbeddingMatrix(one_hot(c2, g2.num_nodes), INT_MODE),
    )
