"""Structural expressiveness checks and the distinguishability oracle.

A pooling operator provably preserves refinement-distinguishability when,
on top of an injective pre-pool encoding (condition 1, realized here by the
exact one-hot color embedding), its assignment rows all sum to one common
positive constant (condition 2) and its reduction is S^T X (condition 3,
optionally r-weighted for edge contraction). The oracle runs that argument
forward on a concrete pair: build the exact embeddings, pool both sides,
and compare canonical feature multisets.

For operators that fail the conditions no guarantee exists; their empirical
behavior is measured by pooling the pair's stored features directly and
comparing what comes out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gin import (
    EmbeddingMatrix,
    GinLayer,
    MlpSpec,
    exact_color_embedding,
    gin_forward,
    gin_forward_dense,
    global_readout,
)
from .graphs import REAL_MODE, Graph, GraphPair
from .pooling import (
    AssignmentMatrix,
    PoolConfig,
    PooledGraph,
    pool,
    topk_pool_with_scores,
)
from .wl import multiset_digest, wl_distinguishable

DEFAULT_TOL = 1e-9


class NotDistinguishableError(ValueError):
    """The oracle was handed a pair refinement cannot separate."""


@dataclass(frozen=True)
class Condition2Result:
    """Do all assignment rows sum to one common positive constant?"""

    passed: bool
    lambda_estimate: float
    max_deviation: float
    violating_rows: tuple
    tolerance: float


@dataclass(frozen=True)
class Condition3Result:
    """Is the pooled feature matrix S^T X (or r * S^T X when r is declared)?"""

    passed: bool
    max_deviation: float
    r_weighted: bool
    tolerance: float


@dataclass(frozen=True)
class ConditionReport:
    operator_id: str
    cond2: Condition2Result
    cond3: Condition3Result
    tolerance: float

    @property
    def conditions_met(self) -> bool:
        return self.cond2.passed and self.cond3.passed


@dataclass(frozen=True)
class DistinguishabilityVerdict:
    pair_id: int
    pre_pool_distinct: bool
    post_pool_distinct: bool
    operator_id: str
    mode: str
    detail: str = ""


def check_condition2(s, tol: float = DEFAULT_TOL) -> Condition2Result:
    """Row sums must equal a common lambda > 0, estimated as the median."""
    dense = s.dense if isinstance(s, AssignmentMatrix) else np.asarray(s)
    if dense.size == 0:
        raise ValueError("empty assignment matrix")
    row_sums = dense.sum(axis=1).astype(np.float64)
    lam = float(np.median(row_sums))
    deviation = np.abs(row_sums - lam)
    bad = np.nonzero(deviation > tol)[0]
    passed = bad.size == 0 and lam > tol
    return Condition2Result(
        passed=bool(passed),
        lambda_estimate=lam,
        max_deviation=float(deviation.max()),
        violating_rows=tuple((int(i), float(row_sums[i])) for i in bad[:16]),
        tolerance=tol,
    )


def check_condition3(x, s, x_pooled, aux_r=None, tol: float = DEFAULT_TOL) -> Condition3Result:
    """Compare the pooled features against S^T X (r-weighted when given)."""
    dense = s.dense if isinstance(s, AssignmentMatrix) else np.asarray(s)
    x = x.values if isinstance(x, EmbeddingMatrix) else np.asarray(x)
    x_pooled = x_pooled.values if isinstance(x_pooled, EmbeddingMatrix) else np.asarray(x_pooled)
    if dense.shape[0] != x.shape[0]:
        raise ValueError(
            f"assignment has {dense.shape[0]} rows but features have {x.shape[0]}"
        )
    if x_pooled.shape != (dense.shape[1], x.shape[1]):
        raise ValueError(
            f"pooled features shape {x_pooled.shape} does not match "
            f"({dense.shape[1]}, {x.shape[1]})"
        )
    expected = dense.astype(np.float64).T @ x.astype(np.float64)
    r_weighted = aux_r is not None
    if r_weighted:
        expected = np.asarray(aux_r, dtype=np.float64)[:, None] * expected
    deviation = float(np.abs(x_pooled.astype(np.float64) - expected).max(initial=0.0))
    return Condition3Result(
        passed=deviation <= tol,
        max_deviation=deviation,
        r_weighted=r_weighted,
        tolerance=tol,
    )


def _merge_cond2(parts, tol):
    worst = max(parts, key=lambda p: p.max_deviation)
    passed = all(p.passed for p in parts)
    lam = parts[0].lambda_estimate if passed else worst.lambda_estimate
    return Condition2Result(
        passed=passed,
        lambda_estimate=lam,
        max_deviation=worst.max_deviation,
        violating_rows=worst.violating_rows,
        tolerance=tol,
    )


def _merge_cond3(parts, tol):
    worst = max(parts, key=lambda p: p.max_deviation)
    return Condition3Result(
        passed=all(p.passed for p in parts),
        max_deviation=worst.max_deviation,
        r_weighted=any(p.r_weighted for p in parts),
        tolerance=tol,
    )


def report_for_pooled(x: EmbeddingMatrix, pooled: PooledGraph, tol: float = DEFAULT_TOL) -> ConditionReport:
    """Condition report for one pooling run.

    Multi-level operators are audited level by level: each level is one
    select/reduce application, and a stack of passing levels passes.
    """
    cond2 = check_condition2(pooled.assignment, tol)
    levels = pooled.aux.get("levels")
    if levels:
        parts = [
            check_condition3(lv["x_in"], lv["assignment"], lv["x_out"], lv["r"], tol)
            for lv in levels
        ]
        cond3 = _merge_cond3(parts, tol)
    else:
        cond3 = check_condition3(
            x, pooled.assignment, pooled.features, pooled.aux.get("r"), tol
        )
    return ConditionReport(
        operator_id=pooled.operator_id, cond2=cond2, cond3=cond3, tolerance=tol
    )


def audit_operator(op: str, graphs, cfg: PoolConfig, tol: float = DEFAULT_TOL) -> ConditionReport:
    """Pool every sample graph and merge the per-run condition reports."""
    reports = []
    for g in graphs:
        x = EmbeddingMatrix.from_graph(g)
        reports.append(report_for_pooled(x, pool(op, g, x, cfg), tol))
    if not reports:
        raise ValueError("audit requires at least one sample graph")
    return ConditionReport(
        operator_id=op,
        cond2=_merge_cond2([r.cond2 for r in reports], tol),
        cond3=_merge_cond3([r.cond3 for r in reports], tol),
        tolerance=tol,
    )


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------


def _feature_digest(x: EmbeddingMatrix, eps: float):
    if np.issubdtype(x.values.dtype, np.integer):
        return multiset_digest(x.values, mode="int")
    return multiset_digest(x.values, mode="real", eps=eps)


def distinguishability_oracle(pair: GraphPair, op: str, cfg: PoolConfig, mode: str = "exact",
                    rounds: int | None = None, eps: float = 1e-9,
                    pair_id: int = 0) -> DistinguishabilityVerdict:
    """Exact distinguishability check through the injective embedding.

    Both graphs get one-hot colors from a joint refinement (``rounds=None``
    refines to stabilization, which realizes condition 1 whenever the pair is
    distinguishable at all), both are pooled with identical operator
    parameters, and the pooled feature multisets are compared by canonical
    digest. Pairs the refinement cannot separate are refused; pooled graphs
    of unequal size short-circuit to distinct.
    """
    if mode != "exact":
        raise ValueError("the oracle runs in exact mode; use the real-mode pipeline instead")
    if not wl_distinguishable(pair.left, pair.right):
        raise NotDistinguishableError(
            "refinement cannot separate this pair; condition 1 is unobtainable"
        )
    emb1, emb2 = exact_color_embedding(pair.left, pair.right, rounds=rounds)
    pre = not np.array_equal(emb1.values.sum(axis=0), emb2.values.sum(axis=0))
    pooled1 = pool(op, pair.left, emb1, cfg)
    pooled2 = pool(op, pair.right, emb2, cfg)
    if pooled1.num_supernodes != pooled2.num_supernodes:
        return DistinguishabilityVerdict(
            pair_id=pair_id,
            pre_pool_distinct=pre,
            post_pool_distinct=True,
            operator_id=op,
            mode=mode,
            detail="unequal-supernode-count",
        )
    post = _feature_digest(pooled1.features, eps) != _feature_digest(pooled2.features, eps)
    return DistinguishabilityVerdict(
        pair_id=pair_id,
        pre_pool_distinct=pre,
        post_pool_distinct=post,
        operator_id=op,
        mode=mode,
    )


def empirical_pool_distinct(pair: GraphPair, op: str, cfg: PoolConfig,
                            eps: float = 1e-9) -> bool:
    """Pool the stored node features of both sides and compare digests.

    This is the measurement used for operators outside the guarantee: it
    reports what the operator actually does to the pair's own data.
    """
    x1 = EmbeddingMatrix.from_graph(pair.left)
    x2 = EmbeddingMatrix.from_graph(pair.right)
    pooled1 = pool(op, pair.left, x1, cfg)
    pooled2 = pool(op, pair.right, x2, cfg)
    if pooled1.num_supernodes != pooled2.num_supernodes:
        return True
    return _feature_digest(pooled1.features, eps) != _feature_digest(pooled2.features, eps)


# ---------------------------------------------------------------------------
# The projector-proof counterexample
# ---------------------------------------------------------------------------


def build_topk_counterexample(seed: int = 0) -> GraphPair:
    """A distinguishable 4-node pair that score-and-keep pooling collapses.

    Both graphs share one strictly decreasing feature column, the halves
    {0, 1} and {2, 3} have identical internal wiring on both sides, and the
    graphs differ only in their cross edges. Any scalar projector therefore
    keeps either {0, 1} (positive projector) or {2, 3} (negative projector)
    on both sides, and either way the two pooled graphs are identical. The
    seed only perturbs the feature magnitudes, never the ordering.
    """
    rng = np.random.default_rng(seed)
    gaps = rng.integers(1, 5, size=4)
    base = int(rng.integers(1, 4))
    feats = (base + np.cumsum(gaps))[::-1].astype(np.int64).reshape(4, 1)

    shared = [(0, 1), (2, 3)]
    left = Graph(4, shared + [(0, 2), (1, 3)], node_features=feats)
    right = Graph(4, shared + [(0, 2), (0, 3)], node_features=feats)
    pair = GraphPair(left=left, right=right)

    if not wl_distinguishable(left, right):
        raise AssertionError("counterexample construction lost distinguishability")
    for sign, expected_kept in ((1.0, (0, 1)), (-1.0, (2, 3))):
        scores = sign * feats[:, 0].astype(np.float64)
        pooled = [
            topk_pool_with_scores(g, EmbeddingMatrix.from_graph(g), scores, k=2)
            for g in (left, right)
        ]
        for p in pooled:
            if tuple(p.aux["kept"]) != expected_kept:
                raise AssertionError(
                    f"projector sign {sign:+.0f} kept {tuple(p.aux['kept'])}, "
                    f"expected {expected_kept}"
                )
        if _feature_digest(pooled[0].features, 1e-9) != _feature_digest(pooled[1].features, 1e-9):
            raise AssertionError("counterexample branches produced different features")
        if not np.array_equal(pooled[0].adjacency, pooled[1].adjacency):
            raise AssertionError("counterexample branches produced different topology")
    return pair


def counterexample_branch_distinct(pair: GraphPair, sign: float) -> bool:
    """Digest comparison for one projector sign branch on raw features."""
    pooled = []
    for g in (pair.left, pair.right):
        scores = sign * g.node_features[:, 0].astype(np.float64)
        pooled.append(topk_pool_with_scores(g, EmbeddingMatrix.from_graph(g), scores, k=2))
    return _feature_digest(pooled[0].features, 1e-9) != _feature_digest(pooled[1].features, 1e-9)


# ---------------------------------------------------------------------------
# Real-mode pipeline
# ---------------------------------------------------------------------------


def _layer_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _gin_layer(width: int, hidden: int, seed: int) -> GinLayer:
    spec = MlpSpec(
        (width, hidden, hidden, hidden),
        activation="elu",
        seed=seed,
        weight_scale=hidden ** -0.5,
    )
    return GinLayer(epsilon=0.0, mlp=spec)


def real_pipeline_readouts(g: Graph, op: str, pool_cfg: PoolConfig, mp_before: int = 2,
                           mp_after: int = 1, readout: str = "sum", seed: int = 0,
                           hidden: int = 64):
    """Message passing, pooling, message passing, readout, all seeded random.

    Returns (post_pool_readout, pre_pool_readout). The post-pool updates use
    the pooled graph's (possibly weighted) adjacency.
    """
    x = EmbeddingMatrix(g.node_features.astype(np.float64), REAL_MODE)
    for i in range(mp_before):
        x = gin_forward(g, x, _gin_layer(x.width, hidden, _layer_seed(seed, i)))
    pre = global_readout(x, readout)
    pooled = pool(op, g, x, pool_cfg)
    y = pooled.features.as_real()
    for i in range(mp_after):
        layer = _gin_layer(y.width, hidden, _layer_seed(seed, mp_before + i))
        y = gin_forward_dense(pooled.adjacency, y, layer)
    return global_readout(y, readout), pre
