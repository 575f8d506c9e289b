"""Convert the pickled paired-graph benchmark into JSONL pair records.

The upstream distribution stores graphs as Python-pickled objects. Two
on-disk layouts are understood:

* a flat list of per-graph records, each carrying ``edge_index`` (2 x E,
  both directions), ``x`` (N x F) and ``y`` (graph class) as attributes or
  dict keys, with values being numpy arrays or tensors exposing ``numpy()``;
* a collated ``(data, slices)`` tuple, where ``data`` holds the concatenated
  arrays and ``slices`` the per-graph boundaries.

Graphs are paired consecutively (2i with 2i+1) and must carry opposite
class labels. The output is the workbench JSONL pair format with integer
feature mode, written deterministically so repeated conversions are
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import pickle
import sys
from dataclasses import dataclass

import numpy as np

EXPECTED_GRAPHS = 3000
EXPECTED_PAIRS = 1500
EXPECTED_MEAN_NODES = 76.96
EXPECTED_MEAN_EDGES = 186.46


class ConversionError(ValueError):
    """The source file does not look like the expected distribution."""


@dataclass(frozen=True)
class ConversionManifest:
    source: str
    output: str
    graphs_converted: int
    pairs_emitted: int
    checksum: str


def _to_numpy(value, where: str) -> np.ndarray:
    if value is None:
        raise ConversionError(f"{where}: missing array")
    if hasattr(value, "detach"):
        value = value.detach()
    if hasattr(value, "cpu"):
        value = value.cpu()
    if hasattr(value, "numpy"):
        value = value.numpy()
    try:
        return np.asarray(value)
    except Exception as exc:  # noqa: BLE001 - report the offending record
        raise ConversionError(f"{where}: cannot interpret {type(value).__name__} as an array") from exc


def _field(record, name: str, where: str):
    if isinstance(record, dict):
        if name not in record:
            raise ConversionError(f"{where}: missing field {name!r}")
        return record[name]
    if not hasattr(record, name):
        raise ConversionError(f"{where}: missing field {name!r}")
    return getattr(record, name)


def _normalize_graph(record, index: int) -> dict:
    where = f"record {index}"
    x = _to_numpy(_field(record, "x", where), f"{where}: x")
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1:
        raise ConversionError(f"{where}: feature matrix has shape {x.shape}")
    as_int = np.round(x).astype(np.int64)
    if not np.array_equal(as_int, x.astype(np.float64)):
        raise ConversionError(f"{where}: non-integer node feature values")
    if (as_int < 0).any():
        raise ConversionError(f"{where}: negative node feature values")

    edge_index = _to_numpy(_field(record, "edge_index", where), f"{where}: edge_index")
    if edge_index.ndim != 2 or edge_index.shape[0] != 2:
        raise ConversionError(f"{where}: edge_index has shape {edge_index.shape}")
    n = as_int.shape[0]
    if edge_index.size and (edge_index.min() < 0 or edge_index.max() >= n):
        raise ConversionError(f"{where}: edge endpoint outside [0, {n})")
    src, dst = edge_index.astype(np.int64)
    undirected = {(int(min(u, v)), int(max(u, v))) for u, v in zip(src, dst)}
    loops = [u for u, v in undirected if u == v]
    if loops:
        raise ConversionError(f"{where}: self-loop at node {loops[0]}")

    y = _to_numpy(_field(record, "y", where), f"{where}: y").reshape(-1)
    if y.size != 1:
        raise ConversionError(f"{where}: expected one class label, got {y.size}")
    return {
        "n": n,
        "edges": sorted(undirected),
        "x": as_int,
        "label": int(y[0]),
    }


def _looks_collated(payload) -> bool:
    # (data, slices) tuples carry 1-D offset arrays; a flat two-record list
    # of graph dicts has a 2 x E edge_index instead
    if not (isinstance(payload, tuple) and len(payload) == 2 and isinstance(payload[1], dict)):
        return False
    slices = payload[1]
    if not {"x", "edge_index", "y"} <= set(slices.keys()):
        return False
    try:
        return _to_numpy(slices["edge_index"], "edge_index slices").ndim == 1
    except ConversionError:
        return False


def _iter_records(payload):
    """Yield per-graph records from either supported layout."""
    if _looks_collated(payload):
        data, slices = payload
        x = _to_numpy(_field(data, "x", "collated data"), "collated x")
        edge_index = _to_numpy(_field(data, "edge_index", "collated data"), "collated edge_index")
        y = _to_numpy(_field(data, "y", "collated data"), "collated y").reshape(-1)
        sx = _to_numpy(slices["x"], "x slices").astype(np.int64)
        se = _to_numpy(slices["edge_index"], "edge_index slices").astype(np.int64)
        sy = _to_numpy(slices["y"], "y slices").astype(np.int64)
        count = sx.size - 1
        for i in range(count):
            yield {
                "x": x[sx[i]:sx[i + 1]],
                "edge_index": edge_index[:, se[i]:se[i + 1]] - int(sx[i]),
                "y": y[sy[i]:sy[i + 1]],
            }
        return
    if isinstance(payload, (list, tuple)):
        yield from payload
        return
    raise ConversionError(f"unsupported pickle payload of type {type(payload).__name__}")


def _graph_json(g: dict) -> dict:
    return {
        "n": g["n"],
        "edges": [[u, v] for u, v in g["edges"]],
        "x": g["x"].tolist(),
    }


def convert(source: str, out: str, expect_full_dataset: bool = True) -> ConversionManifest:
    """Read the pickled source, pair consecutive graphs, write JSONL.

    Counts and means are compared against the published dataset statistics;
    mismatches warn on stderr rather than failing, since partial extracts
    are legitimate inputs. Nothing is written when the source is empty or
    malformed.
    """
    with open(source, "rb") as fh:
        payload = pickle.load(fh)

    graphs = [_normalize_graph(rec, i) for i, rec in enumerate(_iter_records(payload))]
    if not graphs:
        raise ConversionError("source contains no graphs; nothing written")
    if len(graphs) % 2:
        raise ConversionError(
            f"source contains {len(graphs)} graphs, which cannot be paired"
        )
    dim = graphs[0]["x"].shape[1]
    for i, g in enumerate(graphs):
        if g["x"].shape[1] != dim:
            raise ConversionError(
                f"record {i}: feature dim {g['x'].shape[1]} != {dim} of record 0"
            )

    lines = [json.dumps({"meta": {"feature_mode": "int", "feature_dim": dim}})]
    for pair_index in range(len(graphs) // 2):
        left, right = graphs[2 * pair_index], graphs[2 * pair_index + 1]
        if left["label"] == right["label"]:
            raise ConversionError(
                f"records {2 * pair_index} and {2 * pair_index + 1}: paired graphs "
                f"carry the same class label {left['label']}"
            )
        record = {
            "left": _graph_json(left),
            "right": _graph_json(right),
            "label_left": left["label"],
            "label_right": right["label"],
            "wl_distinct": True,
        }
        lines.append(json.dumps(record))

    text = "\n".join(lines) + "\n"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(text)

    if expect_full_dataset:
        _warn_on_mismatch(graphs)

    return ConversionManifest(
        source=str(source),
        output=str(out),
        graphs_converted=len(graphs),
        pairs_emitted=len(graphs) // 2,
        checksum=hashlib.sha256(text.encode()).hexdigest(),
    )


def _warn_on_mismatch(graphs) -> None:
    mean_nodes = float(np.mean([g["n"] for g in graphs]))
    mean_edges = float(np.mean([len(g["edges"]) for g in graphs]))
    problems = []
    if len(graphs) != EXPECTED_GRAPHS:
        problems.append(f"{len(graphs)} graphs (expected {EXPECTED_GRAPHS})")
    if abs(mean_nodes - EXPECTED_MEAN_NODES) > 0.01:
        problems.append(f"mean nodes {mean_nodes:.2f} (expected {EXPECTED_MEAN_NODES})")
    if abs(mean_edges - EXPECTED_MEAN_EDGES) > 0.01:
        problems.append(f"mean edges {mean_edges:.2f} (expected {EXPECTED_MEAN_EDGES})")
    if problems:
        sys.stderr.write(
            "warning: output does not match the published dataset statistics: "
            + "; ".join(problems)
            + "\n"
        )
