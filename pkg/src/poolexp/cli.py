"""Command-line surface.

Subcommands:

* ``stats``          dataset summary (optionally re-verifying pair claims)
* ``gen``            write generated distinguishable pairs as JSONL
* ``counterexample`` write the projector-proof pair as JSONL
* ``check``          audit assignment-matrix conditions on sampled graphs
* ``oracle``         exact-mode distinguishability sweep over a pair dataset
* ``pipeline``       real-mode forward pipeline with seeded random weights

Exit codes: 0 success, 1 an expressiveness assertion failed, 2 I/O or
configuration error. JSON reports are deterministic for a fixed config
(timings only appear with --with-timing).
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from dataclasses import dataclass

import numpy as np

from .conditions import (
    NotDistinguishableError,
    audit_operator,
    empirical_pool_distinct,
    build_topk_counterexample,
    real_pipeline_readouts,
    distinguishability_oracle,
)
from .gin import READOUTS
from .graphs import (
    DatasetFormatError,
    GenerationError,
    dataset_stats,
    erdos_renyi,
    generate_wl_pairs,
    is_connected,
    load_dataset,
    save_dataset,
)
from .pooling import (
    K_OPERATORS,
    OPERATOR_IDS,
    RATIO_OPERATORS,
    PoolConfig,
    UnreachableRatioError,
)
from .wl import wl_distinguishable

SCHEMA_VERSION = 1


class CliError(Exception):
    """Configuration or I/O problem; maps to exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a sweep needs; reports embed it verbatim."""

    command: str
    dataset: str | None = None
    generator: dict | None = None
    operators: tuple = ()
    ratio: float = 0.1
    k: int = 2
    mode: str = "exact"
    seeds: tuple = (0,)
    rounds: int | None = None
    mp_before: int = 2
    mp_after: int = 1
    readout: str = "sum"
    out_format: str = "table"

    def __post_init__(self):
        if self.command in ("check", "oracle", "pipeline") and not self.operators:
            raise CliError("at least one operator is required (--ops)")
        if not self.seeds:
            raise CliError("at least one seed is required (--seeds)")
        if self.mp_before < 1:
            raise CliError("--mp-before must be >= 1")

    def as_dict(self):
        return {
            "command": self.command,
            "dataset": self.dataset,
            "generator": self.generator,
            "operators": list(self.operators),
            "ratio": self.ratio,
            "k": self.k,
            "mode": self.mode,
            "seeds": list(self.seeds),
            "rounds": self.rounds,
            "mp_before": self.mp_before,
            "mp_after": self.mp_after,
            "readout": self.readout,
        }


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------


def _parse_ops(text: str):
    if text.strip() == "all":
        return tuple(OPERATOR_IDS)
    ops = tuple(t.strip() for t in text.split(",") if t.strip())
    for op in ops:
        if op not in OPERATOR_IDS:
            raise CliError(f"unknown operator {op!r}; choose from {', '.join(OPERATOR_IDS)}")
    return ops


def _parse_seeds(text: str):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise CliError(f"--seeds must be a comma list of integers: {exc}") from exc


def _parse_nodes(text: str):
    parts = text.split(":")
    try:
        if len(parts) == 1:
            lo = hi = int(parts[0])
        elif len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
        else:
            raise ValueError(text)
    except ValueError as exc:
        raise CliError(f"--nodes must look like LO:HI, got {text!r}") from exc
    return lo, hi


def _parse_rounds(text: str):
    if text == "auto":
        return None
    try:
        return int(text)
    except ValueError as exc:
        raise CliError(f"--rounds must be an integer or 'auto', got {text!r}") from exc


def config_for_operator(op: str, ratio: float, k: int, seed: int = 0) -> PoolConfig:
    """Give each operator the one knob it understands."""
    if op in RATIO_OPERATORS:
        return PoolConfig(ratio=ratio, seed=seed)
    if op in K_OPERATORS:
        return PoolConfig(k=k, seed=seed)
    return PoolConfig(seed=seed)


def _load_pairs(args) -> tuple:
    if getattr(args, "dataset", None):
        return load_dataset(args.dataset), args.dataset, None
    if getattr(args, "gen_count", None):
        spec = {
            "count": args.gen_count,
            "nodes": list(_parse_nodes(args.gen_nodes)),
            "seed": args.gen_seed,
            "difficulty": args.gen_difficulty,
        }
        pairs = generate_wl_pairs(
            args.gen_count,
            nodes=_parse_nodes(args.gen_nodes),
            seed=args.gen_seed,
            difficulty=args.gen_difficulty,
        )
        return pairs, None, spec
    raise CliError("provide --dataset PATH or --gen-count N")


def sample_graphs(samples: int, nodes=(12, 24), seed: int = 0, feature_dim: int = 2):
    """Seeded connected sample graphs with small integer features."""
    out = []
    lo, hi = nodes
    for i in range(samples):
        rng = np.random.default_rng([seed, i])
        while True:
            n = int(rng.integers(lo, hi + 1))
            g = erdos_renyi(n, rng.uniform(0.2, 0.45), rng)
            if g.num_edges and is_connected(g):
                break
        feats = rng.integers(0, 4, size=(n, feature_dim))
        out.append(g.with_features(feats, "int"))
    return out


def _emit(report: dict, table: str, args) -> None:
    if args.format == "json":
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        text = table
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _knob_text(op: str, ratio: float, k: int) -> str:
    if op in RATIO_OPERATORS:
        return f"r={ratio:g}"
    if op in K_OPERATORS:
        return f"k={k}"
    return "-"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_stats(args) -> int:
    pairs = load_dataset(args.dataset, verify_wl=args.verify_wl)
    st = dataset_stats(pairs)
    report = {
        "schema": SCHEMA_VERSION,
        "command": "stats",
        "dataset": args.dataset,
        "num_graphs": st.num_graphs,
        "num_pairs": st.num_pairs,
        "mean_nodes": st.mean_nodes,
        "mean_edges": st.mean_edges,
        "feature_dim": st.feature_dim,
        "wl_verified": bool(args.verify_wl),
    }
    table = (
        f"dataset      {args.dataset}\n"
        f"graphs       {st.num_graphs}\n"
        f"pairs        {st.num_pairs}\n"
        f"mean nodes   {st.mean_nodes:.2f}\n"
        f"mean edges   {st.mean_edges:.2f}\n"
        f"feature dim  {st.feature_dim}\n"
    )
    _emit(report, table, args)
    return 0


def cmd_gen(args) -> int:
    pairs = generate_wl_pairs(
        args.count,
        nodes=_parse_nodes(args.nodes),
        seed=args.seed,
        difficulty=args.difficulty,
    )
    save_dataset(pairs, args.out)
    sys.stdout.write(f"wrote {len(pairs)} pairs to {args.out}\n")
    return 0


def cmd_counterexample(args) -> int:
    pair = build_topk_counterexample(seed=args.seed)
    save_dataset([pair], args.out)
    sys.stdout.write(f"wrote 1 counterexample pair to {args.out}\n")
    return 0


def cmd_check(args) -> int:
    ops = _parse_ops(args.ops)
    cfg = RunConfig(command="check", operators=ops, ratio=args.ratio, k=args.k,
                    seeds=(args.seed,), out_format=args.format)
    graphs = sample_graphs(args.samples, _parse_nodes(args.nodes), seed=args.seed)
    asserted = _parse_ops(args.assert_expressive) if args.assert_expressive else ()

    rows = []
    failed_assertion = []
    for op in ops:
        report = audit_operator(op, graphs, config_for_operator(op, args.ratio, args.k, args.seed), tol=args.tol)
        rows.append(
            {
                "operator": op,
                "knob": _knob_text(op, args.ratio, args.k),
                "cond2": report.cond2.passed,
                "cond3": report.cond3.passed,
                "lambda": report.cond2.lambda_estimate,
                "cond2_max_dev": report.cond2.max_deviation,
                "cond3_max_dev": report.cond3.max_deviation,
                "cond3_r_weighted": report.cond3.r_weighted,
                "violating_rows": [list(v) for v in report.cond2.violating_rows],
                "expressive": report.conditions_met,
            }
        )
        if op in asserted and not report.conditions_met:
            failed_assertion.append(op)

    report = {
        "schema": SCHEMA_VERSION,
        "command": "check",
        "config": cfg.as_dict(),
        "samples": args.samples,
        "tolerance": args.tol,
        "operators": rows,
    }
    lines = [f"{'operator':<12} {'knob':<8} {'cond2':<6} {'cond3':<6} {'lambda':<8} expressive"]
    for r in rows:
        lines.append(
            f"{r['operator']:<12} {r['knob']:<8} "
            f"{'pass' if r['cond2'] else 'FAIL':<6} {'pass' if r['cond3'] else 'FAIL':<6} "
            f"{r['lambda']:<8.3g} {'yes' if r['expressive'] else 'no'}"
        )
    _emit(report, "\n".join(lines) + "\n", args)
    if failed_assertion:
        sys.stderr.write(
            f"expressiveness asserted but conditions failed: {', '.join(failed_assertion)}\n"
        )
        return 1
    return 0


def cmd_oracle(args) -> int:
    if args.mode != "exact":
        raise CliError("oracle runs in exact mode; use `pipeline` for real mode")
    ops = _parse_ops(args.ops)
    pairs, dataset, genspec = _load_pairs(args)
    rounds = _parse_rounds(args.rounds)
    cfg = RunConfig(command="oracle", dataset=dataset, generator=genspec, operators=ops,
                    ratio=args.ratio, k=args.k, seeds=(args.seed,), rounds=rounds,
                    out_format=args.format)

    usable = []
    excluded = 0
    for i, p in enumerate(pairs):
        if wl_distinguishable(p.left, p.right):
            usable.append((i, p))
        else:
            excluded += 1
    audit_graphs = [p.left for _, p in usable[: args.audit_samples]]
    if not audit_graphs:
        raise CliError("no refinement-distinguishable pairs to evaluate")

    rows = []
    guarantee_violations = []
    for op in ops:
        op_cfg = config_for_operator(op, args.ratio, args.k, args.seed)
        audit = audit_operator(op, audit_graphs, op_cfg)
        distinct = 0
        failing = []
        times = []
        for pair_id, p in usable:
            t0 = time.perf_counter()
            if audit.conditions_met:
                verdict = distinguishability_oracle(p, op, op_cfg, rounds=rounds, pair_id=pair_id)
                ok = verdict.post_pool_distinct
            else:
                ok = empirical_pool_distinct(p, op, op_cfg)
            times.append(time.perf_counter() - t0)
            if ok:
                distinct += 1
            else:
                failing.append(pair_id)
        rate = distinct / len(usable)
        row = {
            "operator": op,
            "knob": _knob_text(op, args.ratio, args.k),
            "cond2": audit.cond2.passed,
            "cond3": audit.cond3.passed,
            "conditions_met": audit.conditions_met,
            "path": "guaranteed" if audit.conditions_met else "empirical",
            "rate": rate,
            "pairs_evaluated": len(usable),
            "pairs_excluded": excluded,
            "failing_pairs": failing[:20],
            "expressive": bool(audit.conditions_met and rate == 1.0),
        }
        if args.with_timing:
            row["median_seconds_per_pair"] = statistics.median(times)
        rows.append(row)
        if audit.conditions_met and rate < 1.0:
            guarantee_violations.append(op)

    report = {
        "schema": SCHEMA_VERSION,
        "command": "oracle",
        "config": cfg.as_dict(),
        "pairs_total": len(pairs),
        "pairs_excluded": excluded,
        "operators": rows,
    }
    lines = [f"{'operator':<12} {'knob':<8} {'rate':<7} {'expressive':<11} {'path':<11} s/pair"]
    for op_row in rows:
        t = f"{op_row['median_seconds_per_pair']:.4f}" if args.with_timing else "-"
        lines.append(
            f"{op_row['operator']:<12} {op_row['knob']:<8} {op_row['rate']:<7.3f} "
            f"{'yes' if op_row['expressive'] else 'no':<11} {op_row['path']:<11} {t}"
        )
    _emit(report, "\n".join(lines) + "\n", args)

    if guarantee_violations:
        sys.stderr.write(
            "conditions passed but pooled digests collided for: "
            + ", ".join(guarantee_violations)
            + "\n"
        )
        return 1
    return 0


def cmd_pipeline(args) -> int:
    if args.mode != "real":
        raise CliError("pipeline runs in real mode; use `oracle` for exact mode")
    ops = _parse_ops(args.ops)
    seeds = _parse_seeds(args.seeds)
    if args.readout not in READOUTS:
        raise CliError(f"--readout must be one of {READOUTS}")
    pairs, dataset, genspec = _load_pairs(args)
    cfg = RunConfig(command="pipeline", dataset=dataset, generator=genspec, operators=ops,
                    ratio=args.ratio, k=args.k, mode="real", seeds=seeds,
                    mp_before=args.mp_before, mp_after=args.mp_after,
                    readout=args.readout, out_format=args.format)

    def quantized(v):
        return np.round(v / args.eps).astype(np.int64).tobytes()

    rows = []
    pre_rates = {}
    for op in ops:
        per_seed = []
        pre_per_seed = []
        for seed in seeds:
            op_cfg = config_for_operator(op, args.ratio, args.k, seed)
            post_distinct = 0
            pre_distinct = 0
            for pair_id, p in enumerate(pairs):
                outs = []
                pres = []
                for g in (p.left, p.right):
                    try:
                        post, pre = real_pipeline_readouts(
                            g, op, op_cfg, mp_before=args.mp_before,
                            mp_after=args.mp_after, readout=args.readout, seed=seed,
                        )
                    except FloatingPointError as exc:
                        raise CliError(
                            f"non-finite activations: operator {op}, pair {pair_id}: {exc}"
                        ) from exc
                    outs.append(post)
                    pres.append(pre)
                if quantized(outs[0]) != quantized(outs[1]):
                    post_distinct += 1
                if quantized(pres[0]) != quantized(pres[1]):
                    pre_distinct += 1
            per_seed.append(post_distinct / len(pairs))
            pre_per_seed.append(pre_distinct / len(pairs))
        pre_rates[op] = pre_per_seed
        rows.append(
            {
                "operator": op,
                "knob": _knob_text(op, args.ratio, args.k),
                "rate_per_seed": per_seed,
                "rate_mean": sum(per_seed) / len(per_seed),
                "pre_pool_rate_per_seed": pre_per_seed,
                "pre_pool_rate_mean": sum(pre_per_seed) / len(pre_per_seed),
            }
        )

    report = {
        "schema": SCHEMA_VERSION,
        "command": "pipeline",
        "config": cfg.as_dict(),
        "pairs_total": len(pairs),
        "operators": rows,
    }
    lines = [f"{'operator':<12} {'knob':<8} {'rate':<7} pre-pool"]
    for r in rows:
        lines.append(
            f"{r['operator']:<12} {r['knob']:<8} {r['rate_mean']:<7.3f} {r['pre_pool_rate_mean']:.3f}"
        )
    _emit(report, "\n".join(lines) + "\n", args)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poolexp",
        description="Check whether graph pooling operators preserve refinement distinguishability.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--format", choices=("table", "json"), default="table")
        p.add_argument("--out", default=None, help="write the report to a file")

    p_stats = sub.add_parser("stats", help="summarize a JSONL pair dataset")
    p_stats.add_argument("--dataset", required=True)
    p_stats.add_argument("--verify-wl", action="store_true",
                         help="re-verify every pair's distinguishability claim")
    add_common(p_stats)
    p_stats.set_defaults(func=cmd_stats)

    p_gen = sub.add_parser("gen", help="generate distinguishable pairs")
    p_gen.add_argument("--count", type=int, required=True)
    p_gen.add_argument("--nodes", default="16:32", help="node range LO:HI")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--difficulty", type=int, default=1,
                       help="minimum refinement round at which histograms may diverge")
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_gen)

    p_ce = sub.add_parser("counterexample", help="emit the projector-proof pair")
    p_ce.add_argument("--seed", type=int, default=0)
    p_ce.add_argument("--out", required=True)
    p_ce.set_defaults(func=cmd_counterexample)

    p_check = sub.add_parser("check", help="audit assignment conditions on sampled graphs")
    p_check.add_argument("--ops", required=True, help="comma list of operators, or 'all'")
    p_check.add_argument("--ratio", type=float, default=0.1)
    p_check.add_argument("--k", type=int, default=2)
    p_check.add_argument("--samples", type=int, default=50)
    p_check.add_argument("--nodes", default="12:24")
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--tol", type=float, default=1e-9)
    p_check.add_argument("--assert-expressive", default=None,
                         help="comma list of operators that must pass both conditions")
    add_common(p_check)
    p_check.set_defaults(func=cmd_check)

    p_oracle = sub.add_parser("oracle", help="exact-mode distinguishability sweep")
    p_oracle.add_argument("--dataset", default=None)
    p_oracle.add_argument("--gen-count", type=int, default=None)
    p_oracle.add_argument("--gen-nodes", default="16:32")
    p_oracle.add_argument("--gen-seed", type=int, default=0)
    p_oracle.add_argument("--gen-difficulty", type=int, default=1)
    p_oracle.add_argument("--ops", required=True)
    p_oracle.add_argument("--ratio", type=float, default=0.1)
    p_oracle.add_argument("--k", type=int, default=2)
    p_oracle.add_argument("--mode", choices=("exact", "real"), default="exact")
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--rounds", default="auto",
                          help="refinement rounds for the exact embedding, or 'auto'")
    p_oracle.add_argument("--audit-samples", type=int, default=20)
    p_oracle.add_argument("--with-timing", action="store_true",
                          help="include per-pair timings (makes JSON non-reproducible)")
    add_common(p_oracle)
    p_oracle.set_defaults(func=cmd_oracle)

    p_pipe = sub.add_parser("pipeline", help="real-mode forward pipeline sweep")
    p_pipe.add_argument("--dataset", default=None)
    p_pipe.add_argument("--gen-count", type=int, default=None)
    p_pipe.add_argument("--gen-nodes", default="16:32")
    p_pipe.add_argument("--gen-seed", type=int, default=0)
    p_pipe.add_argument("--gen-difficulty", type=int, default=1)
    p_pipe.add_argument("--ops", required=True)
    p_pipe.add_argument("--ratio", type=float, default=0.1)
    p_pipe.add_argument("--k", type=int, default=2)
    p_pipe.add_argument("--mode", choices=("exact", "real"), default="real")
    p_pipe.add_argument("--seeds", default="0,1,2")
    p_pipe.add_argument("--mp-before", type=int, default=2)
    p_pipe.add_argument("--mp-after", type=int, default=1)
    p_pipe.add_argument("--readout", default="sum")
    p_pipe.add_argument("--eps", type=float, default=1e-8)
    add_common(p_pipe)
    p_pipe.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, DatasetFormatError, GenerationError, UnreachableRatioError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except NotDistinguishableError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
