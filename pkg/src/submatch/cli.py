"""Command-line entry point: gen, train, eval, explain, verify.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import datagen, metrics, theory
from .encoding import encode_pair
from .graph import GraphError, read_graph
from .model import MatchingModel, extract_mapping
from .training import NonFiniteLoss, TrainConfig, evaluate, train

log = logging.getLogger("submatch")

SWEEP_GRID = [round(0.5 + 0.05 * i, 2) for i in range(10)]


class CliError(RuntimeError):
    """Runtime failure reported as a one-line message with exit code 1."""


def _num_labels(manifest: Path, given: int | None) -> int:
    if given is not None:
        return given
    meta = datagen.read_meta(manifest)
    if "num_labels" not in meta:
        raise CliError(f"no meta.txt next to {manifest}; pass --num-labels")
    return int(meta["num_labels"])


# ------------------------------------------------------------------ commands


def cmd_gen(args) -> int:
    if args.stats_file:
        stats = datagen.stats_from_text(Path(args.stats_file).read_text())
    else:
        stats = datagen.PRESETS[args.stats_preset]
    if args.max_nodes:
        stats = stats.scaled(args.max_nodes)
    if args.directed:
        stats = stats.as_directed()
    manifest = datagen.build_dataset(stats, args.targets, args.queries, args.seed, args.out)
    rows = datagen.read_manifest(manifest)
    n_pos = sum(r.label for r in rows)
    print(f"wrote {len(rows)} queries over {args.targets} targets ({n_pos} positive) to {manifest}")
    return 0


def cmd_train(args) -> int:
    manifest = Path(args.data)
    num_labels = _num_labels(manifest, args.num_labels)
    if args.config:
        config = TrainConfig.from_text(Path(args.config).read_text())
        print(f"# configuration from {args.config}")
    else:
        config = TrainConfig()
        print("# default configuration")
    print(config.describe())
    print(f"num_labels = {num_labels}")
    sys.stdout.flush()
    ckpt, metrics_path = train(manifest, num_labels, config, args.out, args.metrics, progress=True)
    print(f"checkpoint: {ckpt}")
    print(f"metrics: {metrics_path}")
    return 0


def _load_model(path) -> MatchingModel:
    try:
        return MatchingModel.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load checkpoint {path}: {exc}") from exc


def cmd_eval(args) -> int:
    model = _load_model(args.ckpt)
    manifest = Path(args.data)
    meta = datagen.read_meta(manifest)
    if "num_labels" in meta and int(meta["num_labels"]) != model.config.num_labels:
        raise CliError(f"checkpoint expects {model.config.num_labels} labels, "
                       f"data declares {meta['num_labels']}")
    samples = datagen.load_samples(manifest, model.config.num_labels)
    result = evaluate(model, samples, lam=0.0)
    summary = result.summary()
    for key in ("roc_auc", "pr_auc", "f1", "acc", "top1", "top5", "top10", "mrr"):
        print(f"{key}\t{summary[key]:.6f}")
    if args.threshold_sweep is not None:
        rows = metrics.confidence_sweep(result.scores, result.labels, SWEEP_GRID)
        out = sys.stdout if args.threshold_sweep == "-" else open(args.threshold_sweep, "w", newline="")
        try:
            w = csv.writer(out, lineterminator="\n")
            w.writerow(["threshold", "coverage", "f1", "acc"])
            for r in rows:
                w.writerow([f"{r['threshold']:.2f}", repr(r["coverage"]), repr(r["f1"]), repr(r["acc"])])
        finally:
            if out is not sys.stdout:
                out.close()
    return 0


def cmd_explain(args) -> int:
    model = _load_model(args.ckpt)
    T = model.config.num_labels
    target = read_graph(args.target, T)
    query = read_graph(args.query, T)
    inp = encode_pair(query, target, T)
    y, attention = model.forward(inp)
    eps = model.config.epsilon if args.epsilon is None else args.epsilon
    ex = extract_mapping(attention, inp.pattern_count, eps)
    if args.format == "json":
        doc = dict(
            prediction=y.item(),
            triples=[[i, j, p] for i, j, p in ex.triples],
            rankings={str(i): [[j, p] for j, p in r] for i, r in ex.rankings.items()},
        )
        print(json.dumps(doc, indent=2))
        return 0
    print(f"prediction\t{y.item():.6f}")
    print("# triples: pattern_node\ttarget_node\tp")
    for i, j, p in ex.triples:
        print(f"{i}\t{j}\t{p:.6f}")
    print("# rankings: pattern_node\trank\ttarget_node\tp")
    for i, r in ex.rankings.items():
        for rank, (j, p) in enumerate(r, start=1):
            print(f"{i}\t{rank}\t{j}\t{p:.6f}")
    return 0


VERIFY_COLUMNS = ["suite", "instance", "nodes", "alpha", "hops", "measured", "limit", "residual", "passed"]


def _verify_rows(suite: str) -> list[list]:
    rows = []
    if suite in ("bound", "all"):
        for k, c in enumerate(theory.bound_sweep()):
            rows.append(["bound", k, c.n, c.alpha, c.k, repr(c.empirical), repr(c.bound), "", int(c.passed)])
    if suite in ("fixedpoint", "all"):
        for k, c in enumerate(theory.fixed_point_sweep()):
            rows.append(["fixedpoint", k, "", "", 200, repr(c.contraction_ratio), repr(c.bound),
                         repr(c.residual), int(c.passed)])
    if suite in ("reduction", "all"):
        for k, gap in enumerate(theory.reduction_sweep()):
            rows.append(["reduction", k, "", "", "", repr(gap), repr(1e-12), "", int(gap <= 1e-12)])
    return rows


def cmd_verify(args) -> int:
    rows = _verify_rows(args.suite)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(VERIFY_COLUMNS)
            w.writerows(rows)
    if args.curve:
        theory.emit_bound_curve(np.round(np.arange(0.3, 0.95, 0.1), 2), range(0, 11), path=args.curve)
    failed = [r for r in rows if not r[-1]]
    for suite in dict.fromkeys(r[0] for r in rows):
        n = sum(r[0] == suite for r in rows)
        bad = sum(r[0] == suite for r in failed)
        print(f"{suite}: {n - bad}/{n} passed")
    return 1 if failed else 0


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="submatch", description="Explainable neural subgraph matching.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="synthesize a dataset")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--stats-preset", choices=sorted(datagen.PRESETS))
    src.add_argument("--stats-file")
    g.add_argument("--targets", type=int, required=True)
    g.add_argument("--queries", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--max-nodes", type=int, help="cap target sizes (scales the mean down)")
    g.add_argument("--directed", action="store_true", help="orient edges from smaller to larger label")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--data", required=True, help="manifest file")
    t.add_argument("--config", help="key = value file overriding defaults")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--metrics", help="CSV log path (default <out>.metrics.csv)")
    t.add_argument("--num-labels", type=int, help="label alphabet size (default from meta.txt)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--data", required=True)
    e.add_argument("--ckpt", required=True)
    e.add_argument("--threshold-sweep", nargs="?", const="-", metavar="CSV",
                   help="emit F1/accuracy vs confidence threshold (stdout unless a path is given)")
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("explain", help="score one pair and print the node alignment")
    x.add_argument("--target", required=True)
    x.add_argument("--query", required=True)
    x.add_argument("--ckpt", required=True)
    x.add_argument("--epsilon", type=float)
    x.add_argument("--format", choices=("tsv", "json"), default="tsv")
    x.set_defaults(func=cmd_explain)

    v = sub.add_parser("verify", help="numerical checks of the diffusion theory")
    v.add_argument("--suite", choices=("bound", "fixedpoint", "reduction", "all"), default="all")
    v.add_argument("--out", help="per-instance CSV")
    v.add_argument("--curve", help="also write the alpha,K,bound,empirical_err curve here")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (CliError, GraphError, NonFiniteLoss, datagen.UnsatisfiableStats,
            datagen.NegativeGenerationFailed, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
