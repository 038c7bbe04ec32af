"""Command-line interface: augment, train-eval, verify, stats.

A JSON config file mirrors RunConfig field names; flags override the
file. The remote API key is read from the environment variable named in
the encoder/generator config and is never logged.
"""

import argparse
import json
import logging
import sys

from .graph import graph_stats, load_dataset, make_longtail_split
from .pipeline import RunConfig, run_augment, run_train_eval, run_verify, write_report



def _load_config(args):
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    if args.data:
        data["dataset_dir"] = args.data
    if args.out:
        data["out_dir"] = args.out
    if args.seed is not None:
        data["seed"] = args.seed
    if getattr(args, "variant", None):
        data["variant"] = args.variant
    if getattr(args, "edge", None):
        data["edge_strategy"] = args.edge
    if getattr(args, "generator", None):
        gen = dict(data.get("generator", {}))
        gen["kind"] = args.generator
        data["generator"] = gen
    if getattr(args, "encoder", None):
        enc = dict(data.get("encoder", {}))
        enc["kind"] = "hashing" if args.encoder == "hash" else args.encoder
        data["encoder"] = enc
    if "seed" not in data:
        raise SystemExit("a seed is required (--seed or config)")
    if "dataset_dir" not in data or "out_dir" not in data:
        raise SystemExit("dataset_dir and out_dir are required (--data/--out or config)")
    return RunConfig.from_dict(data)


def _add_common(parser):
    parser.add_argument("--config", help="JSON config mirroring RunConfig fields")
    parser.add_argument("--data", help="dataset directory")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="tagaug")
    sub = parser.add_subparsers(dest="command", required=True)

    p_aug = sub.add_parser("augment", help="generate synthetic nodes and edges")
    _add_common(p_aug)
    p_aug.add_argument("--variant", choices=["O", "S", "M"])
    p_aug.add_argument("--edge", choices=["confidence", "duplicate", "none"])
    p_aug.add_argument("--generator", choices=["mock", "remote"])
    p_aug.add_argument("--encoder", choices=["hash", "remote"])

    p_eval = sub.add_parser("train-eval", help="train/evaluate the ablation grid")
    _add_common(p_eval)
    p_eval.add_argument(
        "--grid",
        default="origin,llm,llm_C",
        help="comma-separated cells from origin,num,num_C,llm,llm_C",
    )

    p_verify = sub.add_parser("verify", help="run the theory checks")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--out", default=None)

    p_stats = sub.add_parser("stats", help="summarize a dataset directory")
    p_stats.add_argument("--data", required=True)
    p_stats.add_argument("--head-count", type=int, default=20)
    p_stats.add_argument("--imbalance-ratio", type=float, default=0.1)
    p_stats.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)

    if args.command == "augment":
        cfg = _load_config(args)
        report = run_augment(cfg)
        print(json.dumps({k: report[k] for k in ("synthetic_count", "edge_assignment")}))
        return 0

    if args.command == "train-eval":
        cfg = _load_config(args)
        grid = tuple(cell.strip() for cell in args.grid.split(",") if cell.strip())
        report = run_train_eval(cfg, grid=grid)
        for cell in grid:
            metrics = report["cells"][cell]["metrics"]
            line = ", ".join(
                f"{key}={metrics[key]['mean']:.4f}+/-{metrics[key]['std']:.4f}"
                for key in ("acc", "bacc", "macro_f1", "gmean")
            )
            print(f"{cell}: {line}")
        return 0

    if args.command == "verify":
        report = run_verify(seed=args.seed, out_dir=args.out)
        for check in report["checks"]:
            status = "PASS" if check["passed"] else "FAIL"
            print(f"{status} {check['name']}")
        if not report["all_passed"]:
            return 1
        return 0

    if args.command == "stats":
        graph = load_dataset(args.data)
        with open(f"{args.data}/meta.json", encoding="utf-8") as fh:
            meta = json.load(fh)
        tail_count = meta.get("tail_class_count", max(1, graph.num_classes // 2))
        split = make_longtail_split(
            graph,
            head_count=args.head_count,
            imbalance_ratio=args.imbalance_ratio,
            tail_class_count=tail_count,
            seed=args.seed,
        )
        print(json.dumps(graph_stats(graph, split).as_dict(), indent=2, sort_keys=True))
        return 0

    raise SystemExit(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
