"""Command-line entry points.

Subcommands mirror the pipeline stages (run, describe, explore, execute,
select, bench) plus ``gen`` for synthetic datasets. Flag precedence:
command-line flags, then --config file entries, then environment, then
defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import fdg, pex, pipeline
from .corpus import load_dataset
from .synth import gen_synthetic


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--features", type=int, default=None)
    p.add_argument("--prefilter-k", type=int, default=None)
    p.add_argument("--weights", default=None, help="alpha,beta,gamma (sum to 1)")
    p.add_argument("--llm", choices=["stub", "remote"], default=None)
    p.add_argument("--model", default=None)
    p.add_argument(
        "--method",
        choices=["hybrid", "stats-only", "llm-only", "none"],
        default=None,
    )
    p.add_argument("--executor", choices=["yannakakis", "binary"], default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--token-budget", type=int, default=None)
    p.add_argument("--stub-script", default=None)
    p.add_argument("--audit-log", default=None)


def build_config(args: argparse.Namespace) -> pipeline.RunConfig:
    file_cfg: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)

    def pick(flag: str, key: str, default):
        value = getattr(args, flag, None)
        if value is not None:
            return value
        if key in file_cfg:
            return file_cfg[key]
        return default

    weights = pick("weights", "weights", None)
    if isinstance(weights, str):
        weights = tuple(float(x) for x in weights.split(","))
    elif isinstance(weights, list):
        weights = tuple(float(x) for x in weights)
    elif weights is None:
        weights = (1 / 3, 1 / 3, 1 / 3)

    method = pick("method", "method", "hybrid").replace("-", "_")
    config = pipeline.RunConfig(
        dataset_dir=args.dataset,
        out_dir=args.out,
        max_len=pick("max_len", "max_len", 7),
        paths=pick("paths", "paths", 10),
        features=pick("features", "features", 10),
        prefilter_k=pick("prefilter_k", "prefilter_k", 100),
        weights=weights,
        llm=pick("llm", "llm", "stub"),
        model=pick("model", "model", "gpt-4o-mini"),
        method=method,
        executor=pick("executor", "executor", "yannakakis"),
        seed=pick("seed", "seed", 0),
        token_budget=pick("token_budget", "token_budget", 8192),
        stub_script=pick("stub_script", "stub_script", None),
        llm_endpoint=file_cfg.get("llm_endpoint"),
        audit_log=pick("audit_log", "audit_log", None),
    )
    threads = pick("threads", "threads", None)
    if threads is not None:
        config.threads = threads
    config.validate()
    return config


def _descriptors(corpus, config: pipeline.RunConfig) -> fdg.DescriptorMap:
    cache = Path(config.out_dir) / pipeline.DESCRIPTIONS_FILE
    return fdg.load_descriptors(corpus, cache)


def _paths(config: pipeline.RunConfig) -> list[pex.ScoredPath]:
    path = Path(config.out_dir) / pipeline.PATHS_FILE
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found; run the explore stage first")
    return pex.read_paths(path)


def cmd_run(args) -> int:
    config = build_config(args)
    report = pipeline.run_pipeline(config)
    print(json.dumps(report, indent=2))
    return 0


def cmd_describe(args) -> int:
    config = build_config(args)
    corpus = load_dataset(config.dataset_dir)
    gateway = pipeline.make_gateway(config)
    descriptors = pipeline.stage_describe(corpus, config, gateway)
    present = sum(1 for d in descriptors.values() if d.source != fdg.SOURCE_ABSENT)
    print(f"descriptions: {present}/{len(descriptors)} features described")
    return 0


def cmd_explore(args) -> int:
    config = build_config(args)
    corpus = load_dataset(config.dataset_dir)
    gateway = pipeline.make_gateway(config)
    scored = pipeline.stage_explore(corpus, config, gateway, _descriptors(corpus, config))
    print(f"paths: kept {len(scored)} (max_len={config.max_len}, budget={config.paths})")
    return 0


def cmd_execute(args) -> int:
    config = build_config(args)
    corpus = load_dataset(config.dataset_dir)
    consolidated = pipeline.stage_execute(corpus, config, _paths(config))
    print(
        f"consolidated: {len(consolidated.rows)} rows, "
        f"{len(consolidated.foreign_columns())} foreign features"
    )
    return 0


def cmd_select(args) -> int:
    config = build_config(args)
    corpus = load_dataset(config.dataset_dir)
    gateway = pipeline.make_gateway(config)
    result = pipeline.stage_select(
        corpus, config, gateway, _descriptors(corpus, config), _paths(config)
    )
    if result is None:
        print("selection: method none, consolidated table kept as-is")
    else:
        print(f"selected: {', '.join(result.ranking.selected)}")
    return 0


def cmd_bench(args) -> int:
    config = build_config(args)
    corpus = load_dataset(config.dataset_dir)
    paths_file = Path(config.out_dir) / pipeline.PATHS_FILE
    if not paths_file.is_file():
        gateway = pipeline.make_gateway(config)
        descriptors = pipeline.stage_describe(corpus, config, gateway)
        pipeline.stage_explore(corpus, config, gateway, descriptors)
    report = pipeline.stage_bench(corpus, config, _paths(config), repetitions=args.reps)
    print(json.dumps(report["by_length"], indent=2))
    return 0


def cmd_gen(args) -> int:
    out = gen_synthetic(
        args.out,
        kind=args.kind,
        tables=args.tables,
        rows=args.rows,
        selectivity=args.selectivity,
        seed=args.seed,
        plant_hop=args.plant_hop,
        label_noise=args.label_noise,
        task=args.task,
        payload_cols=args.payload_cols,
    )
    print(f"dataset written to {out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="relaug", description="feature augmentation over relational corpora"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, handler in [
        ("run", cmd_run),
        ("describe", cmd_describe),
        ("explore", cmd_explore),
        ("execute", cmd_execute),
        ("select", cmd_select),
        ("bench", cmd_bench),
    ]:
        p = sub.add_parser(name)
        _add_pipeline_flags(p)
        if name == "bench":
            p.add_argument("--reps", type=int, default=3)
        p.set_defaults(handler=handler)

    g = sub.add_parser("gen")
    g.add_argument("--out", required=True)
    g.add_argument("--kind", choices=["chain", "star"], default="chain")
    g.add_argument("--tables", type=int, default=4)
    g.add_argument("--rows", type=int, default=200)
    g.add_argument("--selectivity", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--plant-hop", type=int, default=2)
    g.add_argument("--label-noise", type=float, default=0.05)
    g.add_argument("--payload-cols", type=int, default=2)
    g.add_argument("--task", choices=["classification", "regression"], default="classification")
    g.set_defaults(handler=cmd_gen)

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except Exception as exc:  # surface a clean diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
