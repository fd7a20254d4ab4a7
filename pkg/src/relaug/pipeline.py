"""End-to-end orchestration: describe -> explore -> execute -> select.

Each stage reads and writes artifacts in the output directory so the
subcommands compose: running them one by one produces the same files as one
``run``. Description generation is timed separately from the three pipeline
stages because it is target-independent and cacheable offline.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import fdg, fsel, jex, pex
from .corpus import Corpus, load_dataset, validate_graph
from .gateway import (
    API_KEY_ENV,
    ENDPOINT_ENV,
    Gateway,
    RemoteProvider,
    StubProvider,
)

logger = logging.getLogger(__name__)

DESCRIPTIONS_FILE = "descriptions.json"
PATHS_FILE = "paths.json"
CONSOLIDATED_FILE = "consolidated.csv"
CONSOLIDATION_FILE = "consolidation.json"
AUGMENTED_FILE = "augmented.csv"
SELECTION_FILE = "selection.json"
REPORT_FILE = "report.json"
BENCH_FILE = "bench.json"


@dataclass
class RunConfig:
    dataset_dir: str
    out_dir: str
    max_len: int = 7
    paths: int = 10
    features: int = 10
    prefilter_k: int = 100
    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    llm: str = "stub"  # stub | remote
    model: str = "gpt-4o-mini"
    method: str = "hybrid"  # hybrid | stats_only | llm_only | none
    executor: str = "yannakakis"  # yannakakis | binary
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    seed: int = 0
    token_budget: int = 8192
    stub_script: str | None = None
    llm_endpoint: str | None = None
    audit_log: str | None = None

    def validate(self) -> None:
        if self.max_len < 2:
            raise ValueError("max_len must be >= 2")
        if self.paths < 1:
            raise ValueError("paths must be >= 1")
        if self.features < 1:
            raise ValueError("features must be >= 1")
        pex.check_weights(self.weights)
        if self.llm not in ("stub", "remote"):
            raise ValueError(f"unknown llm mode {self.llm!r}")
        if self.method not in ("hybrid", "stats_only", "llm_only", "none"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.executor not in jex.EXECUTORS:
            raise ValueError(f"unknown executor {self.executor!r}")


def make_gateway(config: RunConfig) -> Gateway:
    if config.llm == "stub":
        provider = StubProvider(script=config.stub_script)
    else:
        endpoint = config.llm_endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise ValueError(f"remote llm requested but {ENDPOINT_ENV} is not set")
        provider = RemoteProvider(
            endpoint=endpoint, api_key=os.environ.get(API_KEY_ENV, "")
        )
    return Gateway(provider, audit_path=config.audit_log, model=config.model)


def _out(config: RunConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def stage_describe(
    corpus: Corpus, config: RunConfig, gateway: Gateway
) -> fdg.DescriptorMap:
    return fdg.generate_descriptions(
        corpus,
        gateway,
        cache_path=_out(config) / DESCRIPTIONS_FILE,
        token_budget=config.token_budget,
    )


def stage_explore(
    corpus: Corpus,
    config: RunConfig,
    gateway: Gateway,
    descriptors: fdg.DescriptorMap,
    warnings: list[str] | None = None,
) -> list[pex.ScoredPath]:
    table_scores = pex.score_tables(
        corpus, gateway, descriptors, token_budget=config.token_budget
    )
    if table_scores.fallback and warnings is not None:
        warnings.append("table scoring fell back to uniform 0.5 scores")
    scored = pex.explore(
        corpus,
        table_scores,
        max_len=config.max_len,
        budget=config.paths,
        weights=config.weights,
    )
    if not scored and warnings is not None:
        warnings.append("no join paths found; base table may be isolated")
    pex.write_paths(_out(config) / PATHS_FILE, scored)
    return scored


def stage_execute(
    corpus: Corpus, config: RunConfig, scored: list[pex.ScoredPath]
) -> jex.ConsolidatedTable:
    executor = jex.EXECUTORS[config.executor]
    if config.threads > 1 and len(scored) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            augmented = list(pool.map(lambda sp: executor(corpus, sp.path), scored))
    else:
        augmented = [executor(corpus, sp.path) for sp in scored]
    if augmented:
        consolidated = jex.consolidate(augmented, scored)
    else:
        base = corpus.table(corpus.base_table)
        consolidated = jex.ConsolidatedTable(
            columns=list(base.columns),
            rows=list(base.rows),
            base_column_count=len(base.columns),
        )
    out = _out(config)
    jex.write_table_csv(out / CONSOLIDATED_FILE, consolidated.columns, consolidated.rows)
    jex.write_consolidation_report(out / CONSOLIDATION_FILE, consolidated)
    return consolidated


def load_consolidated(corpus: Corpus, config: RunConfig) -> jex.ConsolidatedTable:
    """Rebuild the consolidated table from the stage artifacts."""
    from .corpus import load_table

    out = _out(config)
    table = load_table(out / CONSOLIDATED_FILE, "consolidated")
    with open(out / CONSOLIDATION_FILE, encoding="utf-8") as fh:
        provenance = json.load(fh)
    return jex.ConsolidatedTable(
        columns=list(table.columns),
        rows=list(table.rows),
        base_column_count=len(corpus.table(corpus.base_table).columns),
        provenance=provenance,
    )


def stage_select(
    corpus: Corpus,
    config: RunConfig,
    gateway: Gateway,
    descriptors: fdg.DescriptorMap,
    scored: list[pex.ScoredPath],
) -> fsel.SelectionResult | None:
    out = _out(config)
    consolidated = load_consolidated(corpus, config)
    if config.method == "none":
        jex.write_table_csv(out / AUGMENTED_FILE, consolidated.columns, consolidated.rows)
        payload = {
            "method": "none",
            "statistical_order": [],
            "llm_order": [],
            "selected": consolidated.foreign_columns(),
            "features": {},
        }
        with open(out / SELECTION_FILE, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        return None
    kappa = min(config.features, max(1, len(consolidated.foreign_columns())))
    result = fsel.select_features(
        consolidated,
        corpus,
        descriptors,
        gateway,
        kappa=kappa,
        prefilter_k=max(config.prefilter_k, kappa),
        method=config.method,
        threads=config.threads,
    )
    jex.write_table_csv(out / AUGMENTED_FILE, result.columns, result.rows)
    fsel.write_selection_report(out / SELECTION_FILE, result, consolidated, scored)
    return result


def stage_bench(
    corpus: Corpus, config: RunConfig, scored: list[pex.ScoredPath], repetitions: int = 3
) -> dict:
    report = jex.bench_join_strategies(corpus, scored, repetitions=repetitions)
    with open(_out(config) / BENCH_FILE, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report


def run_pipeline(config: RunConfig) -> dict:
    """Full pipeline; returns the report written to report.json."""
    config.validate()
    corpus = load_dataset(config.dataset_dir)
    diagnostics = validate_graph(corpus)
    warnings = [m for m in diagnostics if m.startswith("warning:")]
    violations = [m for m in diagnostics if not m.startswith("warning:")]
    if violations:
        raise ValueError("join graph invalid: " + "; ".join(violations))
    gateway = make_gateway(config)

    t0 = time.perf_counter()
    descriptors = stage_describe(corpus, config, gateway)
    fdg_ms = (time.perf_counter() - t0) * 1000

    t0 = time.perf_counter()
    scored = stage_explore(corpus, config, gateway, descriptors, warnings)
    explore_ms = (time.perf_counter() - t0) * 1000

    t0 = time.perf_counter()
    consolidated = stage_execute(corpus, config, scored)
    execute_ms = (time.perf_counter() - t0) * 1000

    t0 = time.perf_counter()
    result = stage_select(corpus, config, gateway, descriptors, scored)
    select_ms = (time.perf_counter() - t0) * 1000
    if result is not None:
        warnings.extend(result.warnings)
        selected_count = len(result.ranking.selected)
    else:
        selected_count = len(consolidated.foreign_columns())

    report = {
        "config": {**asdict(config), "weights": list(config.weights)},
        "timings_ms": {
            "path_explorer": explore_ms,
            "join_executor": execute_ms,
            "feature_selector": select_ms,
            "fdg_offline": fdg_ms,
        },
        "path_count": len(scored),
        "candidate_feature_count": len(consolidated.foreign_columns()),
        "selected_feature_count": selected_count,
        "llm_calls": dict(sorted(gateway.calls_by_kind.items())),
        "llm_calls_total": gateway.calls_total,
        "warnings": warnings,
    }
    with open(_out(config) / REPORT_FILE, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report
