"""Feature selection over the consolidated table.

Every discovered (foreign) feature gets two statistics against the target:
plug-in mutual information on quantile-binned histograms (nats) and absolute
Pearson correlation. The two rankings are Borda-merged, the top K candidates
go to the LLM for a hybrid semantic ranking, and the final table keeps the
base columns plus the top-kappa selected features.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .fdg import DescriptorMap, description_of
from .gateway import ChatPrompt, Gateway, JsonExtractError
from .jex import ConsolidatedTable
from .pex import ScoredPath, task_phrase

logger = logging.getLogger(__name__)

MAX_BINS = 10

FS_SYSTEM_HYBRID = (
    "You are a data science expert performing feature selection for "
    "{task_description}. Given feature names and descriptions, the target "
    "variable, and statistical measures, rank features by importance for "
    "predicting the target. You have access to two statistical metrics for "
    "each feature:\n"
    "(1) mutual_info: Non-linear predictive power (mutual information "
    "measures dependency with target);\n"
    "(2) pearson_corr: Measures linear relationship strength.\n\n"
    "Integration Strategy:\n"
    "- Features with high statistical scores across multiple metrics should "
    "be ranked high.\n"
    "- Features with consistently low statistical scores should be ranked "
    "low unless they are semantically critical for the task.\n"
    "- When statistical evidence and semantic reasoning agree, rank with "
    "high confidence accordingly.\n"
    "- When statistical evidence conflicts with semantic intuition, "
    "prioritize statistical evidence as it reflects actual data patterns.\n"
    "- For cryptic or uninformative feature names, with no comprehensive "
    "descriptions, rely primarily on statistical evidence.\n\n"
    "Requirements:\n"
    "(1) Rank all features provided - no exceptions;\n"
    '(2) Return a JSON array: ["most_important", ..., "least_important"].'
)

FS_SYSTEM_SEMANTIC = (
    "You are a data science expert performing feature selection for "
    "{task_description}. Given feature names and descriptions and the target "
    "variable, rank features by importance for predicting the target.\n\n"
    "Requirements:\n"
    "(1) Rank all features provided - no exceptions;\n"
    '(2) Return a JSON array: ["most_important", ..., "least_important"].'
)


@dataclass(frozen=True)
class FeatureStats:
    feature: str  # qualified <table>.<column> name
    mutual_info: float
    pearson_abs: float
    valid_rows: int


@dataclass
class FeatureRanking:
    statistical_order: list[str]
    llm_order: list[str]
    selected: list[str]
    method: str  # hybrid | stats_only | llm_only


@dataclass
class SelectionResult:
    ranking: FeatureRanking
    stats: dict[str, FeatureStats]
    columns: list[tuple[str, str]]
    rows: list[tuple]
    warnings: list[str] = field(default_factory=list)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _numeric_column(values: list) -> bool:
    saw = False
    for v in values:
        if v is None:
            continue
        saw = True
        if not _is_number(v):
            return False
    return saw


def quantile_bins(values: list, max_bins: int = MAX_BINS) -> list[int]:
    """Bin ids for a numeric column: min(max_bins, distinct) quantile bins.

    At most max_bins distinct values degenerate to one bin per value, which
    is what the quantile partition converges to and avoids collapsing skewed
    columns whose top quantile edge coincides with the maximum.
    """
    distinct = sorted(set(values))
    if len(distinct) <= 1:
        return [0] * len(values)
    if len(distinct) <= max_bins:
        ranks = {v: i for i, v in enumerate(distinct)}
        return [ranks[v] for v in values]
    arr = np.asarray(values, dtype=float)
    edges = np.quantile(arr, [(j + 1) / max_bins for j in range(max_bins - 1)])
    return np.searchsorted(edges, arr, side="left").tolist()


def _discretize(values: list) -> list:
    if _numeric_column(values):
        return quantile_bins(values)
    return values


def _entropy(counts: Counter, n: int) -> float:
    return -sum((c / n) * math.log(c / n) for c in counts.values())


def mutual_information(feature: list, target: list, task: str) -> float:
    """Plug-in MI in nats over the joint histogram of the valid rows.

    Numeric columns (feature always; target under regression) are quantile
    binned; categorical and boolean columns are used as-is.
    """
    pairs = [(f, t) for f, t in zip(feature, target) if f is not None and t is not None]
    if len(pairs) < 2:
        logger.warning("mutual information: fewer than 2 valid rows")
        return 0.0
    fx = _discretize([f for f, _ in pairs])
    ty = [t for _, t in pairs]
    if task == "regression":
        ty = _discretize(ty)
    n = len(pairs)
    hx = _entropy(Counter(fx), n)
    hy = _entropy(Counter(ty), n)
    hxy = _entropy(Counter(zip(fx, ty)), n)
    return max(0.0, hx + hy - hxy)


def _encode_numeric(values: list) -> list[float] | None:
    """Floats for numeric/boolean values; None when the column is categorical
    or binary-encodable (exactly two distinct values)."""
    out = []
    for v in values:
        if isinstance(v, bool):
            out.append(1.0 if v else 0.0)
        elif _is_number(v):
            out.append(float(v))
        else:
            distinct = sorted(set(values))
            if len(distinct) == 2:
                return [float(distinct.index(x)) for x in values]
            return None
    return out


def pearson_abs(feature: list, target: list) -> float:
    """|Pearson rho| over pairwise-complete rows; 0.0 for non-numeric
    features, degenerate pairs, and zero-variance columns."""
    pairs = [(f, t) for f, t in zip(feature, target) if f is not None and t is not None]
    if len(pairs) < 2:
        return 0.0
    fvals = [f for f, _ in pairs]
    if not all(_is_number(v) or isinstance(v, bool) for v in fvals):
        return 0.0
    x = np.asarray([1.0 if v is True else 0.0 if v is False else float(v) for v in fvals])
    encoded = _encode_numeric([t for _, t in pairs])
    if encoded is None:
        return 0.0
    y = np.asarray(encoded)
    xd = x - x.mean()
    yd = y - y.mean()
    sx = float(np.sqrt(np.dot(xd, xd)))
    sy = float(np.sqrt(np.dot(yd, yd)))
    if sx == 0.0 or sy == 0.0:
        return 0.0
    rho = float(np.dot(xd, yd)) / (sx * sy)
    return min(1.0, abs(rho))


def borda_merge(rankings: list[list[tuple[str, float]]]) -> list[str]:
    """Merge (feature, statistic) rankings by Borda count.

    A ranking of m features awards m-1 points at the top down to 0; features
    tied on the underlying statistic share the average of their positions'
    points, so the merge is invariant to how ties were ordered on input.
    Final order: total points descending, name ascending.
    """
    if not rankings:
        return []
    feature_sets = [frozenset(f for f, _ in r) for r in rankings]
    if any(fs != feature_sets[0] for fs in feature_sets[1:]):
        raise ValueError("borda_merge requires rankings over the same feature set")
    points: dict[str, float] = {f: 0.0 for f in feature_sets[0]}
    for ranking in rankings:
        ordered = sorted(ranking, key=lambda fv: -fv[1])
        m = len(ordered)
        i = 0
        while i < m:
            j = i
            while j < m and ordered[j][1] == ordered[i][1]:
                j += 1
            share = sum(m - 1 - p for p in range(i, j)) / (j - i)
            for p in range(i, j):
                points[ordered[p][0]] += share
            i = j
    return sorted(points, key=lambda f: (-points[f], f))


def split_qualified(corpus: Corpus, qualified: str) -> tuple[str, str] | None:
    for table in corpus.tables:
        prefix = table + "."
        if qualified.startswith(prefix):
            column = qualified[len(prefix) :]
            if column in corpus.tables[table].column_names:
                return table, column
    return None


def _feature_entry(
    corpus: Corpus,
    descriptors: DescriptorMap,
    stat: FeatureStats,
    include_stats: bool,
) -> str:
    located = split_qualified(corpus, stat.feature)
    desc = description_of(descriptors, *located) if located else ""
    entry = f'{{"name": "{stat.feature}", "desc": {json.dumps(desc)}'
    if include_stats:
        entry += (
            f', "mutual_info": {format(stat.mutual_info, ".4f")}'
            f', "pearson_corr": {format(stat.pearson_abs, ".4f")}'
        )
    return entry + "}"


def build_fs_prompt(
    features: list[FeatureStats],
    descriptors: DescriptorMap,
    corpus: Corpus,
    include_stats: bool = True,
) -> ChatPrompt:
    """Render the feature-ranking prompt; feature order is the statistical
    order the caller established, values are shown with 4 decimals."""
    if not features:
        raise ValueError("feature list must be non-empty")
    base_cols = corpus.tables[corpus.base_table].column_names
    base_context = ", ".join(c for c in base_cols if c != corpus.target_column)
    entries = ",\n ".join(
        _feature_entry(corpus, descriptors, st, include_stats) for st in features
    )
    header = (
        "Features with statistical context:"
        if include_stats
        else "Features:"
    )
    user = "\n".join(
        [
            f"Task: {task_phrase(corpus)}.",
            f"Target: {corpus.target_column}.",
            f"Base features (context only, always retained): [{base_context}]",
            header,
            f"[{entries}]",
        ]
    )
    system = (FS_SYSTEM_HYBRID if include_stats else FS_SYSTEM_SEMANTIC).format(
        task_description=task_phrase(corpus)
    )
    return ChatPrompt(system=system, user=user)


def compute_feature_stats(
    consolidated: ConsolidatedTable, corpus: Corpus, threads: int = 1
) -> dict[str, FeatureStats]:
    target = consolidated.column_values(corpus.target_column)
    candidates = consolidated.foreign_columns()

    def one(name: str) -> FeatureStats:
        col = consolidated.column_values(name)
        valid = sum(
            1 for f, t in zip(col, target) if f is not None and t is not None
        )
        return FeatureStats(
            feature=name,
            mutual_info=mutual_information(col, target, corpus.task),
            pearson_abs=pearson_abs(col, target),
            valid_rows=valid,
        )

    if threads > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            computed = list(pool.map(one, candidates))
    else:
        computed = [one(name) for name in candidates]
    return {st.feature: st for st in computed}


def select_features(
    consolidated: ConsolidatedTable,
    corpus: Corpus,
    descriptors: DescriptorMap,
    gateway: Gateway | None,
    kappa: int = 10,
    prefilter_k: int = 100,
    method: str = "hybrid",
    threads: int = 1,
) -> SelectionResult:
    """Rank the foreign features and build the final augmented table.

    hybrid/llm_only issue exactly one ranking call over the Borda-prefiltered
    top ``prefilter_k`` candidates; stats_only skips the LLM. LLM output is
    repaired: unknown names dropped, missing features appended in statistical
    order. Base columns always survive.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if prefilter_k < kappa:
        raise ValueError("prefilter size must be >= kappa")
    if method not in ("hybrid", "stats_only", "llm_only"):
        raise ValueError(f"unknown selection method {method!r}")
    warnings: list[str] = []
    stats = compute_feature_stats(consolidated, corpus, threads=threads)
    candidates = consolidated.foreign_columns()
    mi_ranking = [(f, stats[f].mutual_info) for f in candidates]
    rho_ranking = [(f, stats[f].pearson_abs) for f in candidates]
    statistical_order = (
        borda_merge([mi_ranking, rho_ranking]) if candidates else []
    )

    llm_order: list[str] = []
    effective = method
    if method in ("hybrid", "llm_only") and candidates:
        if gateway is None:
            warnings.append("no gateway configured; falling back to stats_only")
            effective = "stats_only"
        else:
            shortlist = statistical_order[: min(prefilter_k, len(statistical_order))]
            prompt = build_fs_prompt(
                [stats[f] for f in shortlist],
                descriptors,
                corpus,
                include_stats=(method == "hybrid"),
            )
            try:
                parsed = gateway.complete_json(prompt)
                if not isinstance(parsed, list):
                    raise JsonExtractError("feature ranking response is not a JSON array")
            except JsonExtractError:
                warnings.append("feature ranking failed; degrading to stats_only")
                effective = "stats_only"
                parsed = []
            seen = set()
            known = set(candidates)
            for name in parsed:
                if isinstance(name, str) and name in known and name not in seen:
                    seen.add(name)
                    llm_order.append(name)
            for name in statistical_order:
                if name not in seen:
                    llm_order.append(name)

    if effective == "stats_only":
        llm_order = []
        selected = statistical_order[:kappa]
    else:
        selected = llm_order[:kappa]

    base_cols = consolidated.columns[: consolidated.base_column_count]
    name_to_pos = {c: i for i, (c, _) in enumerate(consolidated.columns)}
    kinds = dict(consolidated.columns)
    keep_positions = list(range(consolidated.base_column_count)) + [
        name_to_pos[f] for f in selected
    ]
    columns = list(base_cols) + [(f, kinds[f]) for f in selected]
    rows = [tuple(row[i] for i in keep_positions) for row in consolidated.rows]
    ranking = FeatureRanking(
        statistical_order=statistical_order,
        llm_order=llm_order,
        selected=selected,
        method=effective,
    )
    return SelectionResult(
        ranking=ranking, stats=stats, columns=columns, rows=rows, warnings=warnings
    )


def write_selection_report(
    path: str | Path,
    result: SelectionResult,
    consolidated: ConsolidatedTable,
    paths: list[ScoredPath],
) -> None:
    features = {}
    for name, st in sorted(result.stats.items()):
        prov = consolidated.provenance.get(name, {})
        rank = prov.get("path_rank")
        features[name] = {
            "mutual_info": st.mutual_info,
            "pearson_abs": st.pearson_abs,
            "null_ratio": prov.get("null_ratio"),
            "provenance_path": list(paths[rank].path.tables)
            if rank is not None and rank < len(paths)
            else None,
        }
    payload = {
        "method": result.ranking.method,
        "statistical_order": result.ranking.statistical_order,
        "llm_order": result.ranking.llm_order,
        "selected": result.ranking.selected,
        "features": features,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
