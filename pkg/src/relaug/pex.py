"""Join-path exploration: semantic table scoring plus statistical hop metrics.

Phase 1 scores every candidate table with a single batched LLM call (with an
embedding prefilter when the prompt would not fit the token budget). Phase 2
runs a breadth-first search over the join graph, traversing edges in both
directions, scoring each acyclic path as it is discovered and keeping the
top paths in a bounded min-heap.
"""

from __future__ import annotations

import heapq
import json
import logging
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus, CorpusError, column_stats
from .fdg import DescriptorMap, description_of
from .gateway import (
    ChatPrompt,
    Gateway,
    JsonExtractError,
    cosine,
    estimate_tokens,
)

logger = logging.getLogger(__name__)

DEFAULT_WEIGHTS = (1 / 3, 1 / 3, 1 / 3)
DEFAULT_TOKEN_BUDGET = 8192
FALLBACK_TABLE_SCORE = 0.5

TABLE_SCORING_SYSTEM = (
    "You are a data science expert performing semantic table relevance "
    "assessment for {task_description}. Given table schemas and foreign key "
    "relationships, feature names and descriptions, and the target variable, "
    "score each candidate table's relevance to the prediction target.\n\n"
    "Requirements:\n"
    "(1) Score all candidate tables - no exceptions;\n"
    "(2) Score range [0, 100]: 100 = highly relevant, 0 = irrelevant;\n"
    '(3) Return a JSON object: {{"table_1": score_1, "table_2": score_2, ...}}.'
)

FORWARD = "forward"  # anchor holds the foreign key, lookup holds the key
REVERSE = "reverse"  # anchor holds the key, lookup holds the foreign key


@dataclass(frozen=True)
class Hop:
    anchor_column: str
    lookup_column: str
    direction: str  # forward | reverse


@dataclass(frozen=True)
class JoinPath:
    tables: tuple[str, ...]
    hops: tuple[Hop, ...]

    @property
    def length(self) -> int:
        return len(self.tables)

    def sort_key(self):
        return (
            self.length,
            self.tables,
            tuple((h.anchor_column, h.lookup_column, h.direction) for h in self.hops),
        )


@dataclass(frozen=True)
class ScoredPath:
    path: JoinPath
    s_sem: float
    s_stat: float
    score: float
    per_hop: tuple[tuple[float, float, float], ...]


@dataclass
class TableScoreSet:
    scores: dict[str, float]
    prefiltered_out: set[str]
    fallback: bool = False


def task_phrase(corpus: Corpus) -> str:
    return corpus.task_description or f"{corpus.task} of {corpus.target_column}"


def _schema_line(corpus: Corpus, descriptors: DescriptorMap, table: str) -> str:
    parts = []
    for col, kind in corpus.tables[table].columns:
        desc = description_of(descriptors, table, col)
        parts.append(f"{col} ({kind}, {desc})" if desc else f"{col} ({kind})")
    return f"{table}: [{', '.join(parts)}]"


def build_table_scoring_prompt(
    corpus: Corpus,
    descriptors: DescriptorMap,
    candidates: list[str] | None = None,
) -> ChatPrompt:
    """Render the table-relevance prompt for the given candidates
    (default: all non-base tables, in manifest order)."""
    if candidates is None:
        candidates = corpus.candidate_tables
    included = {corpus.base_table, *candidates}
    lines = [
        f"Task: {task_phrase(corpus)}.",
        f"Target: {corpus.target_column}.",
        "Base table:",
        _schema_line(corpus, descriptors, corpus.base_table),
        "Candidate tables:",
    ]
    lines.extend(_schema_line(corpus, descriptors, t) for t in candidates)
    lines.append("Foreign key relationships:")
    for e in corpus.edges:
        if e.from_table in included and e.to_table in included:
            lines.append(f"{e.from_table}.{e.from_column} -> {e.to_table}.{e.to_column}")
    return ChatPrompt(
        system=TABLE_SCORING_SYSTEM.format(task_description=task_phrase(corpus)),
        user="\n".join(lines),
    )


def _prompt_tokens(prompt: ChatPrompt) -> int:
    return estimate_tokens(prompt.system) + estimate_tokens(prompt.user)


def prefilter_tables(
    corpus: Corpus,
    gateway: Gateway,
    descriptors: DescriptorMap,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> set[str]:
    """Candidate tables kept for LLM scoring.

    When the full prompt fits the budget everything is retained; otherwise
    candidates are ranked by schema-to-target embedding cosine and the
    largest fitting prefix survives.
    """
    candidates = corpus.candidate_tables
    if _prompt_tokens(build_table_scoring_prompt(corpus, descriptors, candidates)) <= token_budget:
        return set(candidates)
    target_vec = gateway.embed(f"{corpus.target_column} {task_phrase(corpus)}")
    ranked = sorted(
        candidates,
        key=lambda t: (-cosine(gateway.embed(_schema_text(corpus, descriptors, t)), target_vec), t),
    )
    keep = 0
    for j in range(len(ranked), 0, -1):
        subset = [t for t in candidates if t in set(ranked[:j])]
        if _prompt_tokens(build_table_scoring_prompt(corpus, descriptors, subset)) <= token_budget:
            keep = j
            break
    return set(ranked[:keep])


def _schema_text(corpus: Corpus, descriptors: DescriptorMap, table: str) -> str:
    cols = corpus.tables[table].column_names
    descs = [description_of(descriptors, table, c) for c in cols]
    return " ".join([table, *cols, *[d for d in descs if d]])


def score_tables(
    corpus: Corpus,
    gateway: Gateway,
    descriptors: DescriptorMap,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> TableScoreSet:
    """Semantic relevance score in [0,1] for every candidate table, from one
    batched LLM call. Parse failure degrades to a uniform 0.5 so ranking
    falls back to the statistical signal alone."""
    retained = prefilter_tables(corpus, gateway, descriptors, token_budget)
    ordered = [t for t in corpus.candidate_tables if t in retained]
    prefiltered_out = {t for t in corpus.candidate_tables if t not in retained}
    scores = {t: 0.0 for t in corpus.candidate_tables}
    if not ordered:
        return TableScoreSet(scores=scores, prefiltered_out=prefiltered_out)
    prompt = build_table_scoring_prompt(corpus, descriptors, ordered)
    try:
        parsed = gateway.complete_json(prompt)
        if not isinstance(parsed, dict):
            raise JsonExtractError("table scoring response is not a JSON object")
    except JsonExtractError:
        logger.warning("table scoring failed; every candidate falls back to 0.5")
        for t in ordered:
            scores[t] = FALLBACK_TABLE_SCORE
        return TableScoreSet(scores=scores, prefiltered_out=prefiltered_out, fallback=True)
    for t in ordered:
        value = parsed.get(t)
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            continue
        try:
            numeric = float(value)
        except ValueError:
            continue
        scores[t] = min(100.0, max(0.0, numeric)) / 100.0
    return TableScoreSet(scores=scores, prefiltered_out=prefiltered_out)


def check_weights(weights: tuple[float, float, float]) -> None:
    if any(w < 0 for w in weights):
        raise ValueError(f"weights must be nonnegative, got {weights}")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {weights}")


def hop_stats(
    corpus: Corpus, anchor: str, lookup: str, hop: Hop
) -> tuple[float, float, float]:
    """Per-hop (coverage, uniqueness, size ratio), all in [0,1], computed
    from column statistics without executing the join."""
    if not _is_graph_edge(corpus, anchor, lookup, hop):
        raise CorpusError(
            f"no graph edge between {anchor!r} and {lookup!r} on "
            f"({hop.anchor_column}, {hop.lookup_column})"
        )
    cov = 1.0 - column_stats(corpus, anchor, hop.anchor_column).null_rate
    lk = column_stats(corpus, lookup, hop.lookup_column)
    uniq = lk.distinct_count / lk.row_count if lk.row_count else 0.0
    n_a = len(corpus.tables[anchor])
    n_l = len(corpus.tables[lookup])
    sratio = min(n_a, n_l) / max(n_a, n_l) if min(n_a, n_l) else 0.0
    if not (n_a and n_l):
        sratio = 0.0
    return cov, uniq, sratio


def _is_graph_edge(corpus: Corpus, anchor: str, lookup: str, hop: Hop) -> bool:
    for e in corpus.edges:
        if (
            hop.direction == FORWARD
            and (e.from_table, e.from_column, e.to_table, e.to_column)
            == (anchor, hop.anchor_column, lookup, hop.lookup_column)
        ):
            return True
        if (
            hop.direction == REVERSE
            and (e.to_table, e.to_column, e.from_table, e.from_column)
            == (anchor, hop.anchor_column, lookup, hop.lookup_column)
        ):
            return True
    return False


def path_score(
    corpus: Corpus,
    path: JoinPath,
    table_scores: TableScoreSet,
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS,
) -> ScoredPath:
    """Hybrid score: cumulative semantic + cumulative statistical signal,
    normalized by the number of score components (two per hop)."""
    check_weights(weights)
    alpha, beta, gamma = weights
    s_sem = sum(table_scores.scores.get(t, 0.0) for t in path.tables[1:])
    per_hop = []
    s_stat = 0.0
    for i, hop in enumerate(path.hops):
        cov, uniq, sratio = hop_stats(corpus, path.tables[i], path.tables[i + 1], hop)
        per_hop.append((cov, uniq, sratio))
        s_stat += alpha * cov + beta * uniq + gamma * sratio
    score = (s_sem + s_stat) / (2 * (path.length - 1))
    if not -1e-12 <= score <= 1.0 + 1e-12:
        raise CorpusError(f"path score {score} outside [0,1] for {path.tables}")
    return ScoredPath(
        path=path, s_sem=s_sem, s_stat=s_stat, score=score, per_hop=tuple(per_hop)
    )


def adjacency(corpus: Corpus) -> dict[str, list[tuple[str, Hop]]]:
    """Both-direction view of the join graph with deterministic neighbor order."""
    out: dict[str, list[tuple[str, Hop]]] = {t: [] for t in corpus.tables}
    for e in corpus.edges:
        out[e.from_table].append(
            (e.to_table, Hop(e.from_column, e.to_column, FORWARD))
        )
        out[e.to_table].append(
            (e.from_table, Hop(e.to_column, e.from_column, REVERSE))
        )
    for entries in out.values():
        entries.sort(key=lambda x: (x[0], x[1].anchor_column, x[1].lookup_column, x[1].direction))
    return out


def explore(
    corpus: Corpus,
    table_scores: TableScoreSet,
    max_len: int = 7,
    budget: int = 10,
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS,
) -> list[ScoredPath]:
    """Enumerate every acyclic path of length 2..max_len rooted at the base
    table and return the top ``budget`` by score.

    Paths are scored on discovery and offered to a bounded min-heap; on a tie
    at capacity the first-discovered path wins (discovery order is the
    deterministic BFS order over sorted adjacency). The final ordering is
    (score desc, length asc, lexicographic table sequence).
    """
    if max_len < 2:
        raise ValueError("max_len must be >= 2")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    check_weights(weights)
    adj = adjacency(corpus)
    if not adj.get(corpus.base_table):
        logger.warning("base table %r has no join edges; nothing to explore", corpus.base_table)
        return []
    heap: list[tuple[float, int, ScoredPath]] = []
    counter = 0
    queue: deque[JoinPath] = deque([JoinPath(tables=(corpus.base_table,), hops=())])
    while queue:
        current = queue.popleft()
        if current.length >= max_len:
            continue
        seen = set(current.tables)
        for neighbor, hop in adj[current.tables[-1]]:
            if neighbor in seen:
                continue
            path = JoinPath(tables=current.tables + (neighbor,), hops=current.hops + (hop,))
            scored = path_score(corpus, path, table_scores, weights)
            counter += 1
            entry = (scored.score, -counter, scored)
            if len(heap) < budget:
                heapq.heappush(heap, entry)
            elif scored.score > heap[0][0]:
                heapq.heapreplace(heap, entry)
            queue.append(path)
    kept = [e[2] for e in heap]
    kept.sort(key=lambda sp: (-sp.score, sp.path.sort_key()))
    return kept


def enumerate_all_paths(corpus: Corpus, max_len: int) -> list[JoinPath]:
    """Exhaustive acyclic path enumeration (oracle for the bounded search)."""
    adj = adjacency(corpus)
    out: list[JoinPath] = []

    def walk(path: JoinPath) -> None:
        if path.length >= max_len:
            return
        for neighbor, hop in adj[path.tables[-1]]:
            if neighbor in path.tables:
                continue
            nxt = JoinPath(tables=path.tables + (neighbor,), hops=path.hops + (hop,))
            out.append(nxt)
            walk(nxt)

    walk(JoinPath(tables=(corpus.base_table,), hops=()))
    return out


# --- artifact IO -----------------------------------------------------------


def write_paths(path: str | Path, scored: list[ScoredPath]) -> None:
    payload = [
        {
            "tables": list(sp.path.tables),
            "hops": [
                {
                    "anchor_column": h.anchor_column,
                    "lookup_column": h.lookup_column,
                    "direction": h.direction,
                }
                for h in sp.path.hops
            ],
            "s_sem": sp.s_sem,
            "s_stat": sp.s_stat,
            "score": sp.score,
            "per_hop": [list(t) for t in sp.per_hop],
        }
        for sp in scored
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def read_paths(path: str | Path) -> list[ScoredPath]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    out = []
    for item in payload:
        jp = JoinPath(
            tables=tuple(item["tables"]),
            hops=tuple(
                Hop(h["anchor_column"], h["lookup_column"], h["direction"])
                for h in item["hops"]
            ),
        )
        out.append(
            ScoredPath(
                path=jp,
                s_sem=item["s_sem"],
                s_stat=item["s_stat"],
                score=item["score"],
                per_hop=tuple(tuple(t) for t in item["per_hop"]),
            )
        )
    return out
