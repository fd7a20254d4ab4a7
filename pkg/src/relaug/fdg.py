"""Feature description generation: one batched LLM call per corpus, cached.

Descriptions are display metadata for downstream prompts; the pipeline keeps
working when they are absent (missing keys, parse failure, no gateway).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus
from .gateway import ChatPrompt, Gateway, JsonExtractError, estimate_tokens

logger = logging.getLogger(__name__)

FDG_SYSTEM = (
    "You are a data science expert analyzing database schemas. Given table "
    "names, feature names, and optional dataset descriptions, generate "
    "concise, semantically-rich descriptions for each feature.\n\n"
    "Requirements:\n"
    "(1) Generate descriptions for all features provided;\n"
    "(2) Each description should be 3-10 words;\n"
    "(3) Focus on semantic meaning, not technical data types;\n"
    "(4) Transform abbreviations and codes into clear, domain-relevant descriptions;\n"
    "(5) Return a JSON object: "
    '{"table_1.feature_1": "description_1", "table_1.feature_2": "description_2", ...}.'
)

SOURCE_LLM = "llm"
SOURCE_CACHE = "cache"
SOURCE_ABSENT = "absent"


@dataclass(frozen=True)
class FeatureDescriptor:
    table: str
    feature: str
    description: str
    source: str  # llm | cache | absent


DescriptorMap = dict[tuple[str, str], FeatureDescriptor]


def _schema_lines(corpus: Corpus, tables: list[str]) -> list[str]:
    lines = []
    for name in tables:
        table = corpus.tables[name]
        feats = ", ".join(f"{c} ({k})" for c, k in table.columns)
        lines.append(f"{name}: [{feats}]")
    return lines


def build_fdg_prompt(corpus: Corpus, tables: list[str] | None = None) -> ChatPrompt:
    """Render the description-generation prompt for the given tables
    (default: all, in manifest order)."""
    tables = list(corpus.tables) if tables is None else tables
    parts = []
    if corpus.dataset_description:
        parts.append(f"Dataset context: {corpus.dataset_description}")
    parts.append("Tables and features:")
    parts.extend(_schema_lines(corpus, tables))
    return ChatPrompt(system=FDG_SYSTEM, user="\n".join(parts))


def corpus_schema_hash(corpus: Corpus) -> str:
    payload = json.dumps(
        [
            [(name, table.column_names) for name, table in corpus.tables.items()],
            corpus.dataset_description,
        ],
        sort_keys=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _atomic_write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _table_batches(corpus: Corpus, token_budget: int) -> list[list[str]]:
    """Greedy maximal batches of whole tables whose prompt fits the budget."""
    names = list(corpus.tables)
    if estimate_tokens(build_fdg_prompt(corpus, names).user) <= token_budget:
        return [names]
    batches: list[list[str]] = []
    current: list[str] = []
    for name in names:
        candidate = current + [name]
        if current and estimate_tokens(build_fdg_prompt(corpus, candidate).user) > token_budget:
            batches.append(current)
            current = [name]
        else:
            current = candidate
    if current:
        batches.append(current)
    return batches


def generate_descriptions(
    corpus: Corpus,
    gateway: Gateway | None,
    cache_path: str | Path | None = None,
    token_budget: int = 100_000,
) -> DescriptorMap:
    """Descriptions for every (table, feature) in the corpus.

    Answers come from the cache file when its schema hash matches, otherwise
    from one LLM call (several only if the corpus exceeds the token budget).
    Features the LLM does not cover get source="absent".
    """
    schema_hash = corpus_schema_hash(corpus)
    cache_file = Path(cache_path) if cache_path else None

    cached = _load_cache(cache_file, schema_hash)
    if cached is not None:
        return _build_map(corpus, cached, SOURCE_CACHE)

    raw: dict[str, str] = {}
    if gateway is not None:
        for batch in _table_batches(corpus, token_budget):
            prompt = build_fdg_prompt(corpus, batch)
            try:
                parsed = gateway.complete_json(prompt)
            except JsonExtractError:
                logger.warning("description generation returned no JSON; proceeding without")
                parsed = {}
            if isinstance(parsed, dict):
                raw.update({str(k): str(v) for k, v in parsed.items() if v})
    descriptors = _build_map(corpus, raw, SOURCE_LLM)
    if cache_file is not None and gateway is not None:
        kept = {
            f"{d.table}.{d.feature}": d.description
            for d in descriptors.values()
            if d.source != SOURCE_ABSENT
        }
        _atomic_write_json(cache_file, {"hash": schema_hash, "descriptions": kept})
    return descriptors


def load_descriptors(corpus: Corpus, cache_path: str | Path | None) -> DescriptorMap:
    """Cache-or-absent descriptors for stages that must not call the LLM."""
    cached = _load_cache(
        Path(cache_path) if cache_path else None, corpus_schema_hash(corpus)
    )
    if cached is not None:
        return _build_map(corpus, cached, SOURCE_CACHE)
    return _build_map(corpus, {}, SOURCE_ABSENT)


def _load_cache(cache_file: Path | None, schema_hash: str) -> dict[str, str] | None:
    if cache_file is None or not cache_file.is_file():
        return None
    try:
        with open(cache_file, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, ValueError):
        return None
    if payload.get("hash") != schema_hash:
        return None
    descriptions = payload.get("descriptions")
    return descriptions if isinstance(descriptions, dict) else None


def _build_map(corpus: Corpus, raw: dict[str, str], source: str) -> DescriptorMap:
    out: DescriptorMap = {}
    for name, table in corpus.tables.items():
        for feature in table.column_names:
            text = raw.get(f"{name}.{feature}", "")
            out[(name, feature)] = FeatureDescriptor(
                table=name,
                feature=feature,
                description=text,
                source=source if text else SOURCE_ABSENT,
            )
    return out


def description_of(descriptors: DescriptorMap, table: str, feature: str) -> str:
    d = descriptors.get((table, feature))
    return d.description if d is not None else ""
