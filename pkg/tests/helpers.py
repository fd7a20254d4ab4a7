"""Shared test utilities: dataset writers and randomized corpus generation."""

from __future__ import annotations

import csv
import json
import math
import random
from collections import Counter
from pathlib import Path

from relaug.corpus import Corpus, JoinEdge, Table, infer_column_type, convert


def trigram_cosine(a: str, b: str) -> float:
    """Independent unhashed trigram cosine (oracle for embedding-order checks)."""

    def grams(s: str) -> Counter:
        s = s.lower()
        return Counter(s[i : i + 3] for i in range(len(s) - 2)) or Counter([s])

    ca, cb = grams(a), grams(b)
    dot = sum(ca[g] * cb[g] for g in ca)
    na = math.sqrt(sum(v * v for v in ca.values()))
    nb = math.sqrt(sum(v * v for v in cb.values()))
    return dot / (na * nb)


def write_dataset(
    root: Path,
    tables: dict[str, tuple[list[str], list[list[str]]]],
    manifest: dict,
) -> Path:
    """Write raw CSV cells (strings, unformatted) plus graph.json."""
    root.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in tables.items():
        with open(root / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    with open(root / "graph.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return root


def manifest_for(
    tables: list[str],
    edges: list[tuple[str, str, str, str]],
    base: str,
    target: str,
    task: str = "classification",
    **extra,
) -> dict:
    return {
        "base_table": base,
        "target": target,
        "task": task,
        "tables": tables,
        "edges": [
            {
                "from_table": a,
                "from_column": b,
                "to_table": c,
                "to_column": d,
            }
            for a, b, c, d in edges
        ],
        **extra,
    }


def table_from_cells(name: str, header: list[str], cells: list[list]) -> Table:
    """Build a typed Table from python values (None allowed) the way the
    loader would: stringify, infer, convert."""
    raw = [["" if v is None else _to_raw(v) for v in row] for row in cells]
    kinds = [
        infer_column_type(row[i] for row in raw if row[i] != "")
        for i in range(len(header))
    ]
    rows = [
        tuple(
            convert(None if row[i] == "" else row[i], kinds[i])
            for i in range(len(header))
        )
        for row in raw
    ]
    return Table(name=name, columns=list(zip(header, kinds)), rows=rows)


def _to_raw(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def build_corpus(
    tables: dict[str, Table],
    edges: list[tuple[str, str, str, str]],
    base: str,
    target: str,
    task: str = "classification",
) -> Corpus:
    return Corpus(
        tables=tables,
        edges=[JoinEdge(*e) for e in edges],
        base_table=base,
        target_column=target,
        task=task,
    )


def random_corpus(seed: int, max_tables: int = 7, max_rows: int = 50) -> Corpus:
    """Random small corpus with duplicate keys, nulls, and a connected graph.

    Keys come from small alphabets so joins fan out and dangle; roughly a
    third of the graphs get an extra (possibly parallel) edge.
    """
    rng = random.Random(seed)
    n_tables = rng.randint(2, max_tables)
    names = ["base"] + [f"t{i}" for i in range(1, n_tables)]

    tables: dict[str, Table] = {}
    key_pool = rng.randint(3, 12)  # small alphabet forces duplicates

    def random_column(rows: int, kind: str) -> list:
        out = []
        for _ in range(rows):
            if rng.random() < 0.15:
                out.append(None)
            elif kind == "key":
                out.append(rng.randrange(key_pool))
            elif kind == "num":
                out.append(round(rng.uniform(0, 10), 3))
            else:
                out.append(rng.choice(["ax", "by", "cz", "dw"]))
        return out

    for name in names:
        rows = rng.randint(1, max_rows)
        header = ["k1", "k2", "v1", "v2"]
        cols = [
            random_column(rows, "key"),
            random_column(rows, "key"),
            random_column(rows, "num"),
            random_column(rows, "cat"),
        ]
        if name == "base":
            header.append("target")
            cols.append([rng.randint(0, 1) for _ in range(rows)])
        cells = [list(vals) for vals in zip(*cols)]
        tables[name] = table_from_cells(name, header, cells)

    # spanning-tree edges keep every table reachable from the base
    edges: list[tuple[str, str, str, str]] = []
    for i in range(1, n_tables):
        other = names[rng.randrange(i)]
        key_a = rng.choice(["k1", "k2"])
        key_b = rng.choice(["k1", "k2"])
        if rng.random() < 0.5:
            edges.append((other, key_a, names[i], key_b))
        else:
            edges.append((names[i], key_b, other, key_a))
    if n_tables > 2 and rng.random() < 0.35:
        a, b = rng.sample(names, 2)
        edges.append((a, rng.choice(["k1", "k2"]), b, rng.choice(["k1", "k2"])))

    return build_corpus(tables, edges, base="base", target="target")
