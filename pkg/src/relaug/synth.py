"""Seeded synthetic dataset generation for benchmarks and end-to-end tests.

Chain datasets plant one informative feature ``signal`` in the table at a
configurable hop distance from the base table; the base target is derived
from the signal value reached by following the foreign-key chain, so the
signal is recoverable only through the join path. All other feature columns
are uniform noise. ``selectivity`` restricts every foreign-key column to
referencing only that fraction of the next table's keys (coverage stays
full; key variety shrinks), which is what makes semi-join reductions
profitable.
"""

from __future__ import annotations

import csv
import json
import random
from pathlib import Path

from .jex import format_cell


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])


def gen_synthetic(
    out_dir: str | Path,
    kind: str = "chain",
    tables: int = 4,
    rows: int = 200,
    selectivity: float = 1.0,
    seed: int = 0,
    plant_hop: int = 2,
    label_noise: float = 0.05,
    task: str = "classification",
    payload_cols: int = 2,
    base_rows: int | None = None,
) -> Path:
    """Write a valid dataset directory; identical inputs give identical bytes.

    ``rows`` sizes the candidate tables; ``base_rows`` (default: same) sizes
    the base table independently.
    """
    if tables < 2:
        raise ValueError("need at least 2 tables")
    if kind not in ("chain", "star"):
        raise ValueError(f"unknown kind {kind!r}")
    if not (0.0 < selectivity <= 1.0):
        raise ValueError("selectivity must be in (0, 1]")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    if kind == "chain":
        plant_hop = min(max(1, plant_hop), tables - 1)
        _gen_chain(
            out, rng, tables, rows, selectivity, plant_hop, label_noise, task,
            payload_cols, base_rows or rows,
        )
    else:
        _gen_star(out, rng, tables, rows, label_noise, task, payload_cols,
                  base_rows or rows)
    return out


def _target(signal: float, rng: random.Random, label_noise: float, task: str):
    if task == "regression":
        return signal * 10.0 + rng.gauss(0.0, 0.1)
    label = 1 if signal > 0.5 else 0
    if rng.random() < label_noise:
        label = 1 - label
    return label


def _gen_chain(
    out: Path,
    rng: random.Random,
    tables: int,
    rows: int,
    selectivity: float,
    plant_hop: int,
    label_noise: float,
    task: str,
    payload_cols: int,
    base_rows: int,
) -> None:
    names = ["base"] + [f"t{i}" for i in range(1, tables)]
    restricted = max(1, int(round(selectivity * rows)))

    # candidate tables first, so the base target can follow the fk chain
    columns: dict[str, list[str]] = {}
    data: dict[str, list[tuple]] = {}
    for i in range(1, tables):
        name = names[i]
        header = ["id"] + [f"x{i}_{j}" for j in range(1, payload_cols + 1)]
        has_fk = i < tables - 1
        if has_fk:
            header.append("fk")
        if i == plant_hop:
            header.append("signal")
        body = []
        for pk in range(rows):
            row: list = [pk] + [rng.uniform(0, 1) for _ in range(payload_cols)]
            if has_fk:
                row.append(rng.randrange(restricted))
            if i == plant_hop:
                row.append(rng.uniform(0, 1))
            body.append(tuple(row))
        columns[name] = header
        data[name] = body

    def follow(fk: int) -> float:
        key = fk
        for i in range(1, tables):
            row = data[names[i]][key]
            if i == plant_hop:
                return row[columns[names[i]].index("signal")]
            key = row[columns[names[i]].index("fk")]
        raise AssertionError("plant hop beyond chain")

    base_header = ["id", "noise_a", "noise_b", "fk", "target"]
    base_body = []
    for pk in range(base_rows):
        fk = rng.randrange(restricted)
        signal = follow(fk)
        base_body.append(
            (pk, rng.uniform(0, 1), rng.uniform(0, 1), fk,
             _target(signal, rng, label_noise, task))
        )
    columns["base"] = base_header
    data["base"] = base_body

    for name in names:
        _write_csv(out / f"{name}.csv", columns[name], data[name])
    edges = [
        {"from_table": "base", "from_column": "fk", "to_table": "t1", "to_column": "id"}
    ]
    for i in range(1, tables - 1):
        edges.append(
            {
                "from_table": f"t{i}",
                "from_column": "fk",
                "to_table": f"t{i+1}",
                "to_column": "id",
            }
        )
    _write_manifest(out, names, edges, task, kind="chain")


def _gen_star(
    out: Path,
    rng: random.Random,
    tables: int,
    rows: int,
    label_noise: float,
    task: str,
    payload_cols: int,
    base_rows: int,
) -> None:
    names = ["base"] + [f"t{i}" for i in range(1, tables)]
    leaf_data: dict[str, list[tuple]] = {}
    leaf_cols: dict[str, list[str]] = {}
    for i in range(1, tables):
        name = names[i]
        header = ["id"] + [f"x{i}_{j}" for j in range(1, payload_cols + 1)]
        if i == 1:
            header.append("signal")
        body = []
        for pk in range(rows):
            row: list = [pk] + [rng.uniform(0, 1) for _ in range(payload_cols)]
            if i == 1:
                row.append(rng.uniform(0, 1))
            body.append(tuple(row))
        leaf_cols[name] = header
        leaf_data[name] = body

    base_header = (
        ["id", "noise_a"] + [f"fk{i}" for i in range(1, tables)] + ["target"]
    )
    base_body = []
    for pk in range(base_rows):
        fks = [rng.randrange(rows) for _ in range(1, tables)]
        signal = leaf_data["t1"][fks[0]][leaf_cols["t1"].index("signal")]
        base_body.append(
            (pk, rng.uniform(0, 1), *fks, _target(signal, rng, label_noise, task))
        )

    _write_csv(out / "base.csv", base_header, base_body)
    for i in range(1, tables):
        _write_csv(out / f"{names[i]}.csv", leaf_cols[names[i]], leaf_data[names[i]])
    edges = [
        {
            "from_table": "base",
            "from_column": f"fk{i}",
            "to_table": f"t{i}",
            "to_column": "id",
        }
        for i in range(1, tables)
    ]
    _write_manifest(out, names, edges, task, kind="star")


def _write_manifest(
    out: Path, names: list[str], edges: list[dict], task: str, kind: str
) -> None:
    manifest = {
        "base_table": "base",
        "target": "target",
        "task": task,
        "tables": names,
        "edges": edges,
        "dataset_description": f"Synthetic {kind} corpus with one planted signal feature.",
        "task_description": f"{task} of target from joined signal",
    }
    with open(out / "graph.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
