"""Dataset loading: typed tables, the PK-FK join graph, and column statistics.

A dataset directory holds one ``<name>.csv`` per table plus a ``graph.json``
manifest naming the base table, target column, task kind, and the directed
foreign-key edges. Tables are immutable after load; per-column statistics are
memoized on first request.
"""

from __future__ import annotations

import csv
import json
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

Value = Any  # one of: None, int, float, bool, str

NULL_LITERALS = {"", "NULL", "null", "NA"}

_INT_RE = re.compile(r"^[+-]?\d+$")
_FLOAT_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_BOOL_LITERALS = {"true": True, "false": False}


class CorpusError(ValueError):
    """Raised when a dataset directory or manifest is invalid."""


@dataclass(frozen=True)
class JoinEdge:
    """Directed edge: ``from_table.from_column`` is a foreign key referencing
    ``to_table.to_column``."""

    from_table: str
    from_column: str
    to_table: str
    to_column: str


@dataclass
class Table:
    name: str
    columns: list[tuple[str, str]]  # (name, inferred type) in file order
    rows: list[tuple[Value, ...]]  # physical file order; index == row_order

    @property
    def column_names(self) -> list[str]:
        return [c for c, _ in self.columns]

    def column_index(self, column: str) -> int:
        for i, (c, _) in enumerate(self.columns):
            if c == column:
                return i
        raise CorpusError(f"unknown column {column!r} in table {self.name!r}")

    def column_type(self, column: str) -> str:
        return self.columns[self.column_index(column)][1]

    def column_values(self, column: str) -> list[Value]:
        i = self.column_index(column)
        return [row[i] for row in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class ColumnStats:
    row_count: int
    null_count: int
    distinct_count: int
    null_rate: float


@dataclass
class Corpus:
    tables: dict[str, Table]
    edges: list[JoinEdge]
    base_table: str
    target_column: str
    task: str  # "classification" | "regression"
    dataset_description: str | None = None
    task_description: str | None = None
    _stats: dict[tuple[str, str], ColumnStats] = field(
        default_factory=dict, repr=False, compare=False
    )
    _stats_lock: threading.Lock = field(
        default_factory=threading.Lock, repr=False, compare=False
    )

    @property
    def candidate_tables(self) -> list[str]:
        return [t for t in self.tables if t != self.base_table]

    def table(self, name: str) -> Table:
        try:
            return self.tables[name]
        except KeyError:
            raise CorpusError(f"unknown table {name!r}") from None


def canon_key(value: Value) -> Value:
    """Canonical form used for join-key comparison: text keys are compared
    after trimming surrounding whitespace, numeric keys numerically."""
    if isinstance(value, str):
        return value.strip()
    return value


def parse_cell(raw: str) -> Value | None:
    """Null detection only; typed parsing happens after column inference."""
    return None if raw in NULL_LITERALS else raw


def infer_column_type(raw_values: Iterable[str]) -> str:
    """Whole-column type with precedence integer -> float -> boolean -> text.

    ``raw_values`` are the non-null cell strings of one column. A column with
    no non-null values infers as text.
    """
    saw_any = False
    all_int = all_float = all_bool = True
    for raw in raw_values:
        saw_any = True
        if all_int and not _INT_RE.match(raw):
            all_int = False
        if all_float and not _FLOAT_RE.match(raw):
            all_float = False
        if all_bool and raw.lower() not in _BOOL_LITERALS:
            all_bool = False
        if not (all_int or all_float or all_bool):
            return "text"
    if not saw_any:
        return "text"
    if all_int:
        return "integer"
    if all_float:
        return "float"
    if all_bool:
        return "boolean"
    return "text"


def convert(raw: str | None, kind: str) -> Value:
    if raw is None:
        return None
    if kind == "integer":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "boolean":
        return _BOOL_LITERALS[raw.lower()]
    return raw


def load_table(path: Path, name: str) -> Table:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise CorpusError(f"table {name!r}: empty CSV file") from None
            raw_rows = list(reader)
    except OSError as exc:
        raise CorpusError(f"table {name!r}: unreadable CSV ({exc})") from exc
    if len(set(header)) != len(header):
        raise CorpusError(f"table {name!r}: duplicate column names")
    width = len(header)
    cells: list[list[str | None]] = []
    for lineno, raw in enumerate(raw_rows, start=2):
        if len(raw) != width:
            raise CorpusError(
                f"table {name!r} line {lineno}: expected {width} values, got {len(raw)}"
            )
        cells.append([parse_cell(c) for c in raw])
    kinds = [
        infer_column_type(row[i] for row in cells if row[i] is not None)
        for i in range(width)
    ]
    rows = [
        tuple(convert(row[i], kinds[i]) for i in range(width)) for row in cells
    ]
    return Table(name=name, columns=list(zip(header, kinds)), rows=rows)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise CorpusError(message)


def load_dataset(path: str | Path) -> Corpus:
    """Load and validate a dataset directory (CSV tables + graph.json)."""
    root = Path(path)
    manifest_path = root / "graph.json"
    if not manifest_path.is_file():
        raise CorpusError(f"missing manifest {manifest_path}")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    for key in ("base_table", "target", "task", "tables", "edges"):
        _require(key in manifest, f"manifest missing key {key!r}")
    names = manifest["tables"]
    _require(len(set(names)) == len(names), "duplicate table names in manifest")
    tables: dict[str, Table] = {}
    for name in names:
        csv_path = root / f"{name}.csv"
        _require(csv_path.is_file(), f"missing CSV for table {name!r}")
        tables[name] = load_table(csv_path, name)

    edges: list[JoinEdge] = []
    for spec in manifest["edges"]:
        edge = JoinEdge(
            from_table=spec["from_table"],
            from_column=spec["from_column"],
            to_table=spec["to_table"],
            to_column=spec["to_column"],
        )
        for t, c in ((edge.from_table, edge.from_column), (edge.to_table, edge.to_column)):
            _require(t in tables, f"edge references unknown table {t!r}")
            _require(
                c in tables[t].column_names,
                f"edge references unknown column {t}.{c}",
            )
        _require(
            edge.from_table != edge.to_table,
            f"self-loop edge on table {edge.from_table!r}",
        )
        edges.append(edge)

    base = manifest["base_table"]
    target = manifest["target"]
    task = manifest["task"]
    _require(base in tables, f"base table {base!r} not loaded")
    _require(
        target in tables[base].column_names,
        f"target column {target!r} not in base table",
    )
    _require(task in ("classification", "regression"), f"unknown task {task!r}")
    corpus = Corpus(
        tables=tables,
        edges=edges,
        base_table=base,
        target_column=target,
        task=task,
        dataset_description=manifest.get("dataset_description"),
        task_description=manifest.get("task_description"),
    )
    if task == "classification":
        distinct = {v for v in tables[base].column_values(target) if v is not None}
        _require(
            len(distinct) >= 2,
            f"classification target {target!r} has {len(distinct)} class(es), need >= 2",
        )
    return corpus


def column_stats(corpus: Corpus, table: str, column: str) -> ColumnStats:
    """Null/distinct counts for one column, memoized per (table, column)."""
    key = (table, column)
    cached = corpus._stats.get(key)
    if cached is not None:
        return cached
    values = corpus.table(table).column_values(column)
    row_count = len(values)
    null_count = sum(1 for v in values if v is None)
    distinct_count = len({v for v in values if v is not None})
    stats = ColumnStats(
        row_count=row_count,
        null_count=null_count,
        distinct_count=distinct_count,
        null_rate=null_count / max(row_count, 1),
    )
    with corpus._stats_lock:
        # idempotent fill: concurrent first computations produce equal values
        return corpus._stats.setdefault(key, stats)


def validate_graph(corpus: Corpus) -> list[str]:
    """Diagnostics for the join graph.

    Hard violations (missing columns, join-type mismatch) make the pipeline
    untrustworthy; zero key overlap is reported with a ``warning:`` prefix and
    is non-fatal (the join simply produces all-null features).
    """
    messages: list[str] = []
    for edge in corpus.edges:
        sides = []
        ok = True
        for t, c in ((edge.from_table, edge.from_column), (edge.to_table, edge.to_column)):
            table = corpus.tables.get(t)
            if table is None:
                messages.append(f"edge {edge}: unknown table {t!r}")
                ok = False
                continue
            if c not in table.column_names:
                messages.append(f"edge {edge}: unknown column {t}.{c}")
                ok = False
                continue
            sides.append((table, c))
        if not ok:
            continue
        (ft, fc), (tt, tc) = sides
        if ft.column_type(fc) != tt.column_type(tc):
            messages.append(
                f"type mismatch on edge {edge.from_table}.{edge.from_column} -> "
                f"{edge.to_table}.{edge.to_column}: "
                f"{ft.column_type(fc)} vs {tt.column_type(tc)}"
            )
            continue
        left = {canon_key(v) for v in ft.column_values(fc) if v is not None}
        right = {canon_key(v) for v in tt.column_values(tc) if v is not None}
        if not (left & right):
            messages.append(
                f"warning: no overlapping key values on edge "
                f"{edge.from_table}.{edge.from_column} -> {edge.to_table}.{edge.to_column}"
            )
    return messages
