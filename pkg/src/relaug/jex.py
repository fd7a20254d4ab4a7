"""Join-path materialization with row- and distribution-preserving semantics.

Two executors produce identical augmented tables:

* ``binary_left_join_path`` - the baseline: sequential per-hop left outer
  joins, each join partner first-occurrence-deduplicated on its join key.
* ``suffix_yannakakis`` - semi-join reduces the non-base suffix tables before
  joining them, then left-joins the deduplicated suffix result to the base
  table in a single pass. Reductions cascade from the base outward: a suffix
  row is dropped only when no surviving row of the previous table references
  its key, which is exactly the condition under which it can never appear in
  the left-join result. (Reducing in the opposite direction would also drop
  rows whose own features still reach the base through a partial match.)

Both executors share column planning and final projection, so their outputs
are comparable cell-for-cell.
"""

from __future__ import annotations

import gc
import json
import statistics
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus, CorpusError, Table, canon_key
from .pex import JoinPath, ScoredPath

Row = tuple


@dataclass
class AugmentedTable:
    """Base rows (verbatim, row-aligned) plus prefixed foreign feature columns."""

    columns: list[tuple[str, str]]
    rows: list[Row]
    source_path: JoinPath
    base_column_count: int

    @property
    def column_names(self) -> list[str]:
        return [c for c, _ in self.columns]

    def foreign_columns(self) -> list[str]:
        return [c for c, _ in self.columns[self.base_column_count :]]

    def column_values(self, name: str) -> list:
        i = self.column_names.index(name)
        return [row[i] for row in self.rows]

    def null_ratio(self, name: str) -> float:
        values = self.column_values(name)
        if not values:
            return 0.0
        return sum(1 for v in values if v is None) / len(values)


@dataclass
class ConsolidatedTable:
    columns: list[tuple[str, str]]
    rows: list[Row]
    base_column_count: int
    provenance: dict[str, dict] = field(default_factory=dict)

    @property
    def column_names(self) -> list[str]:
        return [c for c, _ in self.columns]

    def foreign_columns(self) -> list[str]:
        return [c for c, _ in self.columns[self.base_column_count :]]

    def column_values(self, name: str) -> list:
        i = self.column_names.index(name)
        return [row[i] for row in self.rows]


def dedup_on_key(table: Table, key: str) -> Table:
    """First occurrence per distinct (canonicalized) key; null keys dropped."""
    kidx = table.column_index(key)
    seen = set()
    rows = []
    for row in table.rows:
        k = canon_key(row[kidx])
        if k is None or k in seen:
            continue
        seen.add(k)
        rows.append(row)
    return Table(name=table.name, columns=list(table.columns), rows=rows)


def _plan(corpus: Corpus, path: JoinPath):
    """Wide-table layout shared by both executors.

    Internal layout: base columns, then every column of each suffix table in
    path order (join keys included so later hops can anchor on them). The
    output projection drops each suffix table's consumed lookup-key column.
    """
    base = corpus.table(path.tables[0])
    wide: list[tuple[str, str]] = list(base.columns)
    offsets = [0]
    keep = list(range(len(base.columns)))
    for i, hop in enumerate(path.hops):
        t = corpus.table(path.tables[i + 1])
        offset = len(wide)
        offsets.append(offset)
        drop = t.column_index(hop.lookup_column)
        for j, (col, kind) in enumerate(t.columns):
            if j != drop:
                keep.append(offset + j)
            wide.append((f"{t.name}.{col}", kind))
    out_columns = [wide[i] for i in keep]
    names = [c for c, _ in out_columns]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise CorpusError(f"column-name collision after prefixing: {dupes}")
    return base, offsets, keep, out_columns


def _anchor_position(corpus: Corpus, path: JoinPath, offsets: list[int], i: int) -> int:
    """Wide-row position of hop i's anchor column (a column of tables[i])."""
    table = corpus.table(path.tables[i])
    return offsets[i] + table.column_index(path.hops[i].anchor_column)


def _project(rows: list[Row], keep: list[int]) -> list[Row]:
    return [tuple(row[i] for i in keep) for row in rows]


def _first_occurrence_index(rows: list[Row], kidx: int) -> dict:
    index: dict = {}
    for row in rows:
        k = row[kidx]
        if k is None:
            continue
        if type(k) is str:
            k = k.strip()
        if k not in index:
            index[k] = row
    return index


def _left_join(rows: list[Row], aidx: int, index: dict, pad_width: int) -> list[Row]:
    null_pad = (None,) * pad_width
    out = []
    append = out.append
    get = index.get
    for row in rows:
        k = row[aidx]
        if k is not None:
            if type(k) is str:
                k = k.strip()
            partner = get(k)
        else:
            partner = None
        append(row + (partner if partner is not None else null_pad))
    return out


def _verify_invariants(corpus: Corpus, path: JoinPath, rows: list[Row]) -> None:
    base = corpus.table(path.tables[0])
    if len(rows) != len(base):
        raise CorpusError(
            f"row preservation violated: {len(rows)} rows vs base {len(base)}"
        )
    tidx = base.column_index(corpus.target_column)
    if path.tables[0] == corpus.base_table:
        before = Counter(row[tidx] for row in base.rows)
        after = Counter(row[tidx] for row in rows)
        if before != after:
            raise CorpusError("target distribution changed during materialization")


def binary_left_join_path(
    corpus: Corpus, path: JoinPath, instrument: dict | None = None
) -> AugmentedTable:
    """Sequential left outer joins, deduplicating each partner on its key."""
    base, offsets, keep, out_columns = _plan(corpus, path)
    rows = list(base.rows)
    intermediates = []
    for i, hop in enumerate(path.hops):
        lookup = corpus.table(path.tables[i + 1])
        index = _first_occurrence_index(lookup.rows, lookup.column_index(hop.lookup_column))
        aidx = _anchor_position(corpus, path, offsets, i)
        rows = _left_join(rows, aidx, index, len(lookup.columns))
        intermediates.append(len(rows))
    if instrument is not None:
        instrument["intermediates"] = intermediates
    out_rows = _project(rows, keep)
    _verify_invariants(corpus, path, out_rows)
    return AugmentedTable(
        columns=out_columns,
        rows=out_rows,
        source_path=path,
        base_column_count=len(base.columns),
    )


def suffix_yannakakis(
    corpus: Corpus, path: JoinPath, instrument: dict | None = None
) -> AugmentedTable:
    """Semi-join-reduced multi-way materialization of the path suffix.

    Single-hop paths degenerate to the binary plan. Longer paths reduce and
    deduplicate each suffix table in one pass, inner-join the (small) suffix,
    and finish with one left join against the base table.
    """
    if path.length == 2:
        return binary_left_join_path(corpus, path, instrument=instrument)
    base, offsets, keep, out_columns = _plan(corpus, path)

    # reduction cascade: keys reachable from the base select suffix rows
    a0 = base.column_index(path.hops[0].anchor_column)
    prev_keys = set()
    for row in base.rows:
        k = row[a0]
        if k is None:
            continue
        if type(k) is str:
            k = k.strip()
        prev_keys.add(k)

    reduced: list[tuple[list[Row], dict, int]] = []  # (rows, key index, width)
    raw_sizes = []
    reduced_sizes = []
    for i, hop in enumerate(path.hops):
        t = corpus.table(path.tables[i + 1])
        kidx = t.column_index(hop.lookup_column)
        index: dict = {}
        rows = []
        for row in t.rows:
            k = row[kidx]
            if k is None:
                continue
            if type(k) is str:
                k = k.strip()
            if k in prev_keys and k not in index:
                index[k] = row
                rows.append(row)
        raw_sizes.append(len(t))
        reduced_sizes.append(len(rows))
        reduced.append((rows, index, len(t.columns)))
        if i + 1 < len(path.hops):
            nxt_anchor = t.column_index(path.hops[i + 1].anchor_column)
            prev_keys = set()
            for row in rows:
                k = row[nxt_anchor]
                if k is None:
                    continue
                if type(k) is str:
                    k = k.strip()
                prev_keys.add(k)

    # suffix join (left, in path order); S stays unique on the first hop key
    suffix_rows, _, _ = reduced[0]
    suffix_rows = list(suffix_rows)
    suffix_sizes = [len(suffix_rows)]
    for i in range(1, len(reduced)):
        _, index, width = reduced[i]
        # hop i anchors on tables[i], whose suffix slice starts at offsets[i]-offsets[1]
        aidx = offsets[i] - offsets[1] + corpus.table(path.tables[i]).column_index(
            path.hops[i].anchor_column
        )
        suffix_rows = _left_join(suffix_rows, aidx, index, width)
        suffix_sizes.append(len(suffix_rows))

    if instrument is not None:
        instrument["raw_sizes"] = raw_sizes
        instrument["reduced_sizes"] = reduced_sizes
        instrument["suffix_rows"] = suffix_sizes

    t1 = corpus.table(path.tables[1])
    b1 = t1.column_index(path.hops[0].lookup_column)
    suffix_index = _first_occurrence_index(suffix_rows, b1)
    suffix_width = offsets[-1] + len(corpus.table(path.tables[-1]).columns) - offsets[1]
    rows = _left_join(list(base.rows), a0, suffix_index, suffix_width)

    out_rows = _project(rows, keep)
    _verify_invariants(corpus, path, out_rows)
    return AugmentedTable(
        columns=out_columns,
        rows=out_rows,
        source_path=path,
        base_column_count=len(base.columns),
    )


EXECUTORS = {
    "binary": binary_left_join_path,
    "yannakakis": suffix_yannakakis,
}


def consolidate(
    augmented: list[AugmentedTable], scores: list[ScoredPath]
) -> ConsolidatedTable:
    """Column-wise merge of per-path augmented tables.

    A feature appearing in several augmented tables keeps its lowest-null
    version (ties: higher path score, then earlier path rank). Base columns
    are copied once; the row count never changes.
    """
    if not augmented:
        raise CorpusError("nothing to consolidate")
    if len({len(a.rows) for a in augmented}) != 1:
        raise CorpusError("misaligned augmented tables (row counts differ)")
    first = augmented[0]
    base_cols = first.columns[: first.base_column_count]

    # winner per qualified feature name: (null_ratio asc, score desc, rank asc)
    chosen: dict[str, tuple[tuple, int, int, str]] = {}
    order: list[str] = []
    for rank, aug in enumerate(augmented):
        score = scores[rank].score if rank < len(scores) else 0.0
        for pos in range(aug.base_column_count, len(aug.columns)):
            name, kind = aug.columns[pos]
            ratio = aug.null_ratio(name)
            key = (ratio, -score, rank)
            if name not in chosen:
                order.append(name)
                chosen[name] = (key, rank, pos, kind)
            elif key < chosen[name][0]:
                chosen[name] = (key, rank, pos, kind)

    columns = list(base_cols) + [(name, chosen[name][3]) for name in order]
    n = len(first.rows)
    picked = [(chosen[name][1], chosen[name][2]) for name in order]
    rows = []
    for r in range(n):
        base_part = first.rows[r][: first.base_column_count]
        rows.append(base_part + tuple(augmented[t].rows[r][p] for t, p in picked))
    provenance = {
        name: {"path_rank": chosen[name][1], "null_ratio": chosen[name][0][0]}
        for name in order
    }
    return ConsolidatedTable(
        columns=columns,
        rows=rows,
        base_column_count=len(base_cols),
        provenance=provenance,
    )


def tables_equal(a: AugmentedTable, b: AugmentedTable) -> bool:
    return a.columns == b.columns and a.rows == b.rows


def bench_join_strategies(
    corpus: Corpus, paths: list[ScoredPath], repetitions: int = 3
) -> dict:
    """Wall-clock comparison of the two executors over the given paths.

    Output equality is verified once per path before timing; the report
    carries per-path medians and a per-length median speedup.
    """
    entries = []
    for sp in paths:
        path = sp.path
        ref = binary_left_join_path(corpus, path)  # doubles as warmup
        alt = suffix_yannakakis(corpus, path)
        if not tables_equal(ref, alt):
            raise CorpusError(f"executor outputs differ on path {path.tables}")
        del ref, alt

        def timed(executor) -> float:
            gc.collect()
            gc.disable()
            try:
                t0 = time.perf_counter()
                executor(corpus, path)
                return (time.perf_counter() - t0) * 1000
            finally:
                gc.enable()

        binary_times = []
        yann_times = []
        for rep in range(repetitions):
            # mirrored ABBA order inside every repetition so neither strategy
            # systematically runs on a colder allocator
            if rep % 2 == 0:
                b1 = timed(binary_left_join_path)
                y1 = timed(suffix_yannakakis)
                y2 = timed(suffix_yannakakis)
                b2 = timed(binary_left_join_path)
            else:
                y1 = timed(suffix_yannakakis)
                b1 = timed(binary_left_join_path)
                b2 = timed(binary_left_join_path)
                y2 = timed(suffix_yannakakis)
            binary_times.append((b1 + b2) / 2)
            yann_times.append((y1 + y2) / 2)
        binary_ms = statistics.median(binary_times)
        yann_ms = statistics.median(yann_times)
        entries.append(
            {
                "tables": list(path.tables),
                "length": path.length,
                "binary_ms": binary_ms,
                "yannakakis_ms": yann_ms,
                "speedup": binary_ms / yann_ms if yann_ms > 0 else float("inf"),
            }
        )
    by_length: dict[int, list[float]] = {}
    for e in entries:
        by_length.setdefault(e["length"], []).append(e["speedup"])
    return {
        "repetitions": repetitions,
        "paths": entries,
        "by_length": {
            str(length): statistics.median(vals) for length, vals in sorted(by_length.items())
        },
    }


# --- artifact IO -----------------------------------------------------------


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table_csv(path: str | Path, columns: list[tuple[str, str]], rows: list[Row]) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([c for c, _ in columns])
        for row in rows:
            writer.writerow([format_cell(v) for v in row])


def write_consolidation_report(path: str | Path, table: ConsolidatedTable) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table.provenance, fh, indent=2, sort_keys=True)
        fh.write("\n")
