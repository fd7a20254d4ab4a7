"""Join execution: dedup, both executors, their equivalence, consolidation."""

from __future__ import annotations

from collections import Counter

import pytest

from relaug.corpus import CorpusError
from relaug.jex import (
    bench_join_strategies,
    binary_left_join_path,
    consolidate,
    dedup_on_key,
    suffix_yannakakis,
    tables_equal,
)
from relaug.pex import (
    FORWARD,
    Hop,
    JoinPath,
    ScoredPath,
    TableScoreSet,
    enumerate_all_paths,
    explore,
    path_score,
)

from helpers import build_corpus, random_corpus, table_from_cells


def scored(corpus, path):
    uniform = TableScoreSet(
        scores={t: 0.5 for t in corpus.candidate_tables}, prefiltered_out=set()
    )
    return path_score(corpus, path, uniform)


# --- dedup ------------------------------------------------------------------


def test_dedup_keeps_first_occurrence():
    t = table_from_cells("t", ["k", "v"], [["a", 1], ["b", 2], ["a", 3], ["c", 4]])
    out = dedup_on_key(t, "k")
    assert out.rows == [("a", 1), ("b", 2), ("c", 4)]


def test_dedup_identity_on_unique_keys():
    t = table_from_cells("t", ["k", "v"], [["a", 1], ["b", 2]])
    assert dedup_on_key(t, "k").rows == t.rows


def test_dedup_drops_null_keys():
    t = table_from_cells("t", ["k", "v"], [[None, 1], ["a", 2]])
    assert dedup_on_key(t, "k").rows == [("a", 2)]


def test_dedup_canonicalizes_text_keys():
    t = table_from_cells("t", ["k", "v"], [[" a ", 1], ["a", 2]])
    assert dedup_on_key(t, "k").rows == [(" a ", 1)]


# --- binary executor --------------------------------------------------------


def simple_join_corpus():
    base = table_from_cells(
        "b", ["id", "fk", "y"], [[1, 10, 0], [2, 11, 1], [3, 99, 0]]
    )
    lookup = table_from_cells("l", ["k", "v"], [[10, "x"], [11, "y"], [12, "z"]])
    return build_corpus(
        {"b": base, "l": lookup}, [("b", "fk", "l", "k")], base="b", target="y"
    )


def one_hop_path():
    return JoinPath(tables=("b", "l"), hops=(Hop("fk", "k", FORWARD),))


def test_binary_three_row_worked_example():
    corpus = simple_join_corpus()
    aug = binary_left_join_path(corpus, one_hop_path())
    assert aug.column_names == ["id", "fk", "y", "l.v"]
    assert aug.rows == [(1, 10, 0, "x"), (2, 11, 1, "y"), (3, 99, 0, None)]
    assert aug.base_column_count == 3


def test_binary_duplicate_keys_join_first_occurrence():
    base = table_from_cells("b", ["fk", "y"], [["k", 0], ["q", 1]])
    lookup = table_from_cells("l", ["k", "v"], [["k", "v1"], ["k", "v2"]])
    corpus = build_corpus(
        {"b": base, "l": lookup}, [("b", "fk", "l", "k")], base="b", target="y"
    )
    aug = binary_left_join_path(
        corpus, JoinPath(tables=("b", "l"), hops=(Hop("fk", "k", FORWARD),))
    )
    assert aug.rows == [("k", 0, "v1"), ("q", 1, None)]


def test_binary_full_coverage_has_no_new_nulls():
    base = table_from_cells("b", ["fk", "y"], [[1, 0], [2, 1]])
    lookup = table_from_cells("l", ["k", "v"], [[1, 5.0], [2, 6.0]])
    corpus = build_corpus(
        {"b": base, "l": lookup}, [("b", "fk", "l", "k")], base="b", target="y"
    )
    aug = binary_left_join_path(
        corpus, JoinPath(tables=("b", "l"), hops=(Hop("fk", "k", FORWARD),))
    )
    assert all(None not in row for row in aug.rows)


def test_join_keys_compare_numerically_and_trimmed():
    base = table_from_cells("b", ["fk", "s", "y"], [[1, " a ", 0], [2, "b", 1]])
    l1 = table_from_cells("l1", ["k", "v"], [[1.0, "one"], [2.0, "two"]])
    l2 = table_from_cells("l2", ["k", "w"], [["a", 10], ["b ", 20]])
    corpus = build_corpus(
        {"b": base, "l1": l1, "l2": l2},
        [("b", "fk", "l1", "k"), ("b", "s", "l2", "k")],
        base="b",
        target="y",
    )
    num = binary_left_join_path(
        corpus, JoinPath(tables=("b", "l1"), hops=(Hop("fk", "k", FORWARD),))
    )
    assert [r[-1] for r in num.rows] == ["one", "two"]
    txt = binary_left_join_path(
        corpus, JoinPath(tables=("b", "l2"), hops=(Hop("s", "k", FORWARD),))
    )
    assert [r[-1] for r in txt.rows] == [10, 20]


# --- suffix-Yannakakis ------------------------------------------------------


def chain_with_partial_matches():
    """A mid-path null fk means binary keeps t1 features with t2 nulls; the
    optimized executor must reproduce exactly that."""
    base = table_from_cells(
        "base", ["fk", "y"], [[1, 0], [2, 1], [None, 0], [7, 1]]
    )
    t1 = table_from_cells(
        "t1", ["k", "fk2", "v1"], [[1, 5, "a"], [2, None, "b"], [3, 6, "c"]]
    )
    t2 = table_from_cells("t2", ["m", "v2"], [[5, 50.0], [6, 60.0], [7, 70.0]])
    corpus = build_corpus(
        {"base": base, "t1": t1, "t2": t2},
        [("base", "fk", "t1", "k"), ("t1", "fk2", "t2", "m")],
        base="base",
        target="y",
    )
    path = JoinPath(
        tables=("base", "t1", "t2"),
        hops=(Hop("fk", "k", FORWARD), Hop("fk2", "m", FORWARD)),
    )
    return corpus, path


def test_yannakakis_equals_binary_on_partial_matches():
    corpus, path = chain_with_partial_matches()
    b = binary_left_join_path(corpus, path)
    y = suffix_yannakakis(corpus, path)
    assert tables_equal(b, y)
    # row with fk=2 keeps its t1 features even though t2 never matches
    row = dict(zip(b.column_names, b.rows[1]))
    assert row["t1.v1"] == "b" and row["t2.v2"] is None


def test_length_two_degenerates_to_binary_plan():
    corpus = simple_join_corpus()
    inst = {}
    y = suffix_yannakakis(corpus, one_hop_path(), instrument=inst)
    b = binary_left_join_path(corpus, one_hop_path())
    assert tables_equal(b, y)
    assert "reduced_sizes" not in inst  # no reduction pass at all


def test_reduction_sizes_and_soundness_by_hand():
    corpus, path = chain_with_partial_matches()
    inst = {}
    suffix_yannakakis(corpus, path, instrument=inst)
    # base references {1, 2, 7}; t1 keys {1, 2, 3} -> keep k=1, k=2
    # surviving t1 rows reference fk2 {5}; t2 keys {5, 6, 7} -> keep m=5
    assert inst["raw_sizes"] == [3, 3]
    assert inst["reduced_sizes"] == [2, 1]

    # soundness: every dropped tuple lacks a partner in the reduced
    # predecessor (brute-force over the raw tables)
    base_keys = {r[0] for r in corpus.tables["base"].rows if r[0] is not None}
    t1_dropped = [r for r in corpus.tables["t1"].rows if r[0] not in base_keys]
    assert all(r[0] not in base_keys for r in t1_dropped)
    t1_kept_refs = {
        r[1]
        for r in corpus.tables["t1"].rows
        if r[0] in base_keys and r[1] is not None
    }
    t2_dropped = [r for r in corpus.tables["t2"].rows if r[0] not in t1_kept_refs]
    assert {r[0] for r in t2_dropped} == {6, 7}


def test_executor_equivalence_randomized():
    paths_checked = 0
    for seed in range(30):
        corpus = random_corpus(seed)
        for path in enumerate_all_paths(corpus, max_len=6):
            b = binary_left_join_path(corpus, path)
            y = suffix_yannakakis(corpus, path)
            assert tables_equal(b, y), f"seed={seed} path={path.tables}"
            paths_checked += 1
    assert paths_checked > 50


def test_row_and_distribution_preservation_randomized():
    for seed in range(12):
        corpus = random_corpus(seed)
        base = corpus.tables["base"]
        tidx = base.column_index("target")
        target_before = Counter(r[tidx] for r in base.rows)
        for path in enumerate_all_paths(corpus, max_len=5):
            aug = suffix_yannakakis(corpus, path)
            assert len(aug.rows) == len(base)
            out_tidx = aug.column_names.index("target")
            assert Counter(r[out_tidx] for r in aug.rows) == target_before
            assert [r[: len(base.columns)] for r in aug.rows] == base.rows


def test_selective_chain_shrinks_intermediates(tmp_path):
    from relaug.corpus import load_dataset
    from relaug.synth import gen_synthetic

    root = gen_synthetic(
        tmp_path / "ds", kind="chain", tables=4, rows=1000, selectivity=0.01, seed=3
    )
    corpus = load_dataset(root)
    path = JoinPath(
        tables=("base", "t1", "t2", "t3"),
        hops=(Hop("fk", "id", FORWARD), Hop("fk", "id", FORWARD), Hop("fk", "id", FORWARD)),
    )
    bi, yi = {}, {}
    b = binary_left_join_path(corpus, path, instrument=bi)
    y = suffix_yannakakis(corpus, path, instrument=yi)
    assert tables_equal(b, y)
    assert bi["intermediates"] == [1000, 1000, 1000]
    # every materialized suffix intermediate is strictly smaller than any
    # binary intermediate, and the reductions shrink tables >= 10x
    assert max(yi["suffix_rows"]) < min(bi["intermediates"])
    assert all(
        raw / max(red, 1) >= 10 for raw, red in zip(yi["raw_sizes"], yi["reduced_sizes"])
    )


# --- consolidation ----------------------------------------------------------


def two_path_star():
    """t2 is reachable directly (dense) and through t1 (sparse)."""
    base = table_from_cells(
        "base",
        ["f1", "f2", "y"],
        [[1, 1, 0], [2, 2, 1], [3, 3, 0], [4, None, 1], [5, None, 0]],
    )
    t1 = table_from_cells("t1", ["k", "fk", "v1"], [[1, 1, "a"], [2, 2, "b"]])
    t2 = table_from_cells("t2", ["k", "shared"], [[1, 1.0], [2, 2.0], [3, 3.0]])
    corpus = build_corpus(
        {"base": base, "t1": t1, "t2": t2},
        [("base", "f1", "t1", "k"), ("base", "f2", "t2", "k"), ("t1", "fk", "t2", "k")],
        base="base",
        target="y",
    )
    direct = JoinPath(tables=("base", "t2"), hops=(Hop("f2", "k", FORWARD),))
    via_t1 = JoinPath(
        tables=("base", "t1", "t2"),
        hops=(Hop("f1", "k", FORWARD), Hop("fk", "k", FORWARD)),
    )
    return corpus, direct, via_t1


def test_consolidate_prefers_lowest_null_ratio():
    corpus, direct, via_t1 = two_path_star()
    augs = [binary_left_join_path(corpus, p) for p in (direct, via_t1)]
    sps = [scored(corpus, p) for p in (direct, via_t1)]
    cons = consolidate(augs, sps)
    # direct path: nulls at rows 4-5 (ratio 0.4); via t1: ratio 0.6
    assert cons.provenance["t2.shared"]["path_rank"] == 0
    assert cons.provenance["t2.shared"]["null_ratio"] == pytest.approx(0.4)
    assert cons.column_names.count("t2.shared") == 1
    assert len(cons.rows) == 5


def test_consolidate_single_path_is_identity():
    corpus = simple_join_corpus()
    aug = binary_left_join_path(corpus, one_hop_path())
    cons = consolidate([aug], [scored(corpus, one_hop_path())])
    assert cons.columns == aug.columns
    assert cons.rows == aug.rows


def test_consolidate_tie_breaks_by_path_score():
    from relaug.jex import AugmentedTable

    cols = [("y", "integer"), ("t9.f", "float")]
    path_a = JoinPath(tables=("base", "t9"), hops=(Hop("a", "k", FORWARD),))
    path_b = JoinPath(tables=("base", "t8", "t9"), hops=(Hop("a", "k", FORWARD),) * 2)
    low = AugmentedTable(
        columns=cols, rows=[(0, 1.0), (1, None)], source_path=path_a, base_column_count=1
    )
    high = AugmentedTable(
        columns=cols, rows=[(0, 2.0), (1, None)], source_path=path_b, base_column_count=1
    )
    sp = lambda path, s: ScoredPath(path=path, s_sem=s, s_stat=s, score=s, per_hop=())
    # equal null ratios (0.5 each): the 0.9-score path wins over 0.7
    cons = consolidate([low, high], [sp(path_a, 0.7), sp(path_b, 0.9)])
    assert cons.provenance["t9.f"]["path_rank"] == 1
    assert cons.column_values("t9.f") == [2.0, None]
    # flipped scores keep the first path instead
    cons2 = consolidate([low, high], [sp(path_a, 0.9), sp(path_b, 0.7)])
    assert cons2.provenance["t9.f"]["path_rank"] == 0


def test_consolidate_rejects_misaligned_inputs():
    corpus, direct, via_t1 = two_path_star()
    a = binary_left_join_path(corpus, direct)
    b = binary_left_join_path(corpus, via_t1)
    b.rows = b.rows[:-1]
    with pytest.raises(CorpusError, match="misaligned"):
        consolidate([a, b], [scored(corpus, direct), scored(corpus, via_t1)])


# --- benchmark harness ------------------------------------------------------


def test_bench_reports_verified_timings():
    corpus, path = chain_with_partial_matches()
    sp = scored(corpus, path)
    report = bench_join_strategies(corpus, [sp], repetitions=2)
    assert report["repetitions"] == 2
    entry = report["paths"][0]
    assert entry["length"] == 3
    assert entry["binary_ms"] >= 0 and entry["yannakakis_ms"] >= 0
    assert "3" in report["by_length"]
