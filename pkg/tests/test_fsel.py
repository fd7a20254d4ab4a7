"""Feature statistics against brute-force oracles, Borda merging, selection."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest

from relaug.fsel import (
    FeatureStats,
    borda_merge,
    build_fs_prompt,
    compute_feature_stats,
    mutual_information,
    pearson_abs,
    quantile_bins,
    select_features,
)
from relaug.fdg import load_descriptors
from relaug.gateway import Gateway, StubProvider
from relaug.jex import ConsolidatedTable
from relaug.pex import FORWARD, Hop, JoinPath, ScoredPath

from helpers import build_corpus, table_from_cells


# --- independent oracles ----------------------------------------------------


def mi_contingency_oracle(feature, target, task):
    """Explicit joint contingency table, direct definition of MI (nats)."""
    pairs = [(f, t) for f, t in zip(feature, target) if f is not None and t is not None]
    if len(pairs) < 2:
        return 0.0
    fv = [f for f, _ in pairs]
    tv = [t for _, t in pairs]
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in fv):
        fv = quantile_bins(fv)
    if task == "regression" and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in tv
    ):
        tv = quantile_bins(tv)
    xs = sorted(set(fv), key=repr)
    ys = sorted(set(tv), key=repr)
    n = len(pairs)
    table = np.zeros((len(xs), len(ys)))
    for f, t in zip(fv, tv):
        table[xs.index(f), ys.index(t)] += 1
    mi = 0.0
    row = table.sum(axis=1)
    col = table.sum(axis=0)
    for i in range(len(xs)):
        for j in range(len(ys)):
            if table[i, j] > 0:
                mi += (table[i, j] / n) * math.log(
                    table[i, j] * n / (row[i] * col[j])
                )
    return mi


def pearson_two_pass_oracle(xs, ys):
    """Textbook two-pass covariance / sigma formula on plain floats."""
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / n
    sx = math.sqrt(sum((x - mx) ** 2 for x in xs) / n)
    sy = math.sqrt(sum((y - my) ** 2 for y in ys) / n)
    if sx == 0 or sy == 0:
        return 0.0
    return abs(cov / (sx * sy))


def random_column(rng, n, flavor):
    out = []
    for _ in range(n):
        if rng.random() < 0.1:
            out.append(None)
        elif flavor == "float":
            out.append(rng.uniform(-5, 5))
        elif flavor == "int":
            out.append(rng.randint(0, 6))
        elif flavor == "cat":
            out.append(rng.choice(["a", "b", "c"]))
        else:
            out.append(rng.random() < 0.5)
    return out


# --- mutual information -----------------------------------------------------


def test_mi_perfect_binary_dependence_is_ln2():
    feature = [i % 2 for i in range(100)]
    target = [i % 2 for i in range(100)]
    mi = mutual_information(feature, target, "classification")
    assert mi == pytest.approx(math.log(2), abs=1e-9)


def test_mi_constant_feature_is_zero():
    assert mutual_information([3] * 50, [i % 2 for i in range(50)], "classification") == 0.0


def test_mi_too_few_valid_rows():
    assert mutual_information([1, None], [None, 2], "classification") == 0.0


def test_mi_matches_contingency_oracle_randomized():
    rng = random.Random(41)
    for trial in range(200):
        n = rng.randint(3, 400)
        flavor = rng.choice(["float", "int", "cat", "bool"])
        task = rng.choice(["classification", "regression"])
        feature = random_column(rng, n, flavor)
        if task == "classification":
            target = [rng.choice(["p", "q", "r"]) if rng.random() > 0.05 else None for _ in range(n)]
        else:
            target = random_column(rng, n, "float")
        got = mutual_information(feature, target, task)
        want = mi_contingency_oracle(feature, target, task)
        assert got == pytest.approx(want, abs=1e-9), f"trial={trial}"
        assert got >= 0.0


def test_mi_dependent_beats_independent():
    rng = random.Random(7)
    target = [rng.randint(0, 1) for _ in range(400)]
    informative = [t + rng.uniform(-0.2, 0.2) for t in target]
    noise = [rng.uniform(0, 1) for _ in range(400)]
    task = "classification"
    assert mutual_information(informative, target, task) > mutual_information(
        noise, target, task
    )


# --- pearson ----------------------------------------------------------------


def test_pearson_perfect_linearity():
    xs = [float(i) for i in range(50)]
    ys = [2.0 * x for x in xs]
    assert pearson_abs(xs, ys) == pytest.approx(1.0, abs=1e-12)


def test_pearson_constant_is_zero():
    assert pearson_abs([1.0] * 40, [float(i) for i in range(40)]) == 0.0


def test_pearson_textual_feature_is_zero():
    assert pearson_abs(["a", "b"] * 10, [float(i) for i in range(20)]) == 0.0


def test_pearson_binary_encodes_two_class_target():
    xs = [0.0, 1.0, 0.1, 0.9, 0.2, 0.8]
    ys = ["no", "yes", "no", "yes", "no", "yes"]
    assert pearson_abs(xs, ys) > 0.9


def test_pearson_matches_two_pass_oracle_randomized():
    rng = random.Random(17)
    for trial in range(200):
        n = rng.randint(2, 500)
        xs = [rng.uniform(-10, 10) for _ in range(n)]
        ys = [0.3 * x + rng.gauss(0, 2) for x in xs]
        got = pearson_abs(list(xs), list(ys))
        want = pearson_two_pass_oracle(xs, ys)
        assert got == pytest.approx(want, abs=1e-9), f"trial={trial}"
        assert 0.0 <= got <= 1.0


def test_pearson_ignores_null_pairs():
    xs = [1.0, 2.0, None, 4.0]
    ys = [2.0, 4.0, 9.0, None]
    assert pearson_abs(xs, ys) == pytest.approx(1.0, abs=1e-9)


# --- borda ------------------------------------------------------------------


def test_borda_worked_example():
    mi = [("A", 0.9), ("B", 0.5), ("C", 0.1)]  # A first by MI
    rho = [("B", 0.8), ("C", 0.5), ("A", 0.2)]  # A third by pearson
    merged = borda_merge([mi, rho])
    # A: 2 + 0 = 2, B: 1 + 2 = 3, C: 0 + 1 = 1
    assert merged == ["B", "A", "C"]


def test_borda_consensus_is_identity():
    mi = [("x", 0.9), ("y", 0.5), ("z", 0.2)]
    assert borda_merge([mi, list(mi)]) == ["x", "y", "z"]


def test_borda_tied_statistics_share_average_points():
    mi = [("A", 0.7), ("B", 0.7), ("C", 0.1)]  # A, B tied at 1-2 -> 1.5 each
    rho = [("C", 0.9), ("B", 0.5), ("A", 0.1)]  # C 2, B 1, A 0
    merged = borda_merge([mi, rho])
    # totals: A 1.5, B 2.5, C 2.0 -- without averaging A would beat C
    assert merged == ["B", "C", "A"]


def test_borda_invariant_to_tied_input_permutation():
    mi_a = [("A", 0.7), ("B", 0.7), ("C", 0.1)]
    mi_b = [("B", 0.7), ("A", 0.7), ("C", 0.1)]
    rho = [("A", 0.9), ("C", 0.5), ("B", 0.1)]
    assert borda_merge([mi_a, rho]) == borda_merge([mi_b, rho])


def test_borda_full_tie_orders_by_name():
    mi = [("b", 0.5), ("a", 0.5)]
    rho = [("a", 0.5), ("b", 0.5)]
    assert borda_merge([mi, rho]) == ["a", "b"]


def test_borda_rejects_mismatched_feature_sets():
    with pytest.raises(ValueError):
        borda_merge([[("a", 1.0)], [("b", 1.0)]])


# --- prompt + selection -----------------------------------------------------


def selection_fixture(n_features=37, rows=60, null_every=0):
    rng = random.Random(5)
    base = table_from_cells("base", ["id", "target"], [[i, i % 2] for i in range(rows)])
    cand_cols = ["k"] + [f"f{i:02d}" for i in range(n_features)]
    cand = table_from_cells("cand", cand_cols, [[0] + [0.0] * n_features])
    corpus = build_corpus(
        {"base": base, "cand": cand},
        [("base", "id", "cand", "k")],
        base="base",
        target="target",
    )
    columns = [("id", "integer"), ("target", "integer")] + [
        (f"cand.f{i:02d}", "float") for i in range(n_features)
    ]
    cons_rows = []
    for r in range(rows):
        feats = []
        for i in range(n_features):
            if null_every and r % null_every == i % null_every and i % 3 == 0:
                feats.append(None)
            elif i == 0:  # informative feature
                feats.append((r % 2) + rng.uniform(-0.1, 0.1))
            else:
                feats.append(rng.uniform(0, 1))
        cons_rows.append((r, r % 2, *feats))
    consolidated = ConsolidatedTable(
        columns=columns,
        rows=cons_rows,
        base_column_count=2,
        provenance={
            f"cand.f{i:02d}": {"path_rank": 0, "null_ratio": 0.0}
            for i in range(n_features)
        },
    )
    return corpus, consolidated


def paths_for(corpus):
    p = JoinPath(tables=("base", "cand"), hops=(Hop("id", "k", FORWARD),))
    return [ScoredPath(path=p, s_sem=0.5, s_stat=0.9, score=0.7, per_hop=((1, 1, 1),))]


def test_prompt_renders_stat_keys_and_four_decimals():
    corpus, consolidated = selection_fixture(n_features=3)
    stats = [
        FeatureStats("cand.f00", mutual_info=0.69314718, pearson_abs=0.5, valid_rows=60),
        FeatureStats("cand.f01", mutual_info=0.1, pearson_abs=0.25, valid_rows=60),
        FeatureStats("cand.f02", mutual_info=0.0, pearson_abs=0.0, valid_rows=60),
    ]
    prompt = build_fs_prompt(stats, load_descriptors(corpus, None), corpus)
    assert '"mutual_info": 0.6931' in prompt.user
    assert '"pearson_corr": 0.2500' in prompt.user
    assert '"desc": ""' in prompt.user  # absent descriptor renders empty


def test_prompt_carries_exactly_the_given_features():
    corpus, consolidated = selection_fixture(n_features=20)
    stats = compute_feature_stats(consolidated, corpus)
    ordered = [stats[f] for f in sorted(stats)]
    prompt = build_fs_prompt(ordered, load_descriptors(corpus, None), corpus)
    assert prompt.user.count('"name":') == 20


def test_select_prompt_carries_all_candidates_when_k_not_binding():
    corpus, consolidated = selection_fixture(n_features=37)
    captured = []

    class Spy(StubProvider):
        def complete(self, prompt):
            captured.append(prompt)
            return super().complete(prompt)

    gw = Gateway(Spy())
    result = select_features(
        consolidated, corpus, load_descriptors(corpus, None), gw,
        kappa=10, prefilter_k=100, method="hybrid",
    )
    ranking_prompts = [p for p in captured if '"name":' in p.user]
    assert len(ranking_prompts) == 1
    assert ranking_prompts[0].user.count('"name":') == 37
    assert len(result.columns) == 2 + 10  # base columns + kappa
    assert gw.calls_by_kind == {"feature_ranking": 1}


def test_prefilter_k_limits_prompt():
    corpus, consolidated = selection_fixture(n_features=37)
    captured = []

    class Spy(StubProvider):
        def complete(self, prompt):
            captured.append(prompt)
            return super().complete(prompt)

    select_features(
        consolidated, corpus, load_descriptors(corpus, None), Gateway(Spy()),
        kappa=5, prefilter_k=12, method="hybrid",
    )
    assert captured[0].user.count('"name":') == 12


def test_echo_stub_makes_hybrid_equal_stats_only():
    corpus, consolidated = selection_fixture()
    descriptors = load_descriptors(corpus, None)
    hybrid = select_features(
        consolidated, corpus, descriptors, Gateway(StubProvider()),
        kappa=10, prefilter_k=100, method="hybrid",
    )
    stats_only = select_features(
        consolidated, corpus, descriptors, None,
        kappa=10, prefilter_k=100, method="stats_only",
    )
    assert hybrid.ranking.selected == stats_only.ranking.selected
    assert hybrid.rows == stats_only.rows


def test_informative_feature_ranks_first():
    corpus, consolidated = selection_fixture()
    result = select_features(
        consolidated, corpus, load_descriptors(corpus, None), None,
        kappa=5, prefilter_k=100, method="stats_only",
    )
    assert result.ranking.statistical_order[0] == "cand.f00"
    assert "cand.f00" in result.ranking.selected


def test_llm_repair_drops_invented_and_appends_missing():
    corpus, consolidated = selection_fixture(n_features=5)
    stats_only = select_features(
        consolidated, corpus, load_descriptors(corpus, None), None,
        kappa=5, prefilter_k=100, method="stats_only",
    )
    order = stats_only.ranking.statistical_order
    # LLM omits the last two real features and hallucinates one
    reply = [order[2], "cand.invented", order[0], order[1]]
    import json

    gw = Gateway(StubProvider(script={"feature_ranking": json.dumps(reply)}))
    result = select_features(
        consolidated, corpus, load_descriptors(corpus, None), gw,
        kappa=5, prefilter_k=100, method="hybrid",
    )
    assert result.ranking.llm_order == [
        order[2], order[0], order[1], *[f for f in order if f not in order[:3]]
    ]
    assert "cand.invented" not in result.ranking.llm_order
    assert sorted(result.ranking.llm_order) == sorted(order)


def test_llm_parse_failure_degrades_to_stats_only():
    corpus, consolidated = selection_fixture(n_features=4)
    gw = Gateway(StubProvider(script={"feature_ranking": "n/a"}))
    result = select_features(
        consolidated, corpus, load_descriptors(corpus, None), gw,
        kappa=3, prefilter_k=100, method="hybrid",
    )
    assert result.ranking.method == "stats_only"
    assert result.warnings
    assert result.ranking.selected == result.ranking.statistical_order[:3]


def test_stats_only_never_calls_llm():
    corpus, consolidated = selection_fixture(n_features=4)
    gw = Gateway(StubProvider())
    select_features(
        consolidated, corpus, load_descriptors(corpus, None), gw,
        kappa=2, prefilter_k=10, method="stats_only",
    )
    assert gw.calls_total == 0


def test_base_columns_always_survive():
    corpus, consolidated = selection_fixture(n_features=6)
    result = select_features(
        consolidated, corpus, load_descriptors(corpus, None), Gateway(StubProvider()),
        kappa=2, prefilter_k=10, method="hybrid",
    )
    assert [c for c, _ in result.columns[:2]] == ["id", "target"]
    assert len(result.columns) == 2 + 2
    base_part = [row[:2] for row in result.rows]
    assert base_part == [row[:2] for row in consolidated.rows]
