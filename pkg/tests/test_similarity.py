import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_dataset
from oracles import neighbor_lists, ratings_dict, similarity

from cfmf.baseline import fit_bias
from cfmf.similarity import NeighborStore, SimilarityParams, build_neighbor_store, pair_similarity


def sim(table, a, b, axis="item", shrink=100.0):
    return pair_similarity(a, b, table, fit_bias(table), SimilarityParams(shrink, 10, axis))


def random_table(seed, n_users, n_items, density, levels=11):
    rng = np.random.default_rng(seed)
    rows = [
        (u, i, float(rng.integers(levels)))
        for u in range(n_users)
        for i in range(n_items)
        if rng.random() < density
    ]
    # make sure every entity exists so indices line up with the loop variables
    for u in range(n_users):
        rows.append((u, n_items + u, float(rng.integers(levels))))
    return make_dataset([(f"u{u}", f"i{i:03d}", r) for u, i, r in rows]).train


def test_toy_negative_similarity():
    # user means (4, 2, 3) come from an extra item per user
    table = make_dataset([
        ("u0", "i", 5), ("u0", "j", 3), ("u0", "z", 4),
        ("u1", "i", 1), ("u1", "j", 3), ("u1", "z", 2),
        ("u2", "j", 3), ("u2", "z", 3),
    ]).train
    bias = fit_bias(table)
    assert bias.user_mean.tolist() == [4.0, 2.0, 3.0]
    expected = -2 / 102
    assert sim(table, 0, 1) == pytest.approx(expected, abs=1e-15)
    assert similarity(ratings_dict(table), 0, 1, "item", 100) == pytest.approx(expected, abs=1e-15)


def test_perfect_correlation_with_100_raters():
    rows = []
    for u in range(100):
        d = 1.0 if u % 2 else -1.0
        rows += [(u, "i", 5 + d), (u, "j", 5 + d), (u, "z", 5 - d)]
    table = make_dataset(rows).train
    assert sim(table, 0, 1) == pytest.approx(0.5, abs=1e-14)


def test_no_common_raters_is_zero():
    table = make_dataset([("a", "x", 3), ("b", "y", 4)]).train
    assert sim(table, 0, 1) == 0.0


def test_zero_norm_is_zero():
    # the only co-rater sits exactly at their own mean on both items
    table = make_dataset([("a", "x", 3), ("a", "y", 3)]).train
    assert sim(table, 0, 1) == 0.0


def test_usage_errors():
    table = make_dataset([("a", "x", 3), ("b", "y", 4)]).train
    with pytest.raises(IndexError):
        sim(table, 0, 5)
    with pytest.raises(IndexError):
        sim(table, -1, 0)
    with pytest.raises(ValueError):
        sim(table, 1, 1)


@pytest.mark.parametrize("kw", [dict(shrink=-1), dict(top_n=-1), dict(axis="both")])
def test_param_validation(kw):
    with pytest.raises(Exception):
        SimilarityParams(**kw)


def test_two_item_store():
    table = make_dataset([("a", "x", 5), ("a", "y", 1), ("b", "x", 1), ("b", "y", 5)]).train
    store = build_neighbor_store(table, fit_bias(table), SimilarityParams())
    s = sim(table, 0, 1)
    assert s != 0
    assert store.neighbors_of(0) == [(1, s)]
    assert store.neighbors_of(1) == [(0, s)]


def test_top1_takes_argmax():
    table = random_table(3, 12, 3, 0.9)
    bias = fit_bias(table)
    store = build_neighbor_store(table, bias, SimilarityParams(top_n=1))
    for e in range(3):
        others = [(sim(table, e, o), -o) for o in range(table.num_items) if o != e]
        others = [t for t in others if t[0] != 0]
        got = store.neighbors_of(e)
        if others:
            best = max(others)
            assert got == [(-best[1], best[0])]
        else:
            assert got == []


@pytest.mark.parametrize("axis", ["item", "user"])
@pytest.mark.parametrize("seed", range(4))
def test_store_matches_oracle(axis, seed):
    table = random_table(seed, 8, 5, 0.6, levels=4)
    n = table.num_items if axis == "item" else table.num_users
    params = SimilarityParams(100.0, 3, axis)
    store = build_neighbor_store(table, fit_bias(table), params)
    expected = neighbor_lists(ratings_dict(table), n, axis, 100.0, 3)
    assert store.num_entities == n
    for e in range(n):
        got = store.neighbors_of(e)
        assert [b for b, _ in got] == [b for b, _ in expected[e]]
        assert [s for _, s in got] == pytest.approx([s for _, s in expected[e]], abs=1e-12)


def test_store_invariants():
    table = random_table(11, 30, 20, 0.3)
    store = build_neighbor_store(table, fit_bias(table), SimilarityParams(top_n=4))
    for e in range(store.num_entities):
        lst = store.neighbors_of(e)
        assert len(lst) <= 4
        assert all(n != e for n, _ in lst)
        scores = [s for _, s in lst]
        assert scores == sorted(scores, reverse=True)
        assert all(math.isfinite(s) and -1 <= s <= 1 and s != 0 for s in scores)


def test_store_agrees_with_pair_similarity_bitwise():
    table = random_table(5, 25, 15, 0.4)
    bias = fit_bias(table)
    params = SimilarityParams(top_n=50)
    store = build_neighbor_store(table, bias, params)
    for e, n, s in store.pairs():
        assert s == pair_similarity(e, n, table, bias, params)


def test_top_n_zero_gives_empty_lists():
    table = random_table(1, 10, 6, 0.5)
    store = build_neighbor_store(table, fit_bias(table), SimilarityParams(top_n=0))
    assert len(store) == 0


def test_store_save_load(tmp_path):
    table = random_table(2, 15, 8, 0.5)
    store = build_neighbor_store(table, fit_bias(table), SimilarityParams(top_n=3))
    path = tmp_path / "nbrs.tsv"
    store.save(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    e, n, s = lines[1].split("\t")
    assert float(s) == pytest.approx(store.scores[0], rel=1e-8)
    back = NeighborStore.load(path)
    assert back.params == store.params
    assert np.array_equal(back.ptr, store.ptr)
    assert np.array_equal(back.neighbors, store.neighbors)
    assert back.scores == pytest.approx(store.scores, rel=1e-8)


tables = st.lists(
    st.tuples(st.integers(0, 5), st.integers(0, 4), st.integers(0, 10)),
    min_size=2, max_size=30, unique_by=lambda t: (t[0], t[1]),
)


@settings(max_examples=60, deadline=None)
@given(tables, st.sampled_from(["item", "user"]), st.sampled_from([0.0, 5.0, 100.0]))
def test_symmetry_bounds_and_oracle(rows, axis, shrink):
    table = make_dataset(rows).train
    n = table.num_items if axis == "item" else table.num_users
    r = ratings_dict(table)
    for a in range(n):
        for b in range(a + 1, n):
            s_ab = sim(table, a, b, axis, shrink)
            assert s_ab == sim(table, b, a, axis, shrink)
            assert s_ab == pytest.approx(similarity(r, a, b, axis, shrink), abs=1e-12)
            if axis == "item":
                c = len({u for (u, i) in r if i == a} & {u for (u, i) in r if i == b})
            else:
                c = len({i for (u, i) in r if u == a} & {i for (u, i) in r if u == b})
            if c:
                assert abs(s_ab) <= c / (c + shrink) + 1e-15


def test_shrink_monotone_in_support():
    # same perfect correlation, growing co-rating set
    scores = []
    for size in (2, 4, 8, 16):
        rows = []
        for u in range(size):
            d = 1.0 if u % 2 else -1.0
            rows += [(u, "i", 5 + d), (u, "j", 5 + d), (u, "z", 5 - d)]
        scores.append(abs(sim(make_dataset(rows).train, 0, 1)))
    assert scores == sorted(scores)
