"""The oracles must agree with each other before they judge anything else."""

import random

import oracles


def _random_tables(rng, n_tables=3, rows=12):
    names = [("A", "B"), ("B", "C"), ("A", "C")][:n_tables]
    tables = []
    for cols in names:
        table = []
        for _ in range(rng.randrange(1, rows)):
            table.append({c: rng.randrange(4) for c in cols})
        tables.append(table)
    return tables


def _row_multiset(rows):
    return sorted(tuple(sorted(r.items())) for r in rows)


def test_sort_merge_equals_nested_loop_on_random_inputs():
    rng = random.Random(42)
    for trial in range(60):
        tables = _random_tables(rng, n_tables=rng.choice((2, 3)))
        nl = oracles.nested_loop_join(tables)
        sm = oracles.sort_merge_join(tables)
        assert _row_multiset(nl) == _row_multiset(sm), f"trial {trial}"


def test_sort_merge_handles_cartesian_and_empty():
    a = [{"A": 1}, {"A": 2}]
    b = [{"B": 7}]
    assert _row_multiset(oracles.sort_merge_join([a, b])) == _row_multiset(
        oracles.nested_loop_join([a, b]))
    assert oracles.sort_merge_join([a, []]) == []


def test_prufer_enumeration_counts_and_shape():
    trees = list(oracles.all_spanning_trees(5))
    assert len(trees) == 125
    assert len({frozenset(t) for t in trees}) == 125  # bijection: all distinct
    for t in trees:
        assert len(t) == 4  # spanning: n-1 edges
    assert list(oracles.all_spanning_trees(2)) == [[(0, 1)]]
    assert list(oracles.all_spanning_trees(1)) == [[]]


def test_max_spanning_weight_hand_case():
    w = [[0.0, 0.9, 0.1], [0.9, 0.0, 0.5], [0.1, 0.5, 0.0]]
    assert abs(oracles.max_spanning_weight(w) - 1.4) < 1e-12


def test_design_matrix_one_hot_layout():
    rows = [{"B": 2.0, "C": "r", "D": 3.0}, {"B": 1.0, "C": "g", "D": 5.0}]
    feats, x, y = oracles.design_matrix(
        rows, ("B", "C", "D"), {"B": oracles.CONT, "C": oracles.CAT,
                                "D": oracles.CONT}, "D")
    assert feats == [("@intercept", None), ("B", None), ("C", "g"), ("C", "r")]
    assert x.tolist() == [[1.0, 2.0, 0.0, 1.0], [1.0, 1.0, 1.0, 0.0]]
    assert y.tolist() == [3.0, 5.0]
