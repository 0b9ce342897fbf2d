import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msolearn.graphs import LabeledGraph, eval_cexpr, gen_cograph, trivial_expression
from msolearn.logic import TRUE, eval_formula, formula_bank, parse_formula
from msolearn.realizable import (
    ResourceCapExceeded, brute_realizable, consistent_rows, count_diagnostics, dedupe_examples,
    distinct_column_symbol, emit_table, phi_consistent, realizable_tuples, sauer_shelah_bound,
    shatter_count, vc_dimension,
)
from msolearn.typeengine import compute_type

from conftest import EX11_PHI, random_graph


def test_no_examples_single_row(fig1_expr):
    t = realizable_tuples(fig1_expr, [], q=1, ell=1)
    assert list(t.rows) == [()]
    assert list(t.rows.values()) == [("v1",)]


def test_example_graph_matches_brute_force(fig1_expr):
    G = eval_cexpr(fig1_expr)
    ex = [("v1",), ("v3",), ("v4",), ("v5",)]
    for q, ell in ((0, 1), (1, 1), (2, 1), (1, 2)):
        t = realizable_tuples(fig1_expr, ex, q=q, ell=ell, set_budget=0 if q == 2 else None)
        assert set(t.rows) == brute_realizable(G, ex, q, ell, 0 if q == 2 else None)


def test_visits_equal_expression_size(fig1_expr):
    from msolearn.graphs import expr_size
    t = realizable_tuples(fig1_expr, [("v1",)], q=1, ell=1)
    assert t.visits == expr_size(fig1_expr)
    assert len(t.node_counts) == t.visits


def test_least_witness(rng):
    for _ in range(10):
        G = random_graph(rng, rng.randint(1, 4))
        e = trivial_expression(G)
        ex = [(v,) for v in G.vertices[:2]]
        t = realizable_tuples(e, ex, q=1, ell=1)
        for row, w in t.rows.items():
            realizing = [u for u in itertools.product(G.vertices, repeat=1)
                         if tuple(compute_type(G, a + u, (), 1) for a in ex) == row]
            assert w == min(realizing)


def test_dedupe_examples():
    assert dedupe_examples([("a",), ("b",), ("a",)]) == ([("a",), ("b",)], [0, 1, 0])


def test_parallel_matches_sequential():
    e = gen_cograph(12, 4)
    ex = [("v01",), ("v05",), ("v09",)]
    a = realizable_tuples(e, ex, q=2, ell=1, set_budget=0)
    b = realizable_tuples(e, ex, q=2, ell=1, set_budget=0, jobs=3)
    assert a.rows == b.rows


def test_row_cap():
    e = gen_cograph(10, 1)
    with pytest.raises(ResourceCapExceeded):
        realizable_tuples(e, [("v01",), ("v02",), ("v03",)], q=2, ell=2, cap=1)


def test_unknown_example_vertex(fig1_expr):
    from msolearn.graphs import ExpressionError
    with pytest.raises(ExpressionError):
        realizable_tuples(fig1_expr, [("zz",)], q=1, ell=0)


def test_phi_consistent_example(fig1_expr):
    phi = parse_formula(EX11_PHI)
    ex = [("v1",), ("v3",), ("v4",), ("v5",)]
    assert phi_consistent(fig1_expr, ex, "++--", phi, q=3, ell=1)
    # v4 alone as a positive is realisable with w = v5
    assert phi_consistent(fig1_expr, [("v4",)], "+", phi, q=3, ell=1)


def test_phi_consistent_contradiction_and_empty(fig1_expr):
    phi = parse_formula("E(x1,y1)")
    assert not phi_consistent(fig1_expr, [("v1",), ("v1",)], "+-", phi, q=1, ell=1)
    assert phi_consistent(fig1_expr, [], "", phi, q=1, ell=1)
    assert phi_consistent(fig1_expr, [("v1",), ("v4",)], "+-", TRUE, q=0, ell=0) is False


def test_phi_consistent_matches_brute(rng):
    bank = formula_bank(["A"], 1, 1, 1, 40)
    for _ in range(8):
        G = random_graph(rng, rng.randint(2, 4))
        e = trivial_expression(G)
        ex = [(v,) for v in G.vertices]
        table = realizable_tuples(e, ex, q=1, ell=1)
        for phi in bank:
            labels = ["+" if rng.random() < 0.5 else "-" for _ in ex]
            want = any(all(eval_formula(G, phi, {"x1": a[0], "y1": w}) == (lab == "+")
                           for a, lab in zip(ex, labels)) for w in G.vertices)
            assert phi_consistent(e, ex, labels, phi, 1, 1, table=table) == want
            for row, w in consistent_rows(table, labels, phi, 1):
                for a, lab in zip(ex, labels):
                    assert eval_formula(G, phi, {"x1": a[0], "y1": w[0]}) == (lab == "+")


def test_vc_examples():
    star = LabeledGraph(["c", "l1", "l2", "l3"], [("c", "l1"), ("c", "l2"), ("c", "l3")])
    assert vc_dimension(star, TRUE, 1, 1) == 0
    assert vc_dimension(star, parse_formula("E(x1,y1)"), 1, 1) == 1
    assert vc_dimension(star, parse_formula("x1 = y1"), 1, 1) == 1
    path = LabeledGraph(list("abcde"), [("a", "b"), ("b", "c"), ("c", "d"), ("d", "e")])
    assert vc_dimension(path, parse_formula("E(x1,y1) | E(x1,y2)"), 1, 2) >= 2


def test_shatter_count():
    star = LabeledGraph(["c", "l1", "l2", "l3"], [("c", "l1"), ("c", "l2"), ("c", "l3")])
    phi = parse_formula("E(x1,y1)")
    assert shatter_count(star, phi, [("l1",), ("l2",)], 1) == 2
    assert shatter_count(star, phi, [("c",), ("l1",)], 1) == 2
    assert shatter_count(star, TRUE, [("c",), ("l1",)], 1) == 1
    assert shatter_count(star, phi, [], 1) == 1


def test_sauer_shelah_values():
    assert sauer_shelah_bound(4, 0) == 1
    assert sauer_shelah_bound(4, 2) == 11
    assert sauer_shelah_bound(5, 5) == 32


def test_matrix_lemma_example():
    M = np.array([[0, 1, 2], [1, 1, 0]])
    assert distinct_column_symbol(M, 2) == 0
    with pytest.raises(ValueError):
        distinct_column_symbol(np.array([[1, 1]]), 2)


def _matrix_case(r):
    s = r.randint(2, 4)
    c = r.randint(2, 3)
    n = (c - 1) ** (s - 1) + 1
    rows = r.randint(1, 4)
    while s ** rows < n:
        rows += 1
    cols = set()
    while len(cols) < n:
        cols.add(tuple(r.randrange(s) for _ in range(rows)))
    M = np.array(sorted(cols)).T
    sym = distinct_column_symbol(M, c)
    assert sym is not None
    assert len({tuple(col) for col in (M == sym).T}) >= c


def test_matrix_lemma_random():
    r = random.Random(2)
    for _ in range(100):
        _matrix_case(r)


def test_count_diagnostics(fig1_expr):
    t = realizable_tuples(fig1_expr, [("v1",), ("v4",)], q=1, ell=1)
    d = count_diagnostics(t, 1)
    assert d["root_count"] == len(t.rows)
    assert d["bound"] == 2 * sauer_shelah_bound(2, 1) ** d["t"]
    assert d["flagged_nodes"] == []


def test_emit_table(fig1_expr):
    t = realizable_tuples(fig1_expr, [("v1",), ("v4",)], q=1, ell=1)
    lines = emit_table(t).splitlines()
    assert len(lines) == len(t.rows)
    assert lines[0].startswith("0: ")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**30))
def test_dp_equals_brute_property(seed):
    r = random.Random(seed)
    G = random_graph(r, r.randint(1, 4), labels=("A",))
    e = trivial_expression(G)
    m = r.randint(0, 3)
    ex = [tuple(r.choice(G.vertices) for _ in range(r.randint(1, 1))) for _ in range(m)]
    q = r.randint(0, 2)
    ell = r.randint(0, 2 if q < 2 else 1)
    b = r.randint(0, min(q, 1))
    assert set(realizable_tuples(e, ex, q, ell, b).rows) == brute_realizable(G, ex, q, ell, b)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**30))
def test_matrix_lemma_property(seed):
    _matrix_case(random.Random(seed))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**30))
def test_sauer_shelah_property(seed):
    r = random.Random(seed)
    G = random_graph(r, r.randint(2, 4), labels=())
    phi = r.choice(formula_bank([], 1, 1, 1, 30))
    X = [(v,) for v in r.sample(G.vertices, r.randint(1, len(G.vertices)))]
    d = vc_dimension(G, phi, 1, 1, maxd=len(G.vertices))
    assert shatter_count(G, phi, X, 1) <= sauer_shelah_bound(len(X), d)
