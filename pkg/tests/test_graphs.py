import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from msolearn.graphs import (
    LEFT, RIGHT, Base, Delta, Eta, ExpressionError, LabeledGraph, OrderedUnion, Rho, Union,
    base_vertices, check_wellformed, encode_training_labels, eval_cexpr, expr_digest, expr_size,
    expr_vocab, gen_cograph, gen_tree, graph_from_json, graph_to_json, greedy_expression,
    mark_vertex, parse_cwx, postorder, to_cwx, trivial_expression,
)

from conftest import EX11_S, data_path, random_graph


def test_single_vertex():
    G = eval_cexpr(Base("a", {"A"}))
    assert G.vertices == ("a",)
    assert G.labels == {"A": {"a"}}


def test_edge_between_two_labels():
    G = eval_cexpr(Eta("A", "B", Union(Base("a", {"A"}), Base("b", {"B"}))))
    assert G.edges == {("a", "b")}


def test_relabel_then_delete():
    e = Delta("A", Rho("A", "B", Union(Base("a", {"A"}), Base("b", {"B"}))))
    G = eval_cexpr(e)
    assert G.labels == {"B": {"a", "b"}}
    assert expr_vocab(e) == {"B"}


def test_rho_keeps_label_declared():
    G = eval_cexpr(Rho("A", "B", Union(Base("a", {"A"}), Base("b", {"B"}))))
    assert G.labels["A"] == frozenset()


def test_example_chain_graph(fig1_expr):
    G = eval_cexpr(fig1_expr)
    assert G.vertices == ("v1", "v2", "v3", "v4", "v5", "v6")
    assert G.edges == {("v1", "v4"), ("v1", "v5"), ("v1", "v6"), ("v2", "v5"), ("v2", "v6"), ("v3", "v6")}
    assert G.labels == {}


def test_ordered_union_marks_sides():
    e = OrderedUnion(Base("a", {"A"}), Union(Base("b"), Base("c", {"A"})))
    G = eval_cexpr(e)
    assert G.labels[LEFT] == {"a"}
    assert G.labels[RIGHT] == {"b", "c"}


def test_ordered_union_simulates_join():
    # eta over the side labels connects every left vertex to every right one
    e = Delta(LEFT, Delta(RIGHT, Eta(LEFT, RIGHT, OrderedUnion(Base("a"), Union(Base("b"), Base("c"))))))
    assert eval_cexpr(e).edges == {("a", "b"), ("a", "c")}


def test_wellformed_diagnostics():
    bad = Eta("A", "C", Union(Base("a", {"A"}), Base("a", {"B"})))
    diags = check_wellformed(bad)
    assert any("duplicate base vertex" in d for d in diags)
    assert any("'C' not in child label set" in d for d in diags)
    assert check_wellformed(Delta("Z", Base("a"))) != []
    assert check_wellformed(Eta("A", "A", Base("a", {"A"}))) != []
    assert check_wellformed(Base("a", {"@L"})) != []
    with pytest.raises(ExpressionError):
        eval_cexpr(bad)


def test_nested_ordered_union_rejected():
    inner = OrderedUnion(Base("a"), Base("b"))
    assert check_wellformed(OrderedUnion(inner, Base("c")))


def test_trivial_expression_triangle():
    G = LabeledGraph(["a", "b", "c"], [("a", "b"), ("b", "c"), ("a", "c")])
    e = trivial_expression(G)
    nodes = list(postorder(e))
    assert sum(isinstance(n, Base) for n in nodes) == 3
    assert sum(isinstance(n, Eta) for n in nodes) == 3
    assert eval_cexpr(e) == G


def test_trivial_expression_keeps_empty_labels():
    G = LabeledGraph(["a", "b"], [], {"A": {"a"}, "E": set()})
    assert eval_cexpr(trivial_expression(G)) == G
    with pytest.raises(ExpressionError):
        trivial_expression(LabeledGraph([]))


def test_builders_round_trip_random(rng):
    for _ in range(60):
        G = random_graph(rng, rng.randint(1, 8), labels=("A", "B"))
        for build in (trivial_expression, greedy_expression):
            e = build(G)
            assert check_wellformed(e) == []
            assert eval_cexpr(e) == G


def test_greedy_uses_few_labels_on_a_path():
    n = 30
    vs = [f"p{i:02d}" for i in range(n)]
    G = LabeledGraph(vs, list(zip(vs, vs[1:])))
    e = greedy_expression(G)
    labels = set()
    for node in postorder(e):
        if isinstance(node, Base):
            labels |= node.labels
    assert len(labels) <= 4
    assert eval_cexpr(e) == G


def test_cograph_fixed_seed():
    e = gen_cograph(4, 7)
    G = eval_cexpr(e)
    assert G.vertices == ("v1", "v2", "v3", "v4")
    assert set(G.labels) <= {"A", "B"}
    assert eval_cexpr(gen_cograph(4, 7)) == G
    assert expr_digest(gen_cograph(4, 7)) == expr_digest(e)


def _has_induced_p4(G):
    import itertools
    for a, b, c, d in itertools.permutations(G.vertices, 4):
        E = lambda x, y: y in G.adj[x]
        if E(a, b) and E(b, c) and E(c, d) and not (E(a, c) or E(a, d) or E(b, d)):
            return True
    return False


def test_cographs_are_p4_free():
    for seed in range(15):
        G = eval_cexpr(gen_cograph(7, seed))
        assert not _has_induced_p4(G)


def test_tree_fixed_seed_is_a_tree():
    G = eval_cexpr(gen_tree(8, 3))
    assert len(G.edges) == 7
    seen = {G.vertices[0]}
    todo = [G.vertices[0]]
    while todo:
        v = todo.pop()
        for u in G.adj[v] - seen:
            seen.add(u)
            todo.append(u)
    assert len(seen) == 8


def test_generator_label_audit():
    for seed in range(10):
        for e, limit in ((gen_cograph(12, seed), {"A", "B"}), (gen_tree(12, seed), {"A", "B", "C"})):
            used = set()
            for node in postorder(e):
                if isinstance(node, Base):
                    used |= node.labels
                elif isinstance(node, (Eta, Rho)):
                    used |= {node.P, node.Q}
            assert used <= limit
            assert check_wellformed(e) == []


def test_zero_padded_ids():
    assert base_vertices(gen_tree(12, 0))[0].startswith("v")
    assert sorted(base_vertices(gen_cograph(12, 1)))[0] == "v01"


def test_mark_vertex(fig1_expr):
    G = eval_cexpr(mark_vertex(fig1_expr, "v3", "I"))
    assert G.labels["I"] == {"v3"}
    with pytest.raises(ExpressionError):
        mark_vertex(fig1_expr, "v3", "A")
    with pytest.raises(ExpressionError):
        mark_vertex(fig1_expr, "nope", "I")


def test_encode_training_labels(fig1_expr):
    G = eval_cexpr(encode_training_labels(fig1_expr, EX11_S, "P", "N"))
    assert G.labels["P"] == {"v1", "v3"}
    assert G.labels["N"] == {"v4", "v5"}
    only_pos = eval_cexpr(encode_training_labels(fig1_expr, [(("v1",), "+")], "P", "N"))
    assert only_pos.labels["N"] == frozenset()


def test_cwx_round_trip(fig1_expr):
    text = to_cwx(fig1_expr)
    assert to_cwx(parse_cwx(text)) == text
    with open(data_path("fig1.cwx")) as fh:
        assert eval_cexpr(parse_cwx(fh.read())) == eval_cexpr(fig1_expr)


@pytest.mark.parametrize("text", ["(v)", "(u (v a))", "(eta A (v a))", "(zz a)", "(v a))", "((v a)", ""])
def test_cwx_errors(text):
    with pytest.raises(ExpressionError):
        parse_cwx(text)


def test_graph_json_round_trip(fig1_expr):
    G = eval_cexpr(fig1_expr).with_labels({"A": {"v1"}, "Empty": set()})
    assert graph_from_json(json.loads(json.dumps(graph_to_json(G)))) == G
    with pytest.raises(ExpressionError):
        graph_from_json({"vertices": [{"id": "a", "labels": ["X"]}]})
    with pytest.raises(ExpressionError):
        graph_from_json({"vertices": [{"id": "a"}, {"id": "a"}]})


def test_deep_expression_no_recursion_limit():
    e = Base("r", {"A", "B"})
    for i in range(5000):
        e = Rho("A", "B", Union(e, Base(f"x{i}", {"A"})))
        e = Rho("B", "A", e)
    assert expr_size(e) == 1 + 5000 * 4
    assert len(eval_cexpr(e)) == 5001


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**30))
def test_builders_round_trip_property(seed):
    r = random.Random(seed)
    G = random_graph(r, r.randint(1, 7), labels=("A",))
    order = list(G.vertices)
    r.shuffle(order)
    assert eval_cexpr(greedy_expression(G, order)) == G
