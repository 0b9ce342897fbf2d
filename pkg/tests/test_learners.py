import itertools
import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from msolearn.graphs import eval_cexpr, gen_cograph, trivial_expression
from msolearn.learners import (
    Hypothesis, LearningError, classify, classify_many, draw_sample, erm, err_empirical, err_true,
    format_training, learn_1d, learn_hd_consistent, pac_learn, parse_distribution, parse_training,
    sample_complexity, synthesize_hypothesis,
)
from msolearn.logic import TRUE, eval_formula, formula_bank, parse_formula
from msolearn.typeengine import compute_type

from conftest import EX11_PHI, EX11_S, random_graph


def _verify(G, phi, S, w):
    names = {f"y{j + 1}": v for j, v in enumerate(w)}
    for t, lab in S:
        env = dict(names, **{f"x{i + 1}": v for i, v in enumerate(t)})
        if eval_formula(G, phi, env) != (lab == "+"):
            return False
    return True


def test_parse_training_formats():
    S = parse_training("# header\nv1 +\nv3 +   # trailing\n\nv4 -\nv5 −\n")
    assert S == EX11_S
    assert format_training(S).splitlines()[0] == "v1 +"
    with pytest.raises(LearningError):
        parse_training("v1 v2 +\nv3 -")
    with pytest.raises(LearningError):
        parse_training("v1 ?")


def test_parse_distribution():
    D = parse_distribution({"support": [{"tuple": ["a"], "label": "+", "weight": "3/10"},
                                        {"tuple": ["b"], "label": "-", "weight": "7/10"}]})
    assert D[0][2] == Fraction(3, 10)
    with pytest.raises(LearningError):
        parse_distribution({"support": [{"tuple": ["a"], "label": "+", "weight": "1/2"}]})
    with pytest.raises(LearningError):
        parse_distribution({"support": [{"tuple": ["a"], "label": "+", "weight": "-1"},
                                        {"tuple": ["b"], "label": "+", "weight": "2"}]})


def test_example_learn_1d_type_mode(fig1_expr):
    h = learn_1d(fig1_expr, EX11_S, q=3, ell=1, set_budget=1)
    assert h is not None
    assert classify_many(h, fig1_expr, [("v1",), ("v3",), ("v4",), ("v5",)]) == ["+", "+", "-", "-"]
    assert classify(h, fig1_expr, ("v3",)) == "+"
    assert classify(h, fig1_expr, ("v3",)) == classify(h, fig1_expr, ("v3",))


def test_example_learn_1d_bank_mode(fig1_expr):
    phi = parse_formula(EX11_PHI)
    bank = [parse_formula("x1 = y1"), phi, parse_formula("E(x1,y1)")]
    h = learn_1d(fig1_expr, EX11_S, q=3, ell=1, set_budget=1, bank=bank)
    assert h is not None and h.formula == phi
    G = eval_cexpr(fig1_expr)
    assert _verify(G, phi, EX11_S, h.params)
    for v in G.vertices:
        assert (classify(h, fig1_expr, (v,)) == "+") == eval_formula(G, phi, {"x1": v, "y1": h.params[0]})


def test_example_witness(fig1_expr):
    phi = parse_formula(EX11_PHI)
    w = learn_hd_consistent(fig1_expr, EX11_S, 3, 1, 1, 1, phi)
    assert w == ("v1",)
    assert _verify(eval_cexpr(fig1_expr), phi, EX11_S, ("v2",))


def test_contradiction_no_consistent(fig1_expr):
    S = [(("v1",), "+"), (("v1",), "-")]
    assert learn_1d(fig1_expr, S, q=1, ell=1) is None
    assert synthesize_hypothesis(fig1_expr, S, 1, 1, 1) is None
    assert learn_hd_consistent(fig1_expr, S, 1, 1, 1, None, TRUE) is None


def test_learn_1d_rejects_k2(fig1_expr):
    with pytest.raises(LearningError):
        learn_1d(fig1_expr, [(("v1", "v2"), "+")], q=1, ell=0)


def test_ell_zero_witness(fig1_expr):
    phi = parse_formula("ex z. E(x1,z)")
    assert learn_hd_consistent(fig1_expr, [(("v1",), "+")], 1, 1, 0, 0, phi) == ()
    assert learn_hd_consistent(fig1_expr, [(("v1",), "-")], 1, 1, 0, 0, phi) is None


def test_pinning_equals_table(rng):
    bank = formula_bank([], 1, 2, 1, 25)
    for _ in range(6):
        G = random_graph(rng, rng.randint(2, 4), labels=())
        e = trivial_expression(G)
        pairs = list(itertools.product(G.vertices, repeat=2))
        S = [(p, rng.choice("+-")) for p in rng.sample(pairs, min(3, len(pairs)))]
        for phi in bank:
            a = learn_hd_consistent(e, S, 1, 2, 1, 0, phi, method="table")
            b = learn_hd_consistent(e, S, 1, 2, 1, 0, phi, method="pinning")
            assert a == b
            brute = [w for w in itertools.product(G.vertices, repeat=1) if _verify(G, phi, S, w)]
            assert a == (min(brute) if brute else None)


def test_synthesis_matches_brute_force(rng):
    for _ in range(8):
        G = random_graph(rng, rng.randint(1, 5))
        e = trivial_expression(G)
        S = [((v,), rng.choice("+-")) for v in G.vertices]
        h = synthesize_hypothesis(e, S, 1, 1, 1, 0)
        exists = False
        for w in G.vertices:
            seen = {}
            if all(seen.setdefault(compute_type(G, (v, w), (), 1, 0), lab) == lab for (v,), lab in S):
                exists = True
                break
        assert (h is not None) == exists
        if h is not None:
            assert classify_many(h, G, [t for t, _ in S]) == [lab for _, lab in S]


def test_synthesis_export_formula(fig1_expr):
    S = [(("v1",), "+"), (("v4",), "-")]
    h = synthesize_hypothesis(fig1_expr, S, 1, 1, 1, 0, export_formula=True)
    G = eval_cexpr(fig1_expr)
    assert _verify(G, h.formula, S, h.params)
    for v in G.vertices:
        assert (classify(h, fig1_expr, (v,)) == "+") == eval_formula(G, h.formula, {"x1": v, "y1": h.params[0]})


def test_sample_complexity_values():
    assert sample_complexity(3, 0.1, 0.1, 8) == 4243
    assert sample_complexity(0, 0.5, 0.5, 1) == 3
    assert sample_complexity(4, 0.1, 0.1) >= sample_complexity(3, 0.1, 0.1)
    assert sample_complexity(3, 0.05, 0.1) >= sample_complexity(3, 0.1, 0.1)
    with pytest.raises(LearningError):
        sample_complexity(1, 1.5, 0.1)


def test_erm_examples(fig1_expr):
    sep = [(("v1",), "+"), (("v4",), "-")]
    assert erm(fig1_expr, sep, 1, 1, 1, 0).info["errors"] == 0
    clash = sep + [(("v2",), "+"), (("v2",), "-")]
    h = erm(fig1_expr, clash, 1, 1, 1, 0)
    assert err_empirical(h, fig1_expr, clash) == Fraction(1, 4)


def test_erm_modes_agree(rng):
    for _ in range(6):
        G = random_graph(rng, rng.randint(2, 5))
        e = trivial_expression(G)
        S = [((rng.choice(G.vertices),), rng.choice("+-")) for _ in range(6)]
        a = erm(e, S, 1, 1, 1, 0)
        b = erm(e, S, 1, 1, 1, 0, mode="subsequence")
        ea, eb = err_empirical(a, e, S), err_empirical(b, e, S)
        assert ea == eb
        # brute-force minimum over w and type labelings
        best = len(S)
        for w in G.vertices:
            counts = {}
            for (v,), lab in S:
                c = counts.setdefault(compute_type(G, (v, w), (), 1, 0), [0, 0])
                c[lab == "+"] += 1
            best = min(best, sum(min(c) for c in counts.values()))
        assert ea == Fraction(best, len(S))
    with pytest.raises(LearningError):
        erm(e, S * 3, 1, 1, 1, 0, mode="subsequence")


def test_err_true_examples(fig1_expr):
    D = [(("v1",), "+", Fraction(1, 2)), (("v1",), "-", Fraction(1, 2))]
    h = erm(fig1_expr, [(("v1",), "+")], 1, 1, 1, 0)
    assert err_true(h, fig1_expr, D) == Fraction(1, 2)
    one = [(("v3",), "+", Fraction(1))]
    h, sample = pac_learn(fig1_expr, one, 1, 1, 1, 0, 0.5, 0.5, seed=4, m_override=5)
    assert err_true(h, fig1_expr, one) == 0
    with pytest.raises(LearningError):
        err_empirical(h, fig1_expr, [])


def test_pac_determinism():
    e = gen_cograph(10, 2)
    G = eval_cexpr(e)
    phi = parse_formula("E(x1,y1)")
    D = [((v,), "+" if eval_formula(G, phi, {"x1": v, "y1": "v03"}) else "-", Fraction(1, 10)) for v in G.vertices]
    h1, s1 = pac_learn(e, D, 1, 1, 1, 0, 0.25, 0.2, seed=7, m_override=30)
    h2, s2 = pac_learn(e, D, 1, 1, 1, 0, 0.25, 0.2, seed=7, m_override=30)
    assert s1 == s2 and h1.to_json() == h2.to_json()
    assert s1 == draw_sample(D, 30, 7)
    _, s3 = pac_learn(e, D, 1, 1, 1, 0, 0.25, 0.2, seed=8, m_override=30)
    assert s3 != s1


def test_hypothesis_json_round_trip(fig1_expr):
    h = synthesize_hypothesis(fig1_expr, EX11_S, 1, 1, 1, 0)
    obj = json.loads(json.dumps(h.to_json()))
    assert set(obj) >= {"q", "ell", "setBudget", "params", "positiveTypes", "exprDigest"}
    h2 = Hypothesis.from_json(obj)
    G = eval_cexpr(fig1_expr)
    assert classify_many(h2, fig1_expr, [(v,) for v in G.vertices]) == \
        classify_many(h, fig1_expr, [(v,) for v in G.vertices])
    # a different expression of the same graph is accepted
    assert classify(h2, trivial_expression(G), ("v1",)) == classify(h, fig1_expr, ("v1",))


def test_classify_rejects_other_graph(fig1_expr):
    h = synthesize_hypothesis(fig1_expr, EX11_S, 1, 1, 1, 0)
    with pytest.raises(LearningError):
        classify(h, gen_cograph(6, 1), ("v1",))
    with pytest.raises(LearningError):
        classify(h, fig1_expr, ("v1", "v2"))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**30))
def test_soundness_property(seed):
    r = random.Random(seed)
    G = random_graph(r, r.randint(1, 5), labels=("A",))
    e = trivial_expression(G)
    S = [((r.choice(G.vertices),), r.choice("+-")) for _ in range(r.randint(1, 5))]
    h = learn_1d(e, S, q=1, ell=1, set_budget=0)
    if h is not None:
        assert classify_many(h, e, [t for t, _ in S]) == [lab for _, lab in S]
