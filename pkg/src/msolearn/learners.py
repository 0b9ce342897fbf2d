"""Consistent learning, type-based hypothesis synthesis and agnostic PAC
learning via empirical risk minimisation.

A hypothesis is a parameter tuple ``w`` plus a set of positive rank-q types:
an instance ``v`` is classified ``+`` iff the type of ``(v, w)`` is one of
them.  Hypotheses found through a formula bank also keep that formula.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .graphs import (
    LabeledGraph, base_vertices, encode_training_labels, eval_cexpr,
    expr_labels_used, graph_to_json, mark_vertex,
)
from .logic import (
    Edge, Eq, ExistsInd, ExistsSet, ForallInd, ForallSet, Formula, Label, Not,
    SetMember, conj, disj, encode_examples_formula, quantifier_rank, set_depth, to_text,
    parse_formula, FALSE,
)
from .realizable import (
    consistent_rows, dedupe_examples, realizable_tuples,
)
from .typeengine import RankedType, compute_type, type_digest, type_satisfies, default_slots

__all__ = [
    "Hypothesis", "LearningError", "parse_training", "format_training", "load_training",
    "parse_distribution", "load_distribution", "graph_digest", "learn_1d",
    "learn_hd_consistent", "synthesize_hypothesis", "classify", "classify_many",
    "sample_complexity", "erm", "pac_learn", "err_empirical", "err_true",
    "draw_sample", "hintikka_formula", "class_vc_dimension", "fresh_label",
]


class LearningError(ValueError):
    """Bad learning input (arity, labels, distribution...)."""


# ---------------------------------------------------------------------------
# file formats

_MINUS = {"-", "−", "–"}


def parse_training(text: str, k: int | None = None):
    """Lines ``v_1 ... v_k +`` (or ``-``); ``#`` starts a comment."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        sign = parts[-1]
        if sign == "+":
            lab = "+"
        elif sign in _MINUS:
            lab = "-"
        else:
            raise LearningError(f"line {lineno}: last field must be + or -, got {sign!r}")
        tup = tuple(parts[:-1])
        if k is None:
            k = len(tup)
        if len(tup) != k:
            raise LearningError(f"line {lineno}: expected {k} vertices, got {len(tup)}")
        out.append((tup, lab))
    return out


def format_training(S) -> str:
    return "".join(" ".join(tup + (lab,)) + "\n" for tup, lab in S)


def load_training(path, k=None):
    with open(path, encoding="utf-8") as fh:
        return parse_training(fh.read(), k)


def parse_distribution(obj) -> list:
    """``{"support": [{"tuple": [...], "label": "+", "weight": "3/10"}, ...]}``.

    Returns ``[(tuple, label, Fraction)]`` in file order; weights must be
    nonnegative and sum to exactly 1.
    """
    try:
        entries = obj["support"]
        out = []
        for e in entries:
            w = Fraction(str(e["weight"]))
            lab = e["label"]
            if lab in _MINUS:
                lab = "-"
            if lab not in ("+", "-"):
                raise LearningError(f"bad label {lab!r}")
            if w < 0:
                raise LearningError("negative weight")
            out.append((tuple(e["tuple"]), lab, w))
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, LearningError):
            raise
        raise LearningError(f"malformed distribution: {exc}") from None
    total = sum((w for _, _, w in out), Fraction(0))
    if total != 1:
        raise LearningError(f"distribution weights sum to {total}, not 1")
    if len({len(t) for t, _, _ in out}) > 1:
        raise LearningError("distribution tuples have mixed arity")
    return out


def load_distribution(path):
    with open(path, encoding="utf-8") as fh:
        return parse_distribution(json.load(fh))


def graph_digest(expr_or_graph) -> str:
    """Digest of the described graph, so equivalent expressions agree."""
    G = expr_or_graph if isinstance(expr_or_graph, LabeledGraph) else eval_cexpr(expr_or_graph)
    blob = json.dumps(graph_to_json(G), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# hypotheses

@dataclass
class Hypothesis:
    params: tuple
    positive: frozenset            # type digests
    q: int
    ell: int
    k: int
    set_budget: int
    formula: Formula | None = None
    expr_digest: str | None = None
    vocab: tuple = ()
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "q": self.q, "ell": self.ell, "k": self.k, "setBudget": self.set_budget,
            "params": list(self.params), "positiveTypes": sorted(self.positive),
            "exprDigest": self.expr_digest,
        }
        if self.formula is not None:
            out["formula"] = to_text(self.formula)
        return out

    @classmethod
    def from_json(cls, obj, vocab=()):
        formula = None
        if obj.get("formula"):
            formula = parse_formula(obj["formula"], vocab)
        return cls(params=tuple(obj["params"]), positive=frozenset(obj["positiveTypes"]),
                   q=int(obj["q"]), ell=int(obj["ell"]), k=int(obj.get("k", 1)),
                   set_budget=int(obj["setBudget"]), formula=formula,
                   expr_digest=obj.get("exprDigest"), vocab=tuple(vocab))


def fresh_label(used, base):
    name = base
    i = 1
    while name in used:
        i += 1
        name = f"{base}{i}"
    return name


def _instance_types(expr, tuples, h_params, q, b):
    """Rank-q types of ``v + params`` for each ``v`` via one DP pass."""
    ex = [tuple(t) + tuple(h_params) for t in tuples]
    if not ex:
        return []
    uniq, where = dedupe_examples(ex)
    table = realizable_tuples(expr, uniq, q, 0, b)
    (row,) = table.rows
    return [row[j] for j in where]


def _check_target(h, expr):
    if h.expr_digest is not None and graph_digest(expr) != h.expr_digest:
        raise LearningError("hypothesis was learned on a different graph")


def classify_many(h: Hypothesis, expr, tuples) -> list:
    tuples = [tuple(t) for t in tuples]
    for t in tuples:
        if len(t) != h.k:
            raise LearningError(f"instance {t} has arity {len(t)}, hypothesis expects {h.k}")
    _check_target(h, expr)
    if isinstance(expr, LabeledGraph):
        types = [compute_type(expr, t + h.params, (), h.q, h.set_budget) for t in tuples]
    else:
        types = _instance_types(expr, tuples, h.params, h.q, h.set_budget)
    return ["+" if type_digest(t) in h.positive else "-" for t in types]


def classify(h: Hypothesis, expr, vbar) -> str:
    """``+`` iff the type of ``(vbar, params)`` is a positive type of ``h``."""
    return classify_many(h, expr, [tuple(vbar)])[0]


def _make_hypothesis(expr, params, pos_types, q, ell, k, b, formula=None, **info):
    return Hypothesis(params=tuple(params), positive=frozenset(type_digest(t) for t in pos_types),
                      q=q, ell=ell, k=k, set_budget=b, formula=formula,
                      expr_digest=graph_digest(expr), info=info)


# ---------------------------------------------------------------------------
# consistency with a formula and witness extraction

def _split(S):
    S = [(tuple(t), lab) for t, lab in S]
    for _, lab in S:
        if lab not in ("+", "-"):
            raise LearningError(f"bad label {lab!r}")
    arities = {len(t) for t, _ in S}
    if len(arities) > 1:
        raise LearningError("training sequence has mixed arity")
    return S, (arities.pop() if arities else None)


def _dedupe_labeled(S):
    """Distinct tuples and their labels, or ``None`` on a contradiction."""
    uniq, where = dedupe_examples([t for t, _ in S])
    labels = [None] * len(uniq)
    for j, (_, lab) in zip(where, S):
        if labels[j] is None:
            labels[j] = lab
        elif labels[j] != lab:
            return uniq, None
    return uniq, labels


def _pin_loop(expr, uniq, q, k, ell, b, accept):
    """Fix parameters one at a time: for slot j try vertices in id order, pin
    the choice with a fresh label and keep the first one for which some row
    of the re-run table still passes ``accept``."""
    verts = sorted(base_vertices(expr))
    used = set(expr_labels_used(expr))
    pins = []
    cur = expr
    chosen = []
    for j in range(ell):
        lab = fresh_label(used, f"Pin{j + 1}_")
        used.add(lab)
        pins.append(lab)
        for v in verts:
            trial = mark_vertex(cur, v, lab)
            table = realizable_tuples(trial, uniq, q, ell, b)
            ok = False
            for row, _ in table.rows.items():
                t0 = row[0]
                base = len(uniq[0])
                if all(pins[i] in t0.labs[base + i] for i in range(j + 1)) and accept(row):
                    ok = True
                    break
            if ok:
                chosen.append(v)
                cur = trial
                break
        else:
            return None
    return tuple(chosen)


def learn_hd_consistent(expr, S, q: int, k: int, ell: int, set_budget: int | None, phi: Formula,
                        method: str = "table", names=None, **kw):
    """Least parameter tuple ``w`` with ``phi(v, w)`` matching every label of
    ``S``, or ``None`` if there is none.

    ``method="table"`` reads the least witness off the realizable table;
    ``method="pinning"`` fixes one parameter at a time with fresh labels.
    Both return the same tuple.
    """
    S, kk = _split(S)
    if kk is not None and kk != k:
        raise LearningError(f"examples have arity {kk}, expected {k}")
    b = q if set_budget is None else min(set_budget, q)
    if quantifier_rank(phi) > q or set_depth(phi) > b:
        raise LearningError("formula exceeds the rank or set budget")
    uniq, labels = _dedupe_labeled(S)
    if labels is None:
        return None
    verts = sorted(base_vertices(expr))
    if not uniq:
        return (verts[0],) * ell
    table = realizable_tuples(expr, uniq, q, ell, b, **kw)
    hits = [w for _, w in consistent_rows(table, labels, phi, k, names)]
    if not hits:
        return None
    if method == "table":
        return min(hits)
    if method != "pinning":
        raise LearningError(f"unknown witness method {method!r}")
    smap = default_slots(k, ell) if names is None else {n: i for i, n in enumerate(names)}
    want = [lab == "+" for lab in labels]
    return _pin_loop(expr, uniq, q, k, ell, b,
                     lambda row: all(type_satisfies(t, phi, smap) == w for t, w in zip(row, want)))


# ---------------------------------------------------------------------------
# type-based synthesis

def _separates(row, labels):
    seen = {}
    for t, lab in zip(row, labels):
        if seen.setdefault(t, lab) != lab:
            return False
    return True


def synthesize_hypothesis(expr, S, q: int, k: int, ell: int, set_budget: int | None = None,
                          method: str = "table", export_formula: bool = False, **kw):
    """A rank-q hypothesis consistent with ``S`` or ``None``.

    One exists iff some realizable row gives equal types only to equally
    labeled examples; the positive types are those of the positive examples.
    """
    S, kk = _split(S)
    if kk is not None and kk != k:
        raise LearningError(f"examples have arity {kk}, expected {k}")
    b = q if set_budget is None else min(set_budget, q)
    uniq, labels = _dedupe_labeled(S)
    if labels is None:
        return None
    verts = sorted(base_vertices(expr))
    if not uniq:
        return _make_hypothesis(expr, (verts[0],) * ell, (), q, ell, k, b, formula=FALSE if export_formula else None)
    table = realizable_tuples(expr, uniq, q, ell, b, **kw)
    good = [(w, row) for row, w in table.rows.items() if _separates(row, labels)]
    if not good:
        return None
    w, row = min(good, key=lambda p: p[0])
    if method == "pinning":
        w = _pin_loop(expr, uniq, q, k, ell, b, lambda r: _separates(r, labels))
        row = _row_for(expr, uniq, w, q, b)
    pos = {t for t, lab in zip(row, labels) if lab == "+"}
    formula = None
    if export_formula:
        names = [f"x{i + 1}" for i in range(k)] + [f"y{j + 1}" for j in range(ell)]
        formula = disj(hintikka_formula(t, names) for t in sorted(pos, key=type_digest))
    return _make_hypothesis(expr, w, pos, q, ell, k, b, formula=formula, rows=len(table.rows),
                            visits=table.visits)


def _row_for(expr, uniq, w, q, b):
    return tuple(_instance_types(expr, uniq, w, q, b))


def learn_1d(expr, S, q: int, ell: int, set_budget: int | None = None, bank: Sequence[Formula] | None = None,
             **kw):
    """Consistent 1-dimensional learning.

    Without a bank this is type-based synthesis at rank q.  With a bank the
    training labels are written into the graph as fresh labels and the first
    bank formula whose encoded form holds for some realizable parameter type
    (at rank q+1) is returned together with the least such parameter tuple.
    """
    S, kk = _split(S)
    if kk not in (None, 1):
        raise LearningError("learn_1d needs k = 1")
    b = q if set_budget is None else min(set_budget, q)
    if bank is None:
        return synthesize_hypothesis(expr, S, q, 1, ell, b, **kw)
    uniq, labels = _dedupe_labeled(S)
    if labels is None:
        return None
    used = set(expr_labels_used(expr))
    P = fresh_label(used, "Pos")
    N = fresh_label(used | {P}, "Neg")
    GS = encode_training_labels(expr, S, P, N)
    table = realizable_tuples(GS, [()], q + 1, ell, b, **kw)
    ys = {f"y{j + 1}": j for j in range(ell)}
    for phi in bank:
        if quantifier_rank(phi) > q or set_depth(phi) > b:
            raise LearningError(f"bank formula exceeds rank {q} or set budget {b}: {to_text(phi)}")
        enc = encode_examples_formula(phi, P, N, instance_var="x1")
        hits = [w for (t,), w in table.rows.items() if type_satisfies(t, enc, ys)]
        if hits:
            w = min(hits)
            return _bank_hypothesis(expr, phi, w, q, ell, 1, b)
    return None


def _bank_hypothesis(expr, phi, w, q, ell, k, b):
    verts = sorted(base_vertices(expr))
    tuples = list(itertools.product(verts, repeat=k))
    types = _instance_types(expr, tuples, w, q, b)
    smap = default_slots(k, ell)
    pos = {t for t in types if type_satisfies(t, phi, smap)}
    return _make_hypothesis(expr, w, pos, q, ell, k, b, formula=phi)


# ---------------------------------------------------------------------------
# explicit defining formulas of types

def hintikka_formula(t: RankedType, names: Sequence[str], max_nodes: int = 200_000) -> Formula:
    """A formula of rank ``t.rank`` true exactly of tuples of type ``t``
    (over the type's vocabulary).  Raises if it would exceed ``max_nodes``."""
    budget = [max_nodes]

    def tick(n=1):
        budget[0] -= n
        if budget[0] < 0:
            raise LearningError("defining formula too large to export")

    def build(t, names, sets, depth):
        parts = []
        k = t.k
        for i in range(k):
            for j in range(i + 1, k):
                eq = Eq(names[i], names[j])
                parts.append(eq if t.eqc[i] == t.eqc[j] else Not(eq))
                if t.eqc[i] != t.eqc[j]:
                    e = Edge(names[i], names[j])
                    parts.append(e if (i, j) in t.edges else Not(e))
            for lab in sorted(t.vocab):
                if lab.startswith("@"):
                    continue
                a = Label(lab, names[i])
                parts.append(a if lab in t.labs[i] else Not(a))
            for s_idx, X in enumerate(sets):
                a = SetMember(X, names[i])
                parts.append(a if s_idx in t.sets[i] else Not(a))
        tick(len(parts) + 1)
        if t.rank > 0:
            z = f"z{depth}"
            kids = sorted(t.vext, key=type_digest)
            chis = [build(c, list(names) + [z], sets, depth + 1) for c in kids]
            parts.extend(ExistsInd(z, c) for c in chis)
            parts.append(ForallInd(z, disj(chis)))
            if t.sext:
                Z = f"Z{depth}"
                kids = sorted(t.sext, key=type_digest)
                chis = [build(c, names, list(sets) + [Z], depth + 1) for c in kids]
                parts.extend(ExistsSet(Z, c) for c in chis)
                parts.append(ForallSet(Z, disj(chis)))
        return conj(parts)

    if len(names) != t.k:
        raise LearningError("need one variable name per slot")
    return build(t, list(names), [], 1)


# ---------------------------------------------------------------------------
# PAC / ERM

def sample_complexity(d: int, eps, delta, C=8) -> int:
    """``ceil(C * (d + ln(1/delta)) / eps^2)``."""
    eps, delta = float(eps), float(delta)
    if not (0 < eps < 1 and 0 < delta < 1):
        raise LearningError("eps and delta must lie in (0, 1)")
    if float(C) <= 0 or d < 0:
        raise LearningError("need C > 0 and d >= 0")
    return math.ceil(float(C) * (d + math.log(1 / delta)) / (eps * eps) - 1e-9)


def _score_row(row, pos_counts, neg_counts):
    per = {}
    for t, p, n in zip(row, pos_counts, neg_counts):
        a = per.setdefault(t, [0, 0])
        a[0] += p
        a[1] += n
    score = sum(max(p, n) for p, n in per.values())
    positive = {t for t, (p, n) in per.items() if p > n}
    return score, positive


def erm(expr, sample, q: int, k: int, ell: int, set_budget: int | None = None, mode: str = "types", **kw):
    """Hypothesis of least empirical error on ``sample`` among rank-q
    hypotheses with ``ell`` parameters."""
    S, kk = _split(sample)
    if kk is not None and kk != k:
        raise LearningError(f"examples have arity {kk}, expected {k}")
    b = q if set_budget is None else min(set_budget, q)
    verts = sorted(base_vertices(expr))
    if not S:
        return _make_hypothesis(expr, (verts[0],) * ell, (), q, ell, k, b, errors=0)
    if mode == "subsequence":
        return _erm_subsequence(expr, S, q, k, ell, b, **kw)
    if mode != "types":
        raise LearningError(f"unknown ERM mode {mode!r}")
    uniq, where = dedupe_examples([t for t, _ in S])
    pos = [0] * len(uniq)
    neg = [0] * len(uniq)
    for j, (_, lab) in zip(where, S):
        if lab == "+":
            pos[j] += 1
        else:
            neg[j] += 1
    table = realizable_tuples(expr, uniq, q, ell, b, **kw)
    best = None
    for row, w in table.rows.items():
        score, positive = _score_row(row, pos, neg)
        key = (-score, tuple(type_digest(t) for t in row))
        if best is None or key < best[0]:
            best = (key, w, positive)
    (negscore, _), w, positive = best
    return _make_hypothesis(expr, w, positive, q, ell, k, b, errors=len(S) + negscore)


def _erm_subsequence(expr, S, q, k, ell, b, **kw):
    m = len(S)
    if m > 12:
        raise LearningError("subsequence ERM is limited to m <= 12")
    uniq, where = dedupe_examples([t for t, _ in S])
    table = realizable_tuples(expr, uniq, q, ell, b, **kw)
    rows = sorted(table.rows.items(), key=lambda rw: rw[1])
    labels = [lab for _, lab in S]
    for size in range(m, -1, -1):
        for I in itertools.combinations(range(m), size):
            for row, w in rows:
                seen = {}
                ok = True
                for i in I:
                    t = row[where[i]]
                    if seen.setdefault(t, labels[i]) != labels[i]:
                        ok = False
                        break
                if ok:
                    positive = {t for t, lab in seen.items() if lab == "+"}
                    return _make_hypothesis(expr, w, positive, q, ell, k, b, errors=m - size, subset=I)
    raise AssertionError("the empty subsequence is always consistent")


def err_empirical(h: Hypothesis, expr, S) -> Fraction:
    S = [(tuple(t), lab) for t, lab in S]
    if not S:
        raise LearningError("empirical error of an empty sample")
    preds = classify_many(h, expr, [t for t, _ in S])
    return Fraction(sum(p != lab for p, (_, lab) in zip(preds, S)), len(S))


def err_true(h: Hypothesis, expr, D) -> Fraction:
    """Exact error against an explicit distribution ``[(tuple, label, weight)]``."""
    preds = classify_many(h, expr, [t for t, _, _ in D])
    return sum((w for p, (_, lab, w) in zip(preds, D) if p != lab), Fraction(0))


def draw_sample(D, m: int, seed) -> list:
    """``m`` i.i.d. draws by inverse CDF over the support in file order."""
    rng = random.Random(seed)
    cum = []
    acc = Fraction(0)
    for _, _, w in D:
        acc += w
        cum.append(acc)
    out = []
    for _ in range(m):
        u = rng.random()
        idx = next(i for i, c in enumerate(cum) if u < c)
        t, lab, _ = D[idx]
        out.append((t, lab))
    return out


def class_vc_dimension(expr, instances, q, ell, b, maxd: int = 5) -> int:
    """VC dimension of the rank-q, ell-parameter type class restricted to
    ``instances`` (capped at ``maxd``)."""
    uniq, _ = dedupe_examples(instances)
    table = realizable_tuples(expr, uniq, q, ell, b)
    rows = list(table.rows)
    best = 0
    for d in range(1, min(maxd, len(uniq)) + 1):
        found = False
        for X in itertools.combinations(range(len(uniq)), d):
            patterns = set()
            for row in rows:
                # every labeling constant on the row's type classes is realizable
                classes = {}
                for i in X:
                    classes.setdefault(row[i], []).append(i)
                groups = list(classes.values())
                for bits in itertools.product((0, 1), repeat=len(groups)):
                    pat = [0] * d
                    for g, bit in zip(groups, bits):
                        for i in g:
                            pat[X.index(i)] = bit
                    patterns.add(tuple(pat))
                if len(patterns) == 1 << d:
                    break
            if len(patterns) == 1 << d:
                found = True
                break
        if not found:
            break
        best = d
    return best


def pac_learn(expr, D, q: int, k: int, ell: int, set_budget: int | None, eps, delta, seed,
              m_override: int | None = None, C=8, d: int | None = None, mode: str = "types", **kw):
    """Draw a sample from ``D`` and run ERM on it.  Returns ``(h, sample)``."""
    if sum((w for _, _, w in D), Fraction(0)) != 1:
        raise LearningError("distribution is not normalised")
    b = q if set_budget is None else min(set_budget, q)
    if m_override is not None:
        m = int(m_override)
    else:
        if d is None:
            d = class_vc_dimension(expr, [t for t, _, _ in D], q, ell, b)
        m = sample_complexity(d, eps, delta, C)
    sample = draw_sample(D, m, seed)
    h = erm(expr, sample, q, k, ell, b, mode=mode, **kw)
    h.info["sample_size"] = m
    return h, sample
