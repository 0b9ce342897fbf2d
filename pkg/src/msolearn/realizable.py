"""Realizable type tuples over a clique-width expression, consistency checks,
and the VC / counting utilities.

For an example sequence ``a = (v_1, ..., v_m)`` and parameter count ``l``, the
root table of :func:`realizable_tuples` is the set of rows
``(tp_q(v_1 w), ..., tp_q(v_m w))`` over all ``w`` in ``V^l``, each with the
lexicographically least parameter tuple realizing it.  Least witnesses
survive the bottom-up pass because merging two parameter tuples by a fixed
side pattern is monotone in each of them.  Slots of every type list the example's own
vertices first and the parameters after them.
"""

from __future__ import annotations

import itertools
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graphs import (
    Base, Eta, ExpressionError, LabeledGraph, OrderedUnion, Rho, Union,
    base_vertices, check_wellformed, postorder,
)
from .logic import eval_formula, quantifier_rank, set_depth
from . import typeengine as te
from .typeengine import ResourceCapExceeded, compute_type, type_satisfies, default_slots

__all__ = [
    "RealizableTable", "ResourceCapExceeded", "realizable_tuples", "brute_realizable",
    "phi_consistent", "consistent_rows", "vc_dimension", "shatter_count",
    "sauer_shelah_bound", "distinct_column_symbol", "count_diagnostics", "emit_table",
    "dedupe_examples",
]


def _cap_from_env():
    raw = os.environ.get("MSOLEARN_CAP_NODES")
    return int(raw) if raw else None


@dataclass
class RealizableTable:
    examples: list
    q: int
    ell: int
    set_budget: int
    rows: dict                      # row (tuple of types) -> least parameter tuple, at l params
    by_ell: dict                    # l' -> {row: parameter tuple} at the root
    node_counts: list = field(default_factory=list)   # per visited node: {l': count}
    visits: int = 0
    seconds: float = 0.0

    def __len__(self):
        return len(self.rows)

    @property
    def max_count(self):
        return max((sum(c.values()) for c in self.node_counts), default=0)


def dedupe_examples(examples):
    """Distinct tuples in first-occurrence order, plus the index of each input."""
    index = {}
    uniq = []
    where = []
    for a in examples:
        a = tuple(a)
        if a not in index:
            index[a] = len(uniq)
            uniq.append(a)
        where.append(index[a])
    return uniq, where


def _single_vertex_graph(node):
    return LabeledGraph([node.vertex], (), {lab: {node.vertex} for lab in node.labels})


class _DP:
    def __init__(self, examples, q, ell, budget, cap):
        self.examples = examples
        self.m = len(examples)
        self.q = q
        self.ell = ell
        self.b = budget
        self.cap = cap
        self.visits = 0
        self.counts = []
        self.lock = threading.Lock()
        self.occ = {}
        for i, a in enumerate(examples):
            for p, v in enumerate(a):
                self.occ.setdefault(v, []).append((i, p))

    def base(self, node):
        G = _single_vertex_graph(node)
        pos = [()] * self.m
        for i, p in self.occ.get(node.vertex, ()):
            pos[i] = pos[i] + (p,)
        table = {}
        for lp in range(self.ell + 1):
            row = tuple(compute_type(G, (node.vertex,) * (len(pos[i]) + lp), (), self.q, self.b)
                        for i in range(self.m))
            table[lp] = {row: (node.vertex,) * lp}
        return tuple(pos), table

    def unary(self, node, child):
        pos, table = child
        if isinstance(node, Eta):
            fn = lambda t: te._eta(t, node.P, node.Q)
        elif isinstance(node, Rho):
            fn = lambda t: te._rho(t, node.P, node.Q)
        else:
            fn = lambda t: te._delta(t, node.P)
        out = {}
        for lp, rows in table.items():
            new = {}
            for row, w in rows.items():
                key = tuple(fn(t) for t in row)
                old = new.get(key)
                if old is None or w < old:
                    new[key] = w
            out[lp] = new
        return pos, out

    def union(self, node, left, right):
        ordered = isinstance(node, OrderedUnion)
        pos1, t1 = left
        pos2, t2 = right
        pos = []
        ex_sides = []
        for a, b in zip(pos1, pos2):
            merged = sorted(a + b)
            sa = set(a)
            pos.append(tuple(merged))
            ex_sides.append(tuple(0 if p in sa else 1 for p in merged))
        m = self.m
        comp = te._compose
        out = {}
        for lp in range(self.ell + 1):
            rows = {}
            for mask in range(1 << lp):
                psides = tuple(0 if mask >> j & 1 else 1 for j in range(lp))
                sides = [s + psides for s in ex_sides]
                n1 = bin(mask).count("1")
                for r1, w1 in t1[n1].items():
                    for r2, w2 in t2[lp - n1].items():
                        key = tuple(comp(r1[i], r2[i], sides[i], ordered) for i in range(m))
                        it1, it2 = iter(w1), iter(w2)
                        w = tuple(next(it1) if s == 0 else next(it2) for s in psides)
                        old = rows.get(key)
                        if old is None or w < old:
                            rows[key] = w
                        if self.cap is not None and len(rows) > self.cap:
                            raise ResourceCapExceeded(
                                f"realizable table exceeded {self.cap} rows at a union node")
            out[lp] = rows
        return tuple(pos), out

    def step(self, node, kids):
        if isinstance(node, Base):
            res = self.base(node)
        elif isinstance(node, (Union, OrderedUnion)):
            res = self.union(node, kids[0], kids[1])
        else:
            res = self.unary(node, kids[0])
        with self.lock:
            self.visits += 1
            self.counts.append({lp: len(r) for lp, r in res[1].items()})
        return res

    def run(self, expr):
        vals = {}
        for node in postorder(expr):
            vals[id(node)] = self.step(node, [vals.pop(id(c)) for c in node.children])
        return vals[id(expr)]

    def run_parallel(self, expr, jobs):
        # split off disjoint subtrees below the top union nodes
        frontier = [expr]
        while len(frontier) < jobs:
            idx = next((i for i, n in enumerate(frontier) if len(n.children) == 2), None)
            if idx is None:
                break
            node = frontier.pop(idx)
            frontier[idx:idx] = list(node.children)
        if len(frontier) == 1:
            return self.run(expr)
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            done = dict(zip((id(n) for n in frontier), pool.map(self.run, frontier)))
        vals = dict(done)
        stack = [(expr, False)]
        while stack:
            node, ready = stack.pop()
            if id(node) in done:
                continue
            if ready:
                vals[id(node)] = self.step(node, [vals.pop(id(c)) for c in node.children])
                continue
            stack.append((node, True))
            stack.extend((c, False) for c in reversed(node.children))
        return vals[id(expr)]


def realizable_tuples(expr, examples, q: int, ell: int, set_budget: int | None = None,
                      jobs: int = 1, cap: int | None = None, check: bool = True) -> RealizableTable:
    """Bottom-up realizable-tuple table for ``examples`` with ``ell`` parameters.

    Each expression node is processed exactly once.  ``cap`` (or the
    ``MSOLEARN_CAP_NODES`` environment variable) bounds the number of rows
    any node may hold.
    """
    examples = [tuple(a) for a in examples]
    if q < 0 or ell < 0:
        raise ValueError("q and ell must be >= 0")
    budget = q if set_budget is None else min(set_budget, q)
    if check:
        diags = check_wellformed(expr)
        if diags:
            raise ExpressionError("ill-formed expression: " + "; ".join(diags[:5]))
    verts = set(base_vertices(expr))
    for a in examples:
        for v in a:
            if v not in verts:
                raise ExpressionError(f"example vertex {v!r} is not a base vertex of the expression")
    if cap is None:
        cap = _cap_from_env()
    t0 = time.perf_counter()
    dp = _DP(examples, q, ell, budget, cap)
    if jobs and jobs > 1:
        _, table = dp.run_parallel(expr, jobs)
    else:
        _, table = dp.run(expr)
    return RealizableTable(examples=examples, q=q, ell=ell, set_budget=budget, rows=table[ell],
                           by_ell=table, node_counts=dp.counts, visits=dp.visits,
                           seconds=time.perf_counter() - t0)


def brute_realizable(G: LabeledGraph, examples, q: int, ell: int, set_budget: int | None = None) -> set:
    """Oracle: ``{(tp(a_1 w), ..., tp(a_m w)) : w in V^ell}`` by direct computation."""
    out = set()
    for w in itertools.product(G.vertices, repeat=ell):
        out.add(tuple(compute_type(G, tuple(a) + w, (), q, set_budget) for a in examples))
    return out


# ---------------------------------------------------------------------------
# consistency

def _slot_map(k, ell, names=None):
    if names is None:
        return default_slots(k, ell)
    if len(names) != k + ell:
        raise ValueError("variable name list must cover k + ell slots")
    return {n: i for i, n in enumerate(names)}


def consistent_rows(table: RealizableTable, labels, phi, k: int, names=None):
    """Rows of ``table`` on which ``phi`` reproduces ``labels`` (a list of '+'/'-')."""
    if quantifier_rank(phi) > table.q:
        raise te.TypeEngineError(f"formula rank exceeds q={table.q}")
    if set_depth(phi) > table.set_budget:
        raise te.TypeEngineError(f"formula set depth exceeds set budget {table.set_budget}")
    smap = _slot_map(k, table.ell, names)
    cache = {}

    def sat(t):
        hit = cache.get(t)
        if hit is None:
            hit = cache[t] = type_satisfies(t, phi, smap)
        return hit

    want = [lab == "+" for lab in labels]
    for row, w in table.rows.items():
        if all(sat(t) == wi for t, wi in zip(row, want)):
            yield row, w


def phi_consistent(expr, examples, labels, phi, q: int, ell: int, set_budget: int | None = None,
                   names=None, table: RealizableTable | None = None, **kw) -> bool:
    """Is there ``w`` with ``phi(v_i, w)`` true exactly on the positive examples?"""
    examples = [tuple(a) for a in examples]
    labels = list(labels)
    if len(examples) != len(labels):
        raise ValueError("examples and labels differ in length")
    arities = {len(a) for a in examples}
    if len(arities) > 1:
        raise ValueError("examples have mixed arity")
    k = arities.pop() if arities else 0
    if not examples:
        return True
    uniq, where = dedupe_examples(examples)
    want = {}
    for j, lab in zip(where, labels):
        if want.setdefault(j, lab) != lab:
            return False
    if table is None:
        table = realizable_tuples(expr, uniq, q, ell, set_budget, **kw)
    ulabels = [want[j] for j in range(len(uniq))]
    return next(consistent_rows(table, ulabels, phi, k, names), None) is not None


# ---------------------------------------------------------------------------
# VC apparatus

def _truth_table(G, phi, k, ell, names=None):
    xs = list(itertools.product(G.vertices, repeat=k))
    ws = list(itertools.product(G.vertices, repeat=ell))
    if names is None:
        names = [f"x{i + 1}" for i in range(k)] + [f"y{j + 1}" for j in range(ell)]
    tab = np.zeros((len(xs), len(ws)), dtype=bool)
    for a, x in enumerate(xs):
        for b, w in enumerate(ws):
            tab[a, b] = eval_formula(G, phi, dict(zip(names, x + w)))
    return xs, ws, tab


def shatter_count(G, phi, X, ell: int, names=None) -> int:
    """``|H_phi(G, X)|``: number of distinct traces ``X ∩ phi(G, w)``."""
    X = [tuple(x) for x in X]
    if not X:
        return 1
    k = len(X[0])
    if names is None:
        names = [f"x{i + 1}" for i in range(k)] + [f"y{j + 1}" for j in range(ell)]
    traces = set()
    for w in itertools.product(G.vertices, repeat=ell):
        traces.add(tuple(eval_formula(G, phi, dict(zip(names, x + w))) for x in X))
    return len(traces)


def vc_dimension(G, phi, k: int, ell: int, maxd: int = 4, names=None) -> int:
    """Largest ``d <= maxd`` such that some ``d``-set of k-tuples is shattered."""
    xs, ws, tab = _truth_table(G, phi, k, ell, names)
    best = 0
    for d in range(1, min(maxd, len(xs)) + 1):
        if (1 << d) > len(ws):
            break
        found = False
        for X in itertools.combinations(range(len(xs)), d):
            patterns = {tuple(col) for col in tab[list(X), :].T}
            if len(patterns) == 1 << d:
                found = True
                break
        if not found:
            break
        best = d
    return best


def sauer_shelah_bound(n: int, d: int) -> int:
    return sum(math.comb(n, i) for i in range(d + 1))


def distinct_column_symbol(M, c: int):
    """A symbol whose indicator matrix has at least ``c`` distinct columns.

    Symbols are tried in sorted order.  Returns ``None`` when no symbol works,
    which the matrix lemma rules out once ``n > (c-1)^(s-1)`` for the ``s``
    symbols occurring in ``M``.
    """
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    cols = {tuple(col) for col in M.T}
    if len(cols) != M.shape[1]:
        raise ValueError("matrix columns are not pairwise distinct")
    for sym in sorted(np.unique(M).tolist()):
        ind = (M == sym)
        if len({tuple(col) for col in ind.T}) >= c:
            return sym
    return None


def count_diagnostics(table: RealizableTable, d: int, m: int | None = None, k: int | None = None,
                      t: int | None = None) -> dict:
    """Realizable-row counts per node against ``(k+1) * g(d, m)^t``.

    ``g`` is instantiated as the Sauer-Shelah growth function; exceeding the
    bound only raises a flag.  ``t`` defaults to the number of distinct types
    seen in the root table.
    """
    if m is None:
        m = len(table.examples)
    if k is None:
        k = max((len(a) for a in table.examples), default=0)
    if t is None:
        t = len({ty for row in table.rows for ty in row}) or 1
    bound = (k + 1) * sauer_shelah_bound(m, d) ** t
    counts = [c.get(table.ell, 0) for c in table.node_counts]
    flags = [i for i, c in enumerate(counts) if c > bound]
    return {
        "root_count": len(table.rows),
        "max_count": max(counts, default=0),
        "bound": bound,
        "g": "sauer-shelah sum_{i<=d} C(m,i) (inferred instantiation)",
        "d": d, "m": m, "k": k, "t": t,
        "flagged_nodes": flags,
        "visits": table.visits,
    }


def emit_table(table: RealizableTable) -> str:
    """Root table as sorted lines ``index: id,id,...``."""
    rows = sorted(tuple(t.id for t in row) for row in table.rows)
    return "".join(f"{i}: {','.join(map(str, r))}\n" for i, r in enumerate(rows))
