"""Executable hardness constructions.

* the weighted 2-CNF satisfiability reduction: instance generator plus a
  brute-force oracle, and a batch checker that shares one DP table across
  all formulas over the same variable count;
* the two-copy gadget;
* model checking through a consistent-learning oracle.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass

from .graphs import (Base, Delta, Eta, LabeledGraph, Union, _declare_empty, add_labels, base_vertices,
                     expr_labels_used, expr_vocab, greedy_expression, relabel_ids, union_all)
from .learners import fresh_label, learn_1d
from .logic import (FALSE, TRUE, And, Edge, Eq, ExistsInd, ExistsSet, Formula, ForallInd, ForallSet,
                    FalseF, Iff, Implies, Label, Not, Or, SetMember, TrueF, BINARY, _all_vars, _fresh,
                    _map_atoms, conj, deg_formula, disj, free_variables, quantifier_rank, set_depth,
                    pin_vertex_formula, substitute_set_by_label)
from .realizable import ResourceCapExceeded, realizable_tuples
from .typeengine import default_slots, type_satisfies

__all__ = [
    "Cnf2", "CnfError", "parse_dimacs", "format_dimacs", "load_dimacs", "gen_wsat", "wsat_formula",
    "wsat_graph", "literal_vertex", "wsat_brute", "WsatBatch", "two_copy_gadget", "gadget_expression",
    "gadget_query_formula", "mc_via_learning", "MCStats",
]


class CnfError(ValueError):
    pass


# ---------------------------------------------------------------------------
# 2-CNF

@dataclass(frozen=True)
class Cnf2:
    """``clauses`` are pairs of literals ``(variable index, polarity)`` with
    indices in 1..n and polarity True for a positive literal."""
    n: int
    clauses: tuple

    def __post_init__(self):
        if self.n < 0:
            raise CnfError("negative variable count")
        cl = []
        for c in self.clauses:
            c = tuple((int(i), bool(p)) for i, p in c)
            if len(c) != 2:
                raise CnfError(f"clause {c} does not have exactly 2 literals")
            for i, _ in c:
                if not 1 <= i <= self.n:
                    raise CnfError(f"variable index {i} outside 1..{self.n}")
            cl.append(c)
        object.__setattr__(self, "clauses", tuple(cl))

    def satisfied_by(self, true_vars) -> bool:
        true_vars = set(true_vars)
        return all(any((i in true_vars) == p for i, p in c) for c in self.clauses)


def parse_dimacs(text: str) -> Cnf2:
    n = None
    m = None
    clauses = []
    pending = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise CnfError(f"line {lineno}: bad problem line {line!r}")
            n, m = int(parts[2]), int(parts[3])
            continue
        if n is None:
            raise CnfError(f"line {lineno}: clause before the problem line")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise CnfError(f"line {lineno}: bad literal {tok!r}") from None
            if lit == 0:
                if len(pending) != 2:
                    raise CnfError(f"line {lineno}: clause with {len(pending)} literals, expected 2")
                clauses.append(tuple(pending))
                pending = []
            else:
                pending.append((abs(lit), lit > 0))
    if pending:
        raise CnfError("last clause is not terminated by 0")
    if n is None:
        raise CnfError("missing 'p cnf n m' line")
    if m != len(clauses):
        raise CnfError(f"problem line announces {m} clauses, found {len(clauses)}")
    return Cnf2(n, tuple(clauses))


def format_dimacs(cnf: Cnf2) -> str:
    lines = [f"p cnf {cnf.n} {len(cnf.clauses)}"]
    for c in cnf.clauses:
        lines.append(" ".join(str(i if p else -i) for i, p in c) + " 0")
    return "\n".join(lines) + "\n"


def load_dimacs(path) -> Cnf2:
    with open(path) as fh:
        return parse_dimacs(fh.read())


def wsat_brute(cnf: Cnf2, ell: int) -> bool:
    """Is there a satisfying assignment with exactly ``ell`` true variables?"""
    if not 0 <= ell <= cnf.n:
        return False
    return any(cnf.satisfied_by(T) for T in itertools.combinations(range(1, cnf.n + 1), ell))


# ---------------------------------------------------------------------------
# the reduction

def literal_vertex(lit) -> str:
    i, pos = lit
    return f"X{i}" if pos else f"nX{i}"


def _component(i):
    # two labels a, b; each vertex joins with one label and the previous
    # "current" side is deleted once its last edge is in place
    x, nx, y1, y2, z = f"X{i}", f"nX{i}", f"Y{i}_1", f"Y{i}_2", f"Z{i}"
    e = Delta("a", Eta("a", "b", Union(Base(z, frozenset({"a"})), Base(nx, frozenset({"b"})))))
    e = Delta("b", Eta("a", "b", Union(e, Base(x, frozenset({"a"})))))
    e = Delta("b", Eta("a", "b", Union(e, Base(y1, frozenset({"b"})))))
    e = Delta("b", Eta("a", "b", Union(e, Base(y2, frozenset({"b"})))))
    return Delta("a", e)


def wsat_graph(n: int):
    """The reduction graph on n variables as a 2-label expression."""
    if n < 1:
        raise CnfError("need at least one variable")
    return union_all([_component(i) for i in range(1, n + 1)])


def wsat_formula(ell: int) -> Formula:
    """``phi(x1, x2, y1..yl)``: the y's are distinct degree-3 vertices (true
    variables) and one of x1, x2 is a chosen positive literal or a negative
    literal whose variable was not chosen."""
    ys = [f"y{j}" for j in range(1, ell + 1)]
    parts = [deg_formula(3, "=", y) for y in ys]
    parts += [Not(Eq(a, b)) for a, b in itertools.combinations(ys, 2)]
    sides = []
    for x in ("x1", "x2"):
        chosen = disj(Eq(x, y) for y in ys)
        free_neg = And(deg_formula(2, "=", x), conj(Not(Edge(y, x)) for y in ys))
        sides.append(Or(chosen, free_neg) if ys else free_neg)
    parts.append(disj(sides))
    return conj(parts)


def gen_wsat(cnf: Cnf2, ell: int):
    """Return ``(expr, examples, labels, phi, ell)``: every clause becomes a
    positive example over its two literal vertices."""
    if ell > cnf.n:
        raise CnfError(f"weight {ell} exceeds the number of variables {cnf.n}")
    if ell < 0:
        raise CnfError("negative weight")
    expr = wsat_graph(cnf.n)
    examples = [tuple(literal_vertex(l) for l in c) for c in cnf.clauses]
    labels = ["+"] * len(examples)
    return expr, examples, labels, wsat_formula(ell), ell


WSAT_Q = 4
WSAT_SET_BUDGET = 0


class WsatBatch:
    """Decide the reduction for every 2-CNF over n variables at weight ell
    from one realizable table.

    The examples are all unordered literal pairs.  The table for the pairs
    of a particular formula is the projection of this one, so the formula is
    phi-consistent iff some row satisfies phi on each of its clauses.
    """

    def __init__(self, n: int, ell: int, q: int = WSAT_Q, set_budget: int = WSAT_SET_BUDGET, **kw):
        self.n, self.ell = n, ell
        self.expr = wsat_graph(n)
        lits = [(i, p) for i in range(1, n + 1) for p in (True, False)]
        self.pairs = [tuple(sorted(c)) for c in itertools.combinations_with_replacement(lits, 2)]
        self.index = {c: j for j, c in enumerate(self.pairs)}
        examples = [tuple(literal_vertex(l) for l in c) for c in self.pairs]
        self.table = realizable_tuples(self.expr, examples, q, ell, set_budget, **kw)
        phi = wsat_formula(ell)
        smap = default_slots(2, ell)
        cache = {}
        masks = set()
        for row in self.table.rows:
            mask = 0
            for j, t in enumerate(row):
                hit = cache.get(t)
                if hit is None:
                    hit = cache[t] = type_satisfies(t, phi, smap)
                if hit:
                    mask |= 1 << j
            masks.add(mask)
        # keep only maximal masks
        self.masks = [m for m in masks if not any(m != o and m & o == m for o in masks)]

    def clause_mask(self, cnf: Cnf2) -> int:
        if cnf.n != self.n:
            raise CnfError(f"formula has {cnf.n} variables, table built for {self.n}")
        mask = 0
        for c in cnf.clauses:
            mask |= 1 << self.index[tuple(sorted(c))]
        return mask

    def consistent(self, cnf: Cnf2) -> bool:
        need = self.clause_mask(cnf)
        return any(m & need == need for m in self.masks)


# ---------------------------------------------------------------------------
# two-copy gadget

def _tag(i, v):
    return f"{i}:{v}"


def _hub(i):
    return f"w:{i}"


def two_copy_gadget(G: LabeledGraph, C1, C2, label: str = "C") -> LabeledGraph:
    """Two tagged copies of ``G`` with hubs ``w:1``, ``w:2``; hub i is joined
    to every vertex of copy i and ``label`` marks C1 in copy 1 and C2 in copy 2."""
    C1, C2 = frozenset(C1), frozenset(C2)
    for C in (C1, C2):
        if not C <= G.vertex_set:
            raise ValueError(f"set mentions unknown vertices {sorted(C - G.vertex_set)}")
    if label in G.labels:
        raise ValueError(f"label {label!r} already in the graph")
    verts = [_tag(i, v) for i in (1, 2) for v in G.vertices] + [_hub(1), _hub(2)]
    edges = [(_tag(i, a), _tag(i, b)) for i in (1, 2) for a, b in G.edges]
    edges += [(_hub(i), _tag(i, v)) for i in (1, 2) for v in G.vertices]
    labels = {name: {_tag(i, v) for i in (1, 2) for v in members} for name, members in G.labels.items()}
    labels[label] = {_tag(1, v) for v in C1} | {_tag(2, v) for v in C2}
    return LabeledGraph(verts, edges, labels)


def gadget_expression(G: LabeledGraph, C1, C2, label: str = "C", base=None):
    """An expression evaluating to ``two_copy_gadget(G, C1, C2, label)``."""
    base = greedy_expression(G) if base is None else base
    used = set(expr_labels_used(base)) | {label}
    H = fresh_label(used, "Hub")
    W = fresh_label(used | {H}, "W")
    verts = base_vertices(base)
    halves = []
    for i, C in ((1, C1), (2, C2)):
        marks = {v: {H} | ({label} if v in C else set()) for v in verts}
        e = relabel_ids(add_labels(base, marks), lambda v, i=i: _tag(i, v))
        e = Eta(H, W, Union(e, Base(_hub(i), frozenset({W}))))
        halves.append(Delta(W, Delta(H, e)))
    out = Union(*halves)
    if label not in expr_vocab(out):
        out = _declare_empty(out, label)
    return out


def _rename_set(f, old, new):
    def sub(atom):
        if isinstance(atom, SetMember) and atom.setvar == old:
            return SetMember(new, atom.term)
        return atom
    return _map_atoms(f, sub)


def _relativize(f, h):
    """Restrict every individual quantifier of ``f`` to the neighbourhood of
    ``h``.  Set quantifiers need no guard: membership is only ever tested on
    neighbours of ``h``."""
    t = type(f)
    if t is Not:
        return Not(_relativize(f.body, h))
    if t in BINARY:
        return t(_relativize(f.left, h), _relativize(f.right, h))
    if t is ExistsInd:
        return ExistsInd(f.var, And(Edge(h, f.var), _relativize(f.body, h)))
    if t is ForallInd:
        return ForallInd(f.var, Implies(Edge(h, f.var), _relativize(f.body, h)))
    if t in (ExistsSet, ForallSet):
        return t(f.var, _relativize(f.body, h))
    return f


def _set_as_label(f, setvar, label, h):
    def sub(atom):
        if isinstance(atom, SetMember) and atom.setvar == setvar:
            return And(Label(label, atom.term), Edge(h, atom.term))
        return atom
    return _map_atoms(f, sub)


def gadget_query_formula(psi: Formula, setvar: str, label: str = "C", hub_var: str | None = None,
                         extendable: bool = True) -> Formula:
    """``beta(h)``: true at hub w_i of the gadget iff ``gamma(C_i)`` holds in G,
    where ``gamma(X) = EX Y (X <= Y & psi(Y))`` if ``extendable`` and
    ``gamma = psi`` otherwise.

    ``X`` is never quantified: inside copy i it is ``C & E(h, .)``.
    """
    taken = _all_vars(psi, set()) | {setvar}
    h = hub_var or _fresh("h", taken)
    taken.add(h)
    if extendable:
        Y = _fresh("Y", taken)
        taken.add(Y)
        z = _fresh("z", taken)
        gamma = ExistsSet(Y, And(ForallInd(z, Implies(SetMember(setvar, z), SetMember(Y, z))),
                                 _rename_set(psi, setvar, Y)))
    else:
        gamma = psi
    return _set_as_label(_relativize(gamma, h), setvar, label, h)


# ---------------------------------------------------------------------------
# model checking through the learner

@dataclass
class MCStats:
    nodes: int = 0
    queries: int = 0
    max_family: int = 0


def _cap_nodes(cap):
    if cap is not None:
        return cap
    raw = os.environ.get("MSOLEARN_CAP_NODES")
    return int(raw) if raw else 200_000


class _MC:
    def __init__(self, cap, family_cap, learner):
        self.cap = cap
        self.family_cap = family_cap
        self.learner = learner
        self.stats = MCStats()

    def tick(self, what="nodes"):
        setattr(self.stats, what, getattr(self.stats, what) + 1)
        if self.stats.nodes + self.stats.queries > self.cap:
            raise ResourceCapExceeded(f"model checking exceeded {self.cap} recursion nodes and oracle queries")

    def differ(self, expr, a, b, q, budget):
        """Ask the learner whether some rank-q hypothesis separates a from b."""
        self.tick("queries")
        S = [((a,), "+"), ((b,), "-")]
        return self.learner(expr, S, q, 0, budget) is not None

    def run(self, G: LabeledGraph, f: Formula) -> bool:
        self.tick()
        t = type(f)
        if t is TrueF:
            return True
        if t is FalseF:
            return False
        if t is Not:
            return not self.run(G, f.body)
        if t is And:
            return self.run(G, f.left) and self.run(G, f.right)
        if t is Or:
            return self.run(G, f.left) or self.run(G, f.right)
        if t is Implies:
            return (not self.run(G, f.left)) or self.run(G, f.right)
        if t is Iff:
            return self.run(G, f.left) == self.run(G, f.right)
        if t is ForallInd:
            return not self.exists_vertex(G, f.var, Not(f.body))
        if t is ExistsInd:
            return self.exists_vertex(G, f.var, f.body)
        if t is ForallSet:
            return not self.exists_set(G, f.var, Not(f.body))
        if t is ExistsSet:
            return self.exists_set(G, f.var, f.body)
        raise ValueError(f"not a sentence: free atom {f!r}")

    def exists_vertex(self, G, x, psi):
        q, b = quantifier_rank(psi), set_depth(psi)
        expr = greedy_expression(G)
        reps = []
        for v in G.vertices:
            if all(self.differ(expr, v, r, q, b) for r in reps):
                reps.append(v)
        used = set(G.labels)
        I = fresh_label(used, "I")
        N = fresh_label(used | {I}, "Nb")
        for v in reps:
            Gv = G.with_labels({I: {v}, N: G.adj[v]})
            # label atoms on x are known for this v; deciding them here keeps
            # the pinned sentence from growing a fresh quantifier
            mine = G.labels_of(v)
            fixed = _map_atoms(psi, lambda a: (TRUE if a.name in mine else FALSE)
                               if isinstance(a, Label) and a.term == x else a)
            if self.run(Gv, pin_vertex_formula(fixed, x, I, N)):
                return True
        return False

    def exists_set(self, G, X, psi):
        C = fresh_label(set(G.labels), "C")
        beta = gadget_query_formula(psi, X, C)
        q, b = quantifier_rank(beta), set_depth(beta)
        base = greedy_expression(G)
        hub1 = (_hub(1),)
        family = [frozenset()]
        candidates = [frozenset()]
        for _ in range(len(G.vertices)):
            ext = sorted({A | {v} for A in family for v in G.vertices if v not in A},
                         key=lambda s: sorted(s))
            reps = []
            for A in ext:
                fresh = True
                for R in reps:
                    expr = gadget_expression(G, A, R, C, base)
                    if not self.differ(expr, hub1[0], _hub(2), q, b):
                        fresh = False
                        break
                if fresh:
                    reps.append(A)
                    if len(reps) > self.family_cap:
                        raise ResourceCapExceeded(
                            f"candidate family exceeded {self.family_cap} sets in one round")
            self.stats.max_family = max(self.stats.max_family, len(reps))
            family = reps
            candidates.extend(reps)
            if not family:
                break
        L = fresh_label(set(G.labels), "S")
        inner = substitute_set_by_label(psi, X, L)
        for A in candidates:
            if self.run(G.with_labels({L: A}), inner):
                return True
        return False


def mc_via_learning(G: LabeledGraph, phi: Formula, learner=None, cap: int | None = None,
                    family_cap: int = 256, stats: MCStats | None = None) -> bool:
    """Decide ``G |= phi`` using only a consistent-learning oracle.

    ``learner(expr, S, q, ell, set_budget)`` must return a hypothesis or None;
    the default is type-mode ``learn_1d``.  ``cap`` bounds recursion nodes
    plus oracle queries (env MSOLEARN_CAP_NODES, default 200000).
    """
    ind, sets = free_variables(phi)
    if ind or sets:
        raise ValueError(f"phi has free variables {sorted(ind | sets)}")
    mc = _MC(_cap_nodes(cap), family_cap, learner or learn_1d)
    try:
        return mc.run(G, phi)
    finally:
        if stats is not None:
            stats.nodes, stats.queries, stats.max_family = mc.stats.nodes, mc.stats.queries, mc.stats.max_family
