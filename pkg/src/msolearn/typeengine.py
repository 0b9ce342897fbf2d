"""Rank-bounded MSO types as interned recursive objects.

A type of rank q records the atomic facts about k vertex slots and s set
slots, plus the set of rank q-1 types reachable by adding one vertex slot
(``vext``) and, while the set budget lasts, by adding one set slot
(``sext``).  Structurally equal types are the same Python object, so type
equality is ``is`` and types can be used directly as dictionary keys.

The set budget caps how many set quantifiers may be nested; a type of rank q
and budget b decides exactly the formulas of rank <= q whose set quantifiers
nest at most b deep.  Budgets are normalised to ``min(b, q)``.
"""

from __future__ import annotations

import hashlib
import itertools
import threading
from typing import Mapping, Sequence

from .graphs import LEFT, RIGHT, LabeledGraph
from .logic import (
    And, Edge, Eq, ExistsInd, ExistsSet, FalseF, ForallInd, ForallSet, FormulaError,
    Iff, Implies, Label, Not, Or, SetMember, TrueF, free_variables, quantifier_rank, set_depth,
)

__all__ = [
    "RankedType", "TypeStore", "STORE", "TypeEngineError", "compute_type", "type_satisfies",
    "apply_eta", "apply_rho", "apply_delta", "extend_labels", "truncate", "compose",
    "type_digest", "dump_types", "default_slots", "clear_caches",
]


class ResourceCapExceeded(RuntimeError):
    """A configured size cap was hit; the answer would be incomplete."""


class TypeEngineError(ValueError):
    """Misuse of the type engine (rank, budget or signature mismatch)."""


class RankedType:
    __slots__ = ("id", "rank", "budget", "k", "s", "vocab", "eqc", "edges", "labs", "sets",
                 "vext", "sext", "_digest", "__weakref__")

    def __repr__(self):
        return (f"<type #{self.id} q={self.rank} b={self.budget} k={self.k} s={self.s} "
                f"|vext|={len(self.vext)} |sext|={len(self.sext)}>")

    def equal_slots(self, i, j):
        return self.eqc[i] == self.eqc[j]

    def has_edge(self, i, j):
        if i > j:
            i, j = j, i
        return (i, j) in self.edges

    @property
    def digest(self):
        return type_digest(self)


class TypeStore:
    """Hash-consing table.  Lookups are lock-free; insertions are serialised."""

    def __init__(self):
        self._table = {}
        self._by_id = []
        self._lock = threading.Lock()
        self.limit = None           # max number of interned types, None = unbounded

    def __len__(self):
        return len(self._by_id)

    def get(self, type_id):
        return self._by_id[type_id]

    def make(self, rank, budget, vocab, eqc, edges, labs, sets, s, vext, sext):
        key = (rank, budget, vocab, eqc, edges, labs, sets, s, vext, sext)
        t = self._table.get(key)
        if t is not None:
            return t
        with self._lock:
            t = self._table.get(key)
            if t is not None:
                return t
            if self.limit is not None and len(self._by_id) >= self.limit:
                raise ResourceCapExceeded(f"more than {self.limit} interned types")
            t = RankedType()
            t.id = len(self._by_id)
            t.rank, t.budget, t.k, t.s = rank, budget, len(eqc), s
            t.vocab, t.eqc, t.edges, t.labs, t.sets = vocab, eqc, edges, labs, sets
            t.vext, t.sext = vext, sext
            t._digest = None
            self._by_id.append(t)
            self._table[key] = t
            return t

    def types(self):
        return list(self._by_id)

    def clear(self):
        with self._lock:
            self._table.clear()
            self._by_id.clear()


STORE = TypeStore()

_memo_eta = {}
_memo_rho = {}
_memo_delta = {}
_memo_ext = {}
_memo_trunc = {}
_memo_compose = {}


def clear_caches():
    """Drop transform memo tables (interned types stay valid)."""
    for m in (_memo_eta, _memo_rho, _memo_delta, _memo_ext, _memo_trunc, _memo_compose):
        m.clear()
    _computers.clear()


def reset_types():
    """Forget every interned type and memo.  Types created before the call
    must not be used afterwards."""
    clear_caches()
    STORE.clear()


def _norm_budget(q, b):
    if b is None:
        return q
    if b < 0:
        raise TypeEngineError("set budget must be >= 0")
    return min(b, q)


# ---------------------------------------------------------------------------
# brute force

class _Computer:
    """Per-graph memo for brute-force type computation."""

    def __init__(self, G: LabeledGraph):
        self.G = G
        self.vocab = frozenset(G.labels)
        self.vlabels = {v: G.labels_of(v) for v in G.vertices}
        self.adj = G.adj
        self.memo = {}
        self._subsets = None

    @property
    def subsets(self):
        if self._subsets is None:
            vs = self.G.vertices
            self._subsets = [frozenset(c for i, c in enumerate(vs) if mask >> i & 1)
                             for mask in range(1 << len(vs))]
        return self._subsets

    def atomic(self, tup, sets):
        k = len(tup)
        eqc = tuple(tup.index(v) for v in tup)
        edges = frozenset((i, j) for i in range(k) for j in range(i + 1, k) if tup[j] in self.adj[tup[i]])
        labs = tuple(self.vlabels[v] for v in tup)
        mem = tuple(frozenset(j for j, S in enumerate(sets) if v in S) for v in tup)
        return eqc, edges, labs, mem

    def build(self, tup, sets, q, b):
        key = (tup, sets, q, b)
        t = self.memo.get(key)
        if t is not None:
            return t
        eqc, edges, labs, mem = self.atomic(tup, sets)
        if q == 0:
            vext = sext = frozenset()
        else:
            vext = frozenset(self.build(tup + (u,), sets, q - 1, min(b, q - 1)) for u in self.G.vertices)
            if b > 0:
                sext = frozenset(self.build(tup, sets + (U,), q - 1, b - 1) for U in self.subsets)
            else:
                sext = frozenset()
        t = STORE.make(q, b, self.vocab, eqc, edges, labs, mem, len(sets), vext, sext)
        self.memo[key] = t
        return t


_computers = {}
_computers_lock = threading.Lock()


def _computer(G):
    c = _computers.get(id(G))
    if c is None or c.G is not G:
        with _computers_lock:
            if len(_computers) > 64:
                _computers.clear()
            c = _Computer(G)
            _computers[id(G)] = c
    return c


def compute_type(G: LabeledGraph, vbar: Sequence[str] = (), sets: Sequence = (), q: int = 0,
                 set_budget: int | None = None) -> RankedType:
    """The rank-q type of ``(vbar, sets)`` in ``G``, by exhaustive recursion.

    ``set_budget`` defaults to ``q`` (full MSO); 0 gives first-order types.
    Set quantification enumerates all vertex subsets, so keep ``G`` small
    when the budget is positive.
    """
    vbar = tuple(vbar)
    sets = tuple(frozenset(S) for S in sets)
    for v in vbar:
        if v not in G.vertex_set:
            raise TypeEngineError(f"vertex {v!r} not in graph")
    for S in sets:
        if not S <= G.vertex_set:
            raise TypeEngineError(f"set argument mentions unknown vertices {sorted(S - G.vertex_set)}")
    if q < 0:
        raise TypeEngineError("rank must be >= 0")
    return _computer(G).build(vbar, sets, q, _norm_budget(q, set_budget))


# ---------------------------------------------------------------------------
# satisfaction

def default_slots(k: int, ell: int = 0) -> dict:
    """Slot map x1..xk -> 0..k-1, y1..yl -> k..k+l-1."""
    out = {f"x{i + 1}": i for i in range(k)}
    out.update({f"y{j + 1}": k + j for j in range(ell)})
    return out


def type_satisfies(theta: RankedType, phi, slot_map: Mapping[str, int] | None = None,
                   set_slot_map: Mapping[str, int] | None = None) -> bool:
    """Decide ``phi`` from ``theta`` alone.

    ``slot_map`` sends free individual variables to vertex slots and
    ``set_slot_map`` free set variables to set slots.  Without a slot map the
    ``x1..xk`` naming convention is used for all slots.
    """
    q = quantifier_rank(phi)
    if q > theta.rank:
        raise TypeEngineError(f"formula rank {q} exceeds type rank {theta.rank}")
    d = set_depth(phi)
    if d > theta.budget:
        raise TypeEngineError(f"formula nests {d} set quantifiers, type budget is {theta.budget}")
    if slot_map is None:
        slot_map = default_slots(theta.k)
    set_slot_map = dict(set_slot_map or {})
    ind_free, set_free = free_variables(phi)
    for v in ind_free:
        if v not in slot_map:
            raise TypeEngineError(f"free variable {v!r} not mapped to a slot")
        if not 0 <= slot_map[v] < theta.k:
            raise TypeEngineError(f"slot {slot_map[v]} out of range for k={theta.k}")
    for X in set_free:
        if X not in set_slot_map:
            raise TypeEngineError(f"free set variable {X!r} not mapped to a set slot")
    env = tuple(sorted((v, slot_map[v]) for v in ind_free))
    senv = tuple(sorted((X, set_slot_map[X]) for X in set_free))
    return _Sat().run(theta, phi, dict(env), dict(senv))


class _Sat:
    def __init__(self):
        self.memo = {}

    def run(self, t, f, ind, sets):
        cls = type(f)
        if cls is TrueF:
            return True
        if cls is FalseF:
            return False
        if cls is Eq:
            return t.eqc[ind[f.left]] == t.eqc[ind[f.right]]
        if cls is Edge:
            return t.has_edge(ind[f.left], ind[f.right])
        if cls is Label:
            return f.name in t.labs[ind[f.term]]
        if cls is SetMember:
            return sets[f.setvar] in t.sets[ind[f.term]]
        if cls is Not:
            return not self.run(t, f.body, ind, sets)
        if cls is And:
            return self.run(t, f.left, ind, sets) and self.run(t, f.right, ind, sets)
        if cls is Or:
            return self.run(t, f.left, ind, sets) or self.run(t, f.right, ind, sets)
        if cls is Implies:
            return (not self.run(t, f.left, ind, sets)) or self.run(t, f.right, ind, sets)
        if cls is Iff:
            return self.run(t, f.left, ind, sets) == self.run(t, f.right, ind, sets)
        key = (t.id, id(f), tuple(sorted(ind.items())), tuple(sorted(sets.items())))
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if cls is ExistsInd or cls is ForallInd:
            ind2 = dict(ind)
            ind2[f.var] = t.k
            want = cls is ExistsInd
            res = (not want)
            for c in t.vext:
                if self.run(c, f.body, ind2, sets) == want:
                    res = want
                    break
        elif cls is ExistsSet or cls is ForallSet:
            sets2 = dict(sets)
            sets2[f.var] = t.s
            want = cls is ExistsSet
            res = (not want)
            for c in t.sext:
                if self.run(c, f.body, ind, sets2) == want:
                    res = want
                    break
        else:
            raise FormulaError(f"not a formula: {f!r}")
        self.memo[key] = res
        return res


# ---------------------------------------------------------------------------
# forward maps

def _remake(t, vocab=None, edges=None, labs=None, vext=None, sext=None):
    return STORE.make(t.rank, t.budget, t.vocab if vocab is None else vocab, t.eqc,
                      t.edges if edges is None else edges, t.labs if labs is None else labs,
                      t.sets, t.s, t.vext if vext is None else vext, t.sext if sext is None else sext)


def apply_eta(t: RankedType, P: str, Q: str) -> RankedType:
    """Type after adding all P-Q edges (between distinct vertices)."""
    if P == Q:
        raise TypeEngineError("eta needs P != Q")
    for lab in (P, Q):
        if lab not in t.vocab:
            raise TypeEngineError(f"label {lab!r} not in type vocabulary")
    return _eta(t, P, Q)


def _eta(t, P, Q):
    key = (t.id, P, Q)
    hit = _memo_eta.get(key)
    if hit is not None:
        return hit
    labs, eqc = t.labs, t.eqc
    new = set(t.edges)
    for i in range(t.k):
        li = labs[i]
        pi, qi = P in li, Q in li
        if not (pi or qi):
            continue
        for j in range(i + 1, t.k):
            if eqc[i] == eqc[j]:
                continue
            lj = labs[j]
            if (pi and Q in lj) or (qi and P in lj):
                new.add((i, j))
    res = _remake(t, edges=frozenset(new),
                  vext=frozenset(_eta(c, P, Q) for c in t.vext),
                  sext=frozenset(_eta(c, P, Q) for c in t.sext))
    _memo_eta[key] = res
    return res


def apply_rho(t: RankedType, P: str, Q: str) -> RankedType:
    """Type after relabeling P into Q (P stays declared, now empty)."""
    if P == Q:
        raise TypeEngineError("rho needs P != Q")
    for lab in (P, Q):
        if lab not in t.vocab:
            raise TypeEngineError(f"label {lab!r} not in type vocabulary")
    return _rho(t, P, Q)


def _rho(t, P, Q):
    key = (t.id, P, Q)
    hit = _memo_rho.get(key)
    if hit is not None:
        return hit
    pq = frozenset((P,))
    labs = tuple((l - pq) | {Q} if P in l else l for l in t.labs)
    res = _remake(t, labs=labs,
                  vext=frozenset(_rho(c, P, Q) for c in t.vext),
                  sext=frozenset(_rho(c, P, Q) for c in t.sext))
    _memo_rho[key] = res
    return res


def apply_delta(t: RankedType, P: str) -> RankedType:
    """Type after removing label P from the vocabulary."""
    if P not in t.vocab:
        raise TypeEngineError(f"label {P!r} not in type vocabulary")
    return _delta(t, P)


def _delta(t, P):
    key = (t.id, P)
    hit = _memo_delta.get(key)
    if hit is not None:
        return hit
    gone = frozenset((P,))
    res = _remake(t, vocab=t.vocab - gone, labs=tuple(l - gone for l in t.labs),
                  vext=frozenset(_delta(c, P) for c in t.vext),
                  sext=frozenset(_delta(c, P) for c in t.sext))
    _memo_delta[key] = res
    return res


def extend_labels(t: RankedType, labels) -> RankedType:
    """Same type over a larger vocabulary; the new labels are empty."""
    labels = frozenset(labels)
    if labels <= t.vocab:
        return t
    return _extend(t, labels | t.vocab)


def _extend(t, vocab):
    key = (t.id, vocab)
    hit = _memo_ext.get(key)
    if hit is not None:
        return hit
    res = _remake(t, vocab=vocab, vext=frozenset(_extend(c, vocab) for c in t.vext),
                  sext=frozenset(_extend(c, vocab) for c in t.sext))
    _memo_ext[key] = res
    return res


def truncate(t: RankedType, rank: int, budget: int | None = None) -> RankedType:
    """The coarser type of rank ``rank`` (and budget) implied by ``t``."""
    if rank > t.rank:
        raise TypeEngineError(f"cannot raise rank {t.rank} to {rank}")
    b = t.budget if budget is None else budget
    if b > t.budget:
        raise TypeEngineError(f"cannot raise set budget {t.budget} to {b}")
    b = min(b, rank)
    if rank == t.rank and b == t.budget:
        return t
    return _trunc(t, rank, b)


def _trunc(t, rank, b):
    if rank == t.rank and b == t.budget:
        return t
    key = (t.id, rank, b)
    hit = _memo_trunc.get(key)
    if hit is not None:
        return hit
    if rank == 0:
        vext = sext = frozenset()
    else:
        vext = frozenset(_trunc(c, rank - 1, min(b, rank - 1)) for c in t.vext)
        sext = frozenset(_trunc(c, rank - 1, b - 1) for c in t.sext) if b > 0 else frozenset()
    res = STORE.make(rank, b, t.vocab, t.eqc, t.edges, t.labs, t.sets, t.s, vext, sext)
    _memo_trunc[key] = res
    return res


def compose(t1: RankedType, t2: RankedType, sides: Sequence[int], ordered: bool = True) -> RankedType:
    """Type of a combined tuple in the disjoint union of the two graphs.

    ``sides[i]`` says whether slot i of the result comes from the left (0) or
    right (1) operand; slots of each side keep their relative order.  With
    ``ordered`` the result also carries ``@L`` on left slots and ``@R`` on
    right slots.  Vocabularies are merged (labels missing on one side are
    empty there).
    """
    sides = tuple(sides)
    if t1.rank != t2.rank or t1.budget != t2.budget:
        raise TypeEngineError("compose needs equal rank and set budget")
    if t1.s != t2.s:
        raise TypeEngineError("compose needs equal set-slot counts")
    if sides.count(0) != t1.k or sides.count(1) != t2.k or len(sides) != t1.k + t2.k:
        raise TypeEngineError("slot sides do not match the operand arities")
    if ordered and ({LEFT, RIGHT} & (t1.vocab | t2.vocab)):
        raise TypeEngineError("ordered union operands already carry @L/@R")
    return _compose(t1, t2, sides, ordered)


def _compose(t1, t2, sides, ordered):
    key = (t1.id, t2.id, sides, ordered)
    hit = _memo_compose.get(key)
    if hit is not None:
        return hit
    left = [i for i, s in enumerate(sides) if s == 0]
    right = [i for i, s in enumerate(sides) if s == 1]
    eqc = [0] * len(sides)
    labs = [None] * len(sides)
    mem = [None] * len(sides)
    edges = []
    tagL = frozenset((LEFT,)) if ordered else frozenset()
    tagR = frozenset((RIGHT,)) if ordered else frozenset()
    for t, pos, tag in ((t1, left, tagL), (t2, right, tagR)):
        for li, g in enumerate(pos):
            eqc[g] = pos[t.eqc[li]]
            labs[g] = t.labs[li] | tag if tag else t.labs[li]
            mem[g] = t.sets[li]
        for a, b in t.edges:
            edges.append((pos[a], pos[b]))
    vocab = t1.vocab | t2.vocab
    if ordered:
        vocab = vocab | {LEFT, RIGHT}
    q, b = t1.rank, t1.budget
    if q == 0:
        vext = sext = frozenset()
    else:
        r1 = _trunc(t1, q - 1, min(b, q - 1))
        r2 = _trunc(t2, q - 1, min(b, q - 1))
        sl, sr = sides + (0,), sides + (1,)
        vext = frozenset(itertools.chain(
            (_compose(c, r2, sl, ordered) for c in t1.vext),
            (_compose(r1, c, sr, ordered) for c in t2.vext)))
        if b > 0:
            sext = frozenset(_compose(c1, c2, sides, ordered) for c1 in t1.sext for c2 in t2.sext)
        else:
            sext = frozenset()
    res = STORE.make(q, b, vocab, tuple(eqc), frozenset(edges), tuple(labs), tuple(mem),
                     t1.s, vext, sext)
    _memo_compose[key] = res
    return res


# ---------------------------------------------------------------------------
# digests and dumps

def _atomic_repr(t):
    return repr((t.rank, t.budget, t.k, t.s, sorted(t.vocab), list(t.eqc), sorted(t.edges),
                 [sorted(l) for l in t.labs], [sorted(m) for m in t.sets]))


def type_digest(t: RankedType) -> str:
    """Stable content hash (independent of interning order)."""
    if t._digest is not None:
        return t._digest
    # children first, iteratively, so deep types never hit the recursion limit
    stack = [t]
    while stack:
        cur = stack[-1]
        pending = [c for c in itertools.chain(cur.vext, cur.sext) if c._digest is None]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        if cur._digest is not None:
            continue
        h = hashlib.sha256(_atomic_repr(cur).encode())
        h.update(b"|v")
        for d in sorted(c._digest for c in cur.vext):
            h.update(d.encode())
        h.update(b"|s")
        for d in sorted(c._digest for c in cur.sext):
            h.update(d.encode())
        cur._digest = h.hexdigest()[:24]
    return t._digest


def atomic_hash(t: RankedType) -> str:
    return hashlib.sha256(_atomic_repr(t).encode()).hexdigest()[:12]


def dump_types(types=None) -> str:
    """One line per type: ``id rank (k,s) atomic-hash #vext #sext``."""
    if types is None:
        types = STORE.types()
    return "".join(f"{t.id} {t.rank} ({t.k},{t.s}) {atomic_hash(t)} {len(t.vext)} {len(t.sext)}\n"
                   for t in types)
