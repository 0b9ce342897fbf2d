"""Labeled graphs and clique-width expressions.

An expression is a tree of ``Base``, ``Union``, ``OrderedUnion``, ``Eta``,
``Rho`` and ``Delta`` nodes.  The label set of a node is the set of label
names it declares: a base declares the labels of its vertex, unions take the
union of their operands, ``Rho`` keeps its source label (now empty) and
``Delta`` drops its label.  Labels starting with ``@`` are reserved; ``@L``
and ``@R`` mark the two sides of an ordered union.

Every traversal here is iterative, so expressions may be much deeper than
Python's recursion limit.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

__all__ = [
    "LabeledGraph", "Base", "Union", "OrderedUnion", "Eta", "Rho", "Delta",
    "ExpressionError", "LEFT", "RIGHT", "postorder", "expr_size", "expr_vocab",
    "base_vertices", "eval_cexpr", "check_wellformed", "trivial_expression",
    "gen_cograph", "gen_tree", "mark_vertex", "encode_training_labels",
    "add_labels", "parse_cwx", "to_cwx", "load_graph", "dump_graph",
    "graph_from_json", "graph_to_json", "expr_digest", "expr_equal",
    "union_all", "relabel_ids", "expr_labels_used", "greedy_expression",
]

LEFT = "@L"
RIGHT = "@R"


class ExpressionError(ValueError):
    """Malformed expression or graph input."""


# ---------------------------------------------------------------------------
# labeled graphs

class LabeledGraph:
    """Finite simple undirected graph with unary label relations.

    ``labels`` maps every declared label name to its vertex set, so a label
    may be declared and empty.
    """

    def __init__(self, vertices: Iterable[str], edges: Iterable = (), labels: Mapping[str, Iterable[str]] | None = None):
        vertices = list(vertices)
        self.vertices = tuple(sorted(set(vertices)))
        if len(self.vertices) != len(vertices):
            raise ExpressionError("duplicate vertex ids")
        self.vertex_set = frozenset(self.vertices)
        adj = {v: set() for v in self.vertices}
        es = set()
        for a, b in edges:
            if a == b:
                raise ExpressionError(f"self-loop at {a!r}")
            if a not in adj or b not in adj:
                raise ExpressionError(f"edge endpoint not a vertex: {a!r}-{b!r}")
            adj[a].add(b)
            adj[b].add(a)
            es.add((a, b) if a < b else (b, a))
        self.adj = {v: frozenset(n) for v, n in adj.items()}
        self.edges = frozenset(es)
        self.labels = {}
        for name, members in (labels or {}).items():
            members = frozenset(members)
            if not members <= self.vertex_set:
                raise ExpressionError(f"label {name!r} mentions unknown vertices {sorted(members - self.vertex_set)}")
            self.labels[name] = members

    @property
    def vocab(self):
        return frozenset(self.labels)

    def labels_of(self, v):
        return frozenset(name for name, members in self.labels.items() if v in members)

    def __len__(self):
        return len(self.vertices)

    def __eq__(self, other):
        if not isinstance(other, LabeledGraph):
            return NotImplemented
        return (self.vertices == other.vertices and self.edges == other.edges
                and self.labels == other.labels)

    def __hash__(self):
        return hash((self.vertices, self.edges, frozenset(self.labels.items())))

    def __repr__(self):
        return f"LabeledGraph(n={len(self.vertices)}, m={len(self.edges)}, labels={sorted(self.labels)})"

    def with_labels(self, extra: Mapping[str, Iterable[str]]) -> "LabeledGraph":
        labels = dict(self.labels)
        for name, members in extra.items():
            if name in labels:
                raise ExpressionError(f"label {name!r} already present")
            labels[name] = members
        return LabeledGraph(self.vertices, self.edges, labels)

    def restrict_labels(self, keep: Iterable[str]) -> "LabeledGraph":
        keep = set(keep)
        return LabeledGraph(self.vertices, self.edges, {k: v for k, v in self.labels.items() if k in keep})


def graph_to_json(G: LabeledGraph) -> dict:
    return {
        "labels": sorted(G.labels),
        "vertices": [{"id": v, "labels": sorted(G.labels_of(v))} for v in G.vertices],
        "edges": [list(e) for e in sorted(G.edges)],
    }


def graph_from_json(obj: dict) -> LabeledGraph:
    try:
        declared = list(obj.get("labels", []))
        verts = obj["vertices"]
        ids = [v["id"] for v in verts]
        if len(set(ids)) != len(ids):
            raise ExpressionError("duplicate vertex ids in graph file")
        labels = {name: set() for name in declared}
        for v in verts:
            for lab in v.get("labels", []):
                if lab not in labels:
                    raise ExpressionError(f"vertex {v['id']!r} uses undeclared label {lab!r}")
                labels[lab].add(v["id"])
        for name in labels:
            if name.startswith("@"):
                raise ExpressionError(f"reserved label name {name!r}")
        return LabeledGraph(ids, [tuple(e) for e in obj.get("edges", [])], labels)
    except (KeyError, TypeError) as exc:
        raise ExpressionError(f"malformed graph JSON: {exc}") from None


def load_graph(path) -> LabeledGraph:
    with open(path, encoding="utf-8") as fh:
        return graph_from_json(json.load(fh))


def dump_graph(G: LabeledGraph, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_json(G), fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# expressions

@dataclass(frozen=True, eq=False)
class Base:
    vertex: str
    labels: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "labels", frozenset(self.labels))

    children = ()


@dataclass(frozen=True, eq=False)
class Union:
    left: object
    right: object

    @property
    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, eq=False)
class OrderedUnion:
    left: object
    right: object

    @property
    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, eq=False)
class Eta:
    P: str
    Q: str
    child: object

    @property
    def children(self):
        return (self.child,)


@dataclass(frozen=True, eq=False)
class Rho:
    P: str
    Q: str
    child: object

    @property
    def children(self):
        return (self.child,)


@dataclass(frozen=True, eq=False)
class Delta:
    P: str
    child: object

    @property
    def children(self):
        return (self.child,)


def postorder(expr) -> Iterator:
    """Yield every node once, children before parents, left before right."""
    stack = [(expr, False)]
    while stack:
        node, done = stack.pop()
        if done:
            yield node
            continue
        stack.append((node, True))
        for c in reversed(node.children):
            stack.append((c, False))


def _postorder_paths(expr):
    stack = [(expr, "root", False)]
    while stack:
        node, path, done = stack.pop()
        if done:
            yield node, path
            continue
        stack.append((node, path, True))
        kids = node.children
        for i in reversed(range(len(kids))):
            tag = ("left", "right")[i] if len(kids) == 2 else "child"
            stack.append((kids[i], f"{path}.{tag}", False))


def expr_size(expr) -> int:
    return sum(1 for _ in postorder(expr))


def base_vertices(expr) -> list[str]:
    return [n.vertex for n in postorder(expr) if isinstance(n, Base)]


def _vocab_step(node, kid_vocabs):
    if isinstance(node, Base):
        return frozenset(node.labels)
    if isinstance(node, Union):
        return kid_vocabs[0] | kid_vocabs[1]
    if isinstance(node, OrderedUnion):
        return kid_vocabs[0] | kid_vocabs[1] | {LEFT, RIGHT}
    if isinstance(node, (Eta, Rho)):
        return kid_vocabs[0]
    if isinstance(node, Delta):
        return kid_vocabs[0] - {node.P}
    raise ExpressionError(f"not an expression node: {node!r}")


def node_vocabs(expr) -> dict:
    """Label set of every node, keyed by ``id(node)``."""
    out = {}
    for node in postorder(expr):
        out[id(node)] = _vocab_step(node, [out[id(c)] for c in node.children])
    return out


def expr_vocab(expr) -> frozenset:
    return node_vocabs(expr)[id(expr)]


def expr_labels_used(expr) -> frozenset:
    """Every label name mentioned anywhere in the expression."""
    out = set()
    for node in postorder(expr):
        if isinstance(node, Base):
            out |= node.labels
        elif isinstance(node, (Eta, Rho)):
            out.update((node.P, node.Q))
        elif isinstance(node, Delta):
            out.add(node.P)
    return frozenset(out)


def check_wellformed(expr) -> list[str]:
    """List all well-formedness violations; an empty list means OK."""
    diags = []
    seen = {}
    vocabs = {}
    for node, path in _postorder_paths(expr):
        kids = [vocabs[id(c)] for c in node.children]
        if isinstance(node, Base):
            if node.vertex in seen:
                diags.append(f"{path}: duplicate base vertex {node.vertex!r} (also at {seen[node.vertex]})")
            else:
                seen[node.vertex] = path
            for lab in node.labels:
                if lab.startswith("@"):
                    diags.append(f"{path}: reserved label {lab!r} on base {node.vertex!r}")
        elif isinstance(node, (Eta, Rho)):
            op = "eta" if isinstance(node, Eta) else "rho"
            if node.P == node.Q:
                diags.append(f"{path}: {op} needs P != Q, got {node.P!r} twice")
            for lab in (node.P, node.Q):
                if lab not in kids[0]:
                    diags.append(f"{path}: {op} label {lab!r} not in child label set {sorted(kids[0])}")
        elif isinstance(node, Delta):
            if node.P not in kids[0]:
                diags.append(f"{path}: del label {node.P!r} not in child label set {sorted(kids[0])}")
        elif isinstance(node, OrderedUnion):
            for lab in (LEFT, RIGHT):
                if lab in kids[0] or lab in kids[1]:
                    diags.append(f"{path}: ordered union operand already carries {lab!r}")
        elif not isinstance(node, Union):
            diags.append(f"{path}: unknown node {type(node).__name__}")
            vocabs[id(node)] = frozenset()
            continue
        vocabs[id(node)] = _vocab_step(node, kids)
    return diags


def _require_wellformed(expr):
    diags = check_wellformed(expr)
    if diags:
        raise ExpressionError("ill-formed expression: " + "; ".join(diags[:5])
                              + (f" (+{len(diags) - 5} more)" if len(diags) > 5 else ""))


def eval_cexpr(expr, check: bool = True) -> LabeledGraph:
    """The labeled graph described by ``expr``."""
    if check:
        _require_wellformed(expr)
    # state per node: (vertex list, edge set, labels dict)
    vals = {}
    for node in postorder(expr):
        if isinstance(node, Base):
            vals[id(node)] = ([node.vertex], set(), {lab: {node.vertex} for lab in node.labels})
            continue
        if isinstance(node, (Union, OrderedUnion)):
            v1, e1, l1 = vals.pop(id(node.left))
            v2, e2, l2 = vals.pop(id(node.right))
            verts = v1 + v2
            edges = e1 | e2
            labels = {lab: set() for lab in set(l1) | set(l2)}
            for lab, members in l1.items():
                labels[lab] |= members
            for lab, members in l2.items():
                labels[lab] |= members
            if isinstance(node, OrderedUnion):
                labels[LEFT] = set(v1)
                labels[RIGHT] = set(v2)
            vals[id(node)] = (verts, edges, labels)
            continue
        verts, edges, labels = vals.pop(id(node.child))
        if isinstance(node, Eta):
            for a in labels.get(node.P, ()):
                for b in labels.get(node.Q, ()):
                    if a != b:
                        edges.add((a, b) if a < b else (b, a))
        elif isinstance(node, Rho):
            labels.setdefault(node.Q, set()).update(labels.get(node.P, ()))
            labels[node.P] = set()
        elif isinstance(node, Delta):
            labels.pop(node.P, None)
        vals[id(node)] = (verts, edges, labels)
    verts, edges, labels = vals[id(expr)]
    return LabeledGraph(verts, edges, labels)


def expr_equal(a, b) -> bool:
    """Structural equality of two expressions."""
    return to_cwx(a) == to_cwx(b)


def expr_digest(expr) -> str:
    return hashlib.sha256(to_cwx(expr, pretty=False).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# .cwx text format

_CWX_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def parse_cwx(text: str):
    """Parse the s-expression format ``(v id lbl*)``, ``(u e e)``, ``(ou e e)``,
    ``(eta P Q e)``, ``(rho P Q e)``, ``(del P e)``."""
    tokens = []
    line = 1
    for m in _CWX_TOKEN.finditer(text):
        tok = m.group()
        if tok[0].isspace() or tok[0] == ";":
            line += tok.count("\n")
            continue
        tokens.append((tok, line))
    # iterative parse: stack of open lists
    stack = []
    result = None
    for tok, line in tokens:
        if result is not None:
            raise ExpressionError(f"line {line}: trailing input after expression")
        if tok == "(":
            stack.append([line])
        elif tok == ")":
            if not stack:
                raise ExpressionError(f"line {line}: unbalanced ')'")
            items = stack.pop()
            node = _cwx_node(items[1:], items[0])
            if stack:
                stack[-1].append(node)
            else:
                result = node
        else:
            if not stack:
                raise ExpressionError(f"line {line}: atom {tok!r} outside parentheses")
            stack[-1].append(tok)
    if stack:
        raise ExpressionError("unbalanced '(' at end of input")
    if result is None:
        raise ExpressionError("empty expression")
    return result


def _cwx_node(items, line):
    if not items or not isinstance(items[0], str):
        raise ExpressionError(f"line {line}: expected an operator")
    op, args = items[0], items[1:]

    def strs(n):
        if len(args) < n or not all(isinstance(a, str) for a in args[:n]):
            raise ExpressionError(f"line {line}: {op} expects {n} label argument(s)")

    def subs(n, start):
        rest = args[start:]
        if len(rest) != n or any(isinstance(a, str) for a in rest):
            raise ExpressionError(f"line {line}: {op} expects {n} subexpression(s)")
        return rest

    if op == "v":
        if not args or not all(isinstance(a, str) for a in args):
            raise ExpressionError(f"line {line}: (v id lbl*) expects atoms only")
        return Base(args[0], frozenset(args[1:]))
    if op == "u":
        a, b = subs(2, 0)
        return Union(a, b)
    if op == "ou":
        a, b = subs(2, 0)
        return OrderedUnion(a, b)
    if op in ("eta", "rho"):
        strs(2)
        (c,) = subs(1, 2)
        return (Eta if op == "eta" else Rho)(args[0], args[1], c)
    if op == "del":
        strs(1)
        (c,) = subs(1, 1)
        return Delta(args[0], c)
    raise ExpressionError(f"line {line}: unknown operator {op!r}")


def to_cwx(expr, pretty: bool = True) -> str:
    out = {}
    for node in postorder(expr):
        if isinstance(node, Base):
            s = "(v " + " ".join([node.vertex] + sorted(node.labels)) + ")"
        elif isinstance(node, Union):
            s = f"(u {out.pop(id(node.left))} {out.pop(id(node.right))})"
        elif isinstance(node, OrderedUnion):
            s = f"(ou {out.pop(id(node.left))} {out.pop(id(node.right))})"
        elif isinstance(node, Eta):
            s = f"(eta {node.P} {node.Q} {out.pop(id(node.child))})"
        elif isinstance(node, Rho):
            s = f"(rho {node.P} {node.Q} {out.pop(id(node.child))})"
        else:
            s = f"(del {node.P} {out.pop(id(node.child))})"
        out[id(node)] = s
    return out[id(expr)]


# ---------------------------------------------------------------------------
# builders and surgery

def union_all(parts: list):
    """Balanced plain union of a nonempty list of expressions."""
    if not parts:
        raise ExpressionError("union of nothing")
    parts = list(parts)
    while len(parts) > 1:
        nxt = [Union(parts[i], parts[i + 1]) for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def trivial_expression(G: LabeledGraph):
    """An expression for ``G`` with one helper label per vertex.

    Edges are added one at a time between helper labels; declared but empty
    labels of ``G`` are introduced by a relabeling into a helper label, and the
    helpers are deleted at the end.
    """
    if not G.vertices:
        raise ExpressionError("empty graph has no expression")
    taken = set(G.labels)
    helper = {}
    for i, v in enumerate(G.vertices):
        h = f"H{i}"
        while h in taken:
            h += "_"
        taken.add(h)
        helper[v] = h
    empty = sorted(name for name, members in G.labels.items() if not members)
    first = G.vertices[0]
    bases = []
    for v in G.vertices:
        labs = set(G.labels_of(v)) | {helper[v]}
        if v == first:
            labs |= set(empty)
        bases.append(Base(v, frozenset(labs)))
    expr = union_all(bases)
    for a, b in sorted(G.edges):
        expr = Eta(helper[a], helper[b], expr)
    for name in empty:
        expr = Rho(name, helper[first], expr)
    for v in G.vertices:
        expr = Delta(helper[v], expr)
    return expr


def greedy_expression(G: LabeledGraph, order: Sequence[str] | None = None):
    """A linear expression for ``G`` that keeps few helper labels alive.

    Vertices are added in ``order`` (default: id order).  Already added
    vertices with the same neighbours among the vertices still to come share
    one helper label; a helper is deleted once its vertices have no future
    neighbours, and deleted names are reused.
    """
    if not G.vertices:
        raise ExpressionError("empty graph has no expression")
    order = list(G.vertices if order is None else order)
    if sorted(order) != list(G.vertices):
        raise ExpressionError("order must list every vertex once")
    taken = set(G.labels)
    free = []
    counter = [0]

    def new_helper():
        if free:
            return free.pop()
        while True:
            counter[0] += 1
            h = f"H{counter[0]}"
            if h not in taken:
                taken.add(h)
                return h

    pos = {v: i for i, v in enumerate(order)}
    empty = sorted(name for name, members in G.labels.items() if not members)
    groups = {}          # helper -> frozenset of future neighbours
    expr = None
    for i, v in enumerate(order):
        h = new_helper()
        labs = set(G.labels_of(v)) | {h}
        base = Base(v, frozenset(labs))
        expr = base if expr is None else Union(expr, base)
        for g, fut in list(groups.items()):
            if v in fut:
                expr = Eta(g, h, expr)
        groups = {g: fut - {v} for g, fut in groups.items()}
        groups[h] = frozenset(u for u in G.adj[v] if pos[u] > i)
        # merge equal futures, delete dead helpers
        by_future = {}
        for g in sorted(groups):
            by_future.setdefault(groups[g], []).append(g)
        new_groups = {}
        for fut, gs in by_future.items():
            keep = gs[0]
            for g in gs[1:]:
                expr = Delta(g, Rho(g, keep, expr))
                free.append(g)
            if fut:
                new_groups[keep] = fut
            else:
                expr = Delta(keep, expr)
                free.append(keep)
        groups = new_groups
    if empty:
        expr = _declare_empty_many(expr, empty)
    return expr


def _declare_empty_many(expr, labels):
    for lab in labels:
        expr = _declare_empty(expr, lab)
    return expr


def _ids(n):
    width = len(str(n))
    return [f"v{str(i + 1).zfill(width)}" for i in range(n)]


def gen_cograph(n: int, seed) -> object:
    """Random cograph expression on vertices v1..vn (zero padded) over {A, B}."""
    if n < 1:
        raise ExpressionError("need n >= 1")
    rng = random.Random(seed)
    ids = _ids(n)
    # random binary cotree; internal node i >= n is (kind, left, right)
    internal = {}
    pool = list(range(n))
    nxt = n
    while len(pool) > 1:
        i, j = rng.sample(range(len(pool)), 2)
        a, b = pool[i], pool[j]
        for idx in sorted((i, j), reverse=True):
            pool.pop(idx)
        internal[nxt] = (rng.choice("uj"), a, b)
        pool.append(nxt)
        nxt += 1
    # emit so that every vertex of a subexpression carries the wanted label
    out = {}
    stack = [(pool[0], "A", False)]
    while stack:
        node, want, done = stack.pop()
        if node < n:
            out[(node, want)] = Base(ids[node], frozenset({want}))
            continue
        kind, a, b = internal[node]
        wa, wb = (want, want) if kind == "u" else ("A", "B")
        if not done:
            stack += [(node, want, True), (b, wb, False), (a, wa, False)]
            continue
        e = Union(out.pop((a, wa)), out.pop((b, wb)))
        if kind == "j":
            e = Eta("A", "B", e)
            e = Rho("B", "A", e) if want == "A" else Rho("A", "B", e)
        out[(node, want)] = e
    return out[(pool[0], "A")]


def gen_tree(n: int, seed) -> object:
    """Random tree on v1..vn (zero padded) as an expression over {A, B, C}.

    Every vertex carries B.  The root of a subtree under construction also
    carries A or C, alternating with depth, so the root and its children's
    roots are told apart; attached children drop back to plain B.
    """
    if n < 1:
        raise ExpressionError("need n >= 1")
    rng = random.Random(seed)
    ids = _ids(n)
    parent = [None] + [rng.randrange(i) for i in range(1, n)]
    depth = [0] * n
    kids = [[] for _ in range(n)]
    for i in range(1, n):
        depth[i] = depth[parent[i]] + 1
        kids[parent[i]].append(i)
    expr = {}
    # parents have smaller indices, so reverse index order is bottom-up
    for v in reversed(range(n)):
        mine, theirs = ("A", "C") if depth[v] % 2 == 0 else ("C", "A")
        e = Base(ids[v], frozenset({mine, "B"}))
        for c in kids[v]:
            e = Eta(mine, theirs, Union(e, expr.pop(c)))
            e = Rho(theirs, "B", e)
        expr[v] = e
    return expr[0]


def add_labels(expr, marks: Mapping[str, Iterable[str]]):
    """Copy of ``expr`` whose base nodes gain labels: ``marks`` maps a vertex
    id to extra label names."""
    marks = {v: frozenset(labs) for v, labs in marks.items()}
    missing = set(marks) - set(base_vertices(expr))
    if missing:
        raise ExpressionError(f"vertices not in expression: {sorted(missing)}")
    return _rebuild(expr, lambda b: Base(b.vertex, b.labels | marks[b.vertex]) if b.vertex in marks else b)


def _rebuild(expr, base_fn):
    out = {}
    for node in postorder(expr):
        if isinstance(node, Base):
            new = base_fn(node)
        elif isinstance(node, Union):
            new = Union(out.pop(id(node.left)), out.pop(id(node.right)))
        elif isinstance(node, OrderedUnion):
            new = OrderedUnion(out.pop(id(node.left)), out.pop(id(node.right)))
        elif isinstance(node, Eta):
            new = Eta(node.P, node.Q, out.pop(id(node.child)))
        elif isinstance(node, Rho):
            new = Rho(node.P, node.Q, out.pop(id(node.child)))
        else:
            new = Delta(node.P, out.pop(id(node.child)))
        out[id(node)] = new
    return out[id(expr)]


def relabel_ids(expr, fn):
    """Copy of ``expr`` with every base vertex id replaced by ``fn(id)``."""
    return _rebuild(expr, lambda b: Base(fn(b.vertex), b.labels))


def mark_vertex(expr, v: str, label: str):
    """Give base vertex ``v`` the fresh label ``label``."""
    if label in expr_labels_used(expr):
        raise ExpressionError(f"label {label!r} already used in the expression")
    if label.startswith("@"):
        raise ExpressionError(f"reserved label name {label!r}")
    return add_labels(expr, {v: {label}})


def encode_training_labels(expr, S, pos: str = "P", neg: str = "N"):
    """Mark positive example vertices with ``pos`` and negative ones with ``neg``.

    ``S`` is a sequence of ``(vertex tuple, label)`` with 1-tuples.  Both
    labels are declared even when no example carries them.
    """
    used = expr_labels_used(expr)
    for lab in (pos, neg):
        if lab in used:
            raise ExpressionError(f"label {lab!r} already used in the expression")
    verts = set(base_vertices(expr))
    marks = {}
    for tup, sign in S:
        if len(tup) != 1:
            raise ExpressionError("training labels can only be encoded for k = 1")
        (v,) = tup
        if v not in verts:
            raise ExpressionError(f"example vertex {v!r} not in expression")
        marks.setdefault(v, set()).add(pos if sign == "+" else neg)
    out = add_labels(expr, marks)
    # declare missing labels on some base so they exist (empty) at the root
    present = expr_vocab(out)
    for lab in (pos, neg):
        if lab not in present:
            out = _declare_empty(out, lab)
    return out


def _declare_empty(expr, label):
    """Declare ``label`` as an empty relation of the root graph."""
    first = base_vertices(expr)[0]
    used = expr_labels_used(expr)
    tmp = "Tmp"
    while tmp in used or tmp == label:
        tmp += "_"
    out = add_labels(expr, {first: {label, tmp}})
    return Delta(tmp, Rho(label, tmp, out))
