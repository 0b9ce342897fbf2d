"""MSO formulas over labeled graphs: syntax tree, text format, brute-force
semantics and the formula constructions used by the learners and reductions.

Text grammar (one formula per string, ``#`` starts a comment)::

    true | false | E(t,t) | t = t | t != t | Name(t) | !f
    (f & f) | (f | f) | (f -> f) | (f <-> f)
    ex v. f | all v. f | EX V. f | ALL V. f

Individual variables are lowercase identifiers, set variables and labels are
uppercase-initial.  Quantifier bodies extend as far to the right as possible.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

__all__ = [
    "Formula", "TrueF", "FalseF", "Eq", "Edge", "Label", "SetMember", "Not",
    "And", "Or", "Implies", "Iff", "ExistsInd", "ForallInd", "ExistsSet",
    "ForallSet", "FormulaSyntaxError", "FormulaError", "parse_formula",
    "to_text", "quantifier_rank", "set_depth", "free_variables",
    "labels_used", "eval_formula", "conj", "disj", "encode_examples_formula",
    "singletonize", "pin_vertex_formula", "deg_formula", "formula_bank",
    "substitute_set_by_label", "rename_free",
]


class FormulaSyntaxError(ValueError):
    def __init__(self, msg, line, col):
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line = line
        self.col = col


class FormulaError(ValueError):
    """Semantic misuse of a formula (unknown label, rebinding, uncovered variable...)."""


# ---------------------------------------------------------------------------
# syntax tree

class Formula:
    __slots__ = ()

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, repr=False)
class TrueF(Formula):
    def __repr__(self):
        return "TrueF()"


@dataclass(frozen=True, repr=False)
class FalseF(Formula):
    def __repr__(self):
        return "FalseF()"


@dataclass(frozen=True)
class Eq(Formula):
    left: str
    right: str


@dataclass(frozen=True)
class Edge(Formula):
    left: str
    right: str


@dataclass(frozen=True)
class Label(Formula):
    name: str
    term: str


@dataclass(frozen=True)
class SetMember(Formula):
    setvar: str
    term: str


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class ExistsInd(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class ForallInd(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class ExistsSet(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class ForallSet(Formula):
    var: str
    body: Formula


BINARY = {And: "&", Or: "|", Implies: "->", Iff: "<->"}
QUANTIFIERS = {ExistsInd: "ex", ForallInd: "all", ExistsSet: "EX", ForallSet: "ALL"}
INDIVIDUAL_Q = (ExistsInd, ForallInd)
SET_Q = (ExistsSet, ForallSet)

TRUE = TrueF()
FALSE = FalseF()


def conj(parts: Iterable[Formula]) -> Formula:
    """Left-nested conjunction; the empty conjunction is ``true``."""
    out = None
    for p in parts:
        out = p if out is None else And(out, p)
    return TRUE if out is None else out


def disj(parts: Iterable[Formula]) -> Formula:
    out = None
    for p in parts:
        out = p if out is None else Or(out, p)
    return FALSE if out is None else out


# ---------------------------------------------------------------------------
# printing

def _needs_parens(f):
    return isinstance(f, tuple(QUANTIFIERS))


def to_text(f: Formula) -> str:
    """Canonical text.  ``parse_formula(to_text(f))`` rebuilds ``f``."""
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Eq):
        return f"{f.left} = {f.right}"
    if isinstance(f, Edge):
        return f"E({f.left},{f.right})"
    if isinstance(f, Label):
        return f"{f.name}({f.term})"
    if isinstance(f, SetMember):
        return f"{f.setvar}({f.term})"
    if isinstance(f, Not):
        inner = to_text(f.body)
        if isinstance(f.body, (Eq,) + tuple(QUANTIFIERS)):
            inner = f"({inner})"
        return "!" + inner
    if type(f) in BINARY:
        left, right = to_text(f.left), to_text(f.right)
        if _needs_parens(f.left):
            left = f"({left})"
        if _needs_parens(f.right):
            right = f"({right})"
        return f"({left} {BINARY[type(f)]} {right})"
    if type(f) in QUANTIFIERS:
        return f"{QUANTIFIERS[type(f)]} {f.var}. {to_text(f.body)}"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<op><->|->|!=|[()!&|=,.])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
""", re.VERBOSE)

_KEYWORDS = {"true", "false", "ex", "all", "EX", "ALL"}


def _tokenize(text):
    pos, line, line_start = 0, 1, 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        if "\n" in chunk:
            line += chunk.count("\n")
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    out.append(("eof", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, text, vocab, free_sets):
        self.toks = _tokenize(text)
        self.i = 0
        self.vocab = vocab
        self.free_sets = free_sets

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise FormulaSyntaxError(msg, tok[2], tok[3])

    def expect(self, value):
        tok = self.next()
        if tok[1] != value or tok[0] == "eof":
            self.fail(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok)
        return tok

    def parse(self):
        f = self.formula(frozenset(), frozenset())
        if self.peek()[0] != "eof":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return f

    # precedence: <-> lowest, then ->, |, &, unary
    def formula(self, ind, sets):
        tok = self.peek()
        if tok[0] == "ident" and tok[1] in ("ex", "all", "EX", "ALL"):
            return self.quantified(ind, sets)
        left = self.implication(ind, sets)
        if self.peek()[1] == "<->":
            self.next()
            return Iff(left, self.formula(ind, sets))
        return left

    def implication(self, ind, sets):
        left = self.disjunction(ind, sets)
        if self.peek()[1] == "->":
            self.next()
            right = self.quantified(ind, sets) if self._at_quantifier() else self.implication(ind, sets)
            return Implies(left, right)
        return left

    def disjunction(self, ind, sets):
        left = self.conjunction(ind, sets)
        while self.peek()[1] == "|":
            self.next()
            right = self.quantified(ind, sets) if self._at_quantifier() else self.conjunction(ind, sets)
            left = Or(left, right)
        return left

    def conjunction(self, ind, sets):
        left = self.unary(ind, sets)
        while self.peek()[1] == "&":
            self.next()
            right = self.quantified(ind, sets) if self._at_quantifier() else self.unary(ind, sets)
            left = And(left, right)
        return left

    def _at_quantifier(self):
        tok = self.peek()
        return tok[0] == "ident" and tok[1] in ("ex", "all", "EX", "ALL")

    def quantified(self, ind, sets):
        kw = self.next()
        var_tok = self.next()
        if var_tok[0] != "ident" or var_tok[1] in _KEYWORDS:
            self.fail("expected a variable name", var_tok)
        var = var_tok[1]
        is_set = kw[1] in ("EX", "ALL")
        if is_set and not var[0].isupper():
            self.fail("set variables must be uppercase-initial", var_tok)
        if not is_set and not var[0].islower():
            self.fail("individual variables must be lowercase", var_tok)
        if var in ind or var in sets:
            raise FormulaError(f"variable {var!r} rebound at line {var_tok[2]}, column {var_tok[3]}")
        if is_set and var in self.vocab:
            raise FormulaError(f"set variable {var!r} clashes with a label")
        self.expect(".")
        if is_set:
            body = self.formula(ind, sets | {var})
            return (ExistsSet if kw[1] == "EX" else ForallSet)(var, body)
        body = self.formula(ind | {var}, sets)
        return (ExistsInd if kw[1] == "ex" else ForallInd)(var, body)

    def unary(self, ind, sets):
        tok = self.peek()
        if tok[1] == "!" and tok[0] == "op":
            self.next()
            if self._at_quantifier():
                return Not(self.quantified(ind, sets))
            return Not(self.unary(ind, sets))
        if tok[1] == "(":
            self.next()
            f = self.formula(ind, sets)
            self.expect(")")
            return f
        if self._at_quantifier():
            return self.quantified(ind, sets)
        if tok[0] != "ident":
            self.fail(f"unexpected {tok[1] or 'end of input'!r}")
        self.next()
        name = tok[1]
        if name == "true":
            return TRUE
        if name == "false":
            return FALSE
        if name == "E" and self.peek()[1] == "(":
            self.expect("(")
            a = self.term()
            self.expect(",")
            b = self.term()
            self.expect(")")
            return Edge(a, b)
        if name[0].isupper():
            self.expect("(")
            t = self.term()
            self.expect(")")
            if name in sets or name in self.free_sets:
                return SetMember(name, t)
            if name.startswith("@") or name not in self.vocab:
                raise FormulaError(f"unknown label {name!r} at line {tok[2]}, column {tok[3]}")
            return Label(name, t)
        # equality atom
        op = self.next()
        if op[1] not in ("=", "!="):
            self.fail("expected '=' or '!=' after a term", op)
        other = self.term()
        atom = Eq(name, other)
        return Not(atom) if op[1] == "!=" else atom

    def term(self):
        tok = self.next()
        if tok[0] != "ident" or not tok[1][0].islower() or tok[1] in _KEYWORDS:
            self.fail("expected an individual variable", tok)
        return tok[1]


def parse_formula(text: str, vocab: Iterable[str] = (), free_sets: Iterable[str] = ()) -> Formula:
    """Parse ``text`` over the label vocabulary ``vocab``.

    Uppercase names that are neither bound set variables nor listed in
    ``free_sets`` must be labels of ``vocab``.
    """
    return _Parser(text, frozenset(vocab), frozenset(free_sets)).parse()


# ---------------------------------------------------------------------------
# structural queries

def quantifier_rank(f: Formula) -> int:
    if type(f) in QUANTIFIERS:
        return 1 + quantifier_rank(f.body)
    if isinstance(f, Not):
        return quantifier_rank(f.body)
    if type(f) in BINARY:
        return max(quantifier_rank(f.left), quantifier_rank(f.right))
    return 0


def set_depth(f: Formula) -> int:
    """Nesting depth of set quantifiers only."""
    if isinstance(f, SET_Q):
        return 1 + set_depth(f.body)
    if isinstance(f, INDIVIDUAL_Q) or isinstance(f, Not):
        return set_depth(f.body)
    if type(f) in BINARY:
        return max(set_depth(f.left), set_depth(f.right))
    return 0


def free_variables(f: Formula) -> tuple[frozenset, frozenset]:
    """Return ``(individual, set)`` free variable names."""
    if isinstance(f, (Eq, Edge)):
        return frozenset((f.left, f.right)), frozenset()
    if isinstance(f, Label):
        return frozenset((f.term,)), frozenset()
    if isinstance(f, SetMember):
        return frozenset((f.term,)), frozenset((f.setvar,))
    if isinstance(f, Not):
        return free_variables(f.body)
    if type(f) in BINARY:
        a, b = free_variables(f.left), free_variables(f.right)
        return a[0] | b[0], a[1] | b[1]
    if isinstance(f, INDIVIDUAL_Q):
        ind, sets = free_variables(f.body)
        return ind - {f.var}, sets
    if isinstance(f, SET_Q):
        ind, sets = free_variables(f.body)
        return ind, sets - {f.var}
    return frozenset(), frozenset()


def labels_used(f: Formula) -> frozenset:
    if isinstance(f, Label):
        return frozenset((f.name,))
    if isinstance(f, Not) or type(f) in QUANTIFIERS:
        return labels_used(f.body)
    if type(f) in BINARY:
        return labels_used(f.left) | labels_used(f.right)
    return frozenset()


def _all_vars(f, acc):
    if isinstance(f, (Eq, Edge)):
        acc.update((f.left, f.right))
    elif isinstance(f, Label):
        acc.add(f.term)
    elif isinstance(f, SetMember):
        acc.update((f.term, f.setvar))
    elif isinstance(f, Not):
        _all_vars(f.body, acc)
    elif type(f) in BINARY:
        _all_vars(f.left, acc)
        _all_vars(f.right, acc)
    elif type(f) in QUANTIFIERS:
        acc.add(f.var)
        _all_vars(f.body, acc)
    return acc


def _fresh(base, taken):
    i = 1
    while f"{base}{i}" in taken:
        i += 1
    return f"{base}{i}"


# ---------------------------------------------------------------------------
# brute-force semantics

def eval_formula(G, f: Formula, assignment: Mapping[str, object] | None = None) -> bool:
    """Truth of ``f`` in labeled graph ``G`` under ``assignment``.

    ``assignment`` maps individual variables to vertex ids and set variables
    to iterables of vertex ids.  Set quantifiers enumerate all vertex subsets
    (in lexicographic bitmask order), so this is exponential in ``|V(G)|``.
    """
    assignment = dict(assignment or {})
    ind_free, set_free = free_variables(f)
    missing = sorted(v for v in ind_free | set_free if v not in assignment)
    if missing:
        raise FormulaError(f"free variables not covered by the assignment: {missing}")
    env = {}
    for var, val in assignment.items():
        if var[0].isupper():
            vals = frozenset(val)
            bad = vals - G.vertex_set
        else:
            vals = val
            bad = set() if val in G.vertex_set else {val}
        if bad:
            raise FormulaError(f"assignment of {var!r} uses unknown vertices {sorted(bad)}")
        env[var] = vals
    verts = G.vertices
    subsets = None
    if set_depth(f):
        subsets = [frozenset(c for i, c in enumerate(verts) if mask >> i & 1)
                   for mask in range(1 << len(verts))]
    return _ev(G, f, env, subsets)


def _ev(G, f, env, subsets):
    t = type(f)
    if t is TrueF:
        return True
    if t is FalseF:
        return False
    if t is Eq:
        return env[f.left] == env[f.right]
    if t is Edge:
        return env[f.right] in G.adj[env[f.left]]
    if t is Label:
        return env[f.term] in G.labels.get(f.name, ())
    if t is SetMember:
        return env[f.term] in env[f.setvar]
    if t is Not:
        return not _ev(G, f.body, env, subsets)
    if t is And:
        return _ev(G, f.left, env, subsets) and _ev(G, f.right, env, subsets)
    if t is Or:
        return _ev(G, f.left, env, subsets) or _ev(G, f.right, env, subsets)
    if t is Implies:
        return (not _ev(G, f.left, env, subsets)) or _ev(G, f.right, env, subsets)
    if t is Iff:
        return _ev(G, f.left, env, subsets) == _ev(G, f.right, env, subsets)
    if t in QUANTIFIERS:
        domain = subsets if t in SET_Q else G.vertices
        want = t in (ExistsInd, ExistsSet)
        saved = env.get(f.var, _MISSING)
        try:
            for val in domain:
                env[f.var] = val
                if _ev(G, f.body, env, subsets) == want:
                    return want
            return not want
        finally:
            if saved is _MISSING:
                env.pop(f.var, None)
            else:
                env[f.var] = saved
    raise TypeError(f"not a formula: {f!r}")


_MISSING = object()


# ---------------------------------------------------------------------------
# transformations

def _map_atoms(f, fn):
    """Rebuild ``f`` with every atom replaced by ``fn(atom)``."""
    t = type(f)
    if t is Not:
        return Not(_map_atoms(f.body, fn))
    if t in BINARY:
        return t(_map_atoms(f.left, fn), _map_atoms(f.right, fn))
    if t in QUANTIFIERS:
        return t(f.var, _map_atoms(f.body, fn))
    return fn(f)


def rename_free(f: Formula, mapping: Mapping[str, str]) -> Formula:
    """Rename free individual variables.  Targets must not be bound in ``f``."""
    bound = _all_vars(f, set()) - free_variables(f)[0] - free_variables(f)[1]
    clash = bound & set(mapping.values())
    if clash:
        raise FormulaError(f"renaming target(s) {sorted(clash)} bound inside the formula")

    def sub(atom):
        if isinstance(atom, Eq):
            return Eq(mapping.get(atom.left, atom.left), mapping.get(atom.right, atom.right))
        if isinstance(atom, Edge):
            return Edge(mapping.get(atom.left, atom.left), mapping.get(atom.right, atom.right))
        if isinstance(atom, Label):
            return Label(atom.name, mapping.get(atom.term, atom.term))
        if isinstance(atom, SetMember):
            return SetMember(atom.setvar, mapping.get(atom.term, atom.term))
        return atom
    return _map_atoms(f, sub)


def substitute_set_by_label(f: Formula, setvar: str, label: str) -> Formula:
    """Replace free occurrences of set variable ``setvar`` by label atoms."""
    t = type(f)
    if t is SetMember and f.setvar == setvar:
        return Label(label, f.term)
    if t is Not:
        return Not(substitute_set_by_label(f.body, setvar, label))
    if t in BINARY:
        return t(substitute_set_by_label(f.left, setvar, label),
                 substitute_set_by_label(f.right, setvar, label))
    if t in QUANTIFIERS:
        if t in SET_Q and f.var == setvar:
            return f
        return t(f.var, substitute_set_by_label(f.body, setvar, label))
    return f


def encode_examples_formula(phi: Formula, pos_label: str = "P", neg_label: str = "N",
                            instance_var: str | None = None) -> Formula:
    """``all x. ((P(x) -> phi) & (N(x) -> !phi))`` for the single instance variable x."""
    used = labels_used(phi)
    for lab in (pos_label, neg_label):
        if lab in used:
            raise FormulaError(f"label {lab!r} already occurs in the formula")
    if instance_var is None:
        cands = sorted(v for v in free_variables(phi)[0] if v.startswith("x"))
        if len(cands) > 1:
            raise FormulaError(f"more than one instance variable: {cands}")
        instance_var = cands[0] if cands else "x1"
    if instance_var in _all_vars(phi, set()) - free_variables(phi)[0]:
        raise FormulaError(f"instance variable {instance_var!r} is bound inside the formula")
    x = instance_var
    return ForallInd(x, And(Implies(Label(pos_label, x), phi),
                            Implies(Label(neg_label, x), Not(phi))))


def singletonize(phi: Formula, params: Iterable[str], set_names: Iterable[str] | None = None) -> Formula:
    """Trade free individual variables ``params`` for free set variables.

    The result holds at ``({v1},...,{vl})`` iff ``phi`` holds at ``(v1,...,vl)``
    and is false whenever an argument is not a singleton.  For ``l >= 1`` the
    quantifier rank is ``qr(phi) + l + 2``.
    """
    params = list(params)
    if not params:
        return phi
    taken = _all_vars(phi, set())
    if set_names is None:
        set_names = []
        for _ in params:
            name = _fresh("X", taken)
            taken.add(name)
            set_names.append(name)
    set_names = list(set_names)
    a, b = _fresh("s", taken), None
    taken.add(a)
    b = _fresh("s", taken)
    pins = [SetMember(X, y) for X, y in zip(set_names, params)]
    at_most_one = conj(Implies(And(SetMember(X, a), SetMember(X, b)), Eq(a, b)) for X in set_names)
    # phi sits under the uniqueness quantifiers so that the rank adds up exactly
    core = ForallInd(a, ForallInd(b, And(at_most_one, phi)))
    body = And(conj(pins), core)
    for y in reversed(params):
        body = ExistsInd(y, body)
    return body


def pin_vertex_formula(psi: Formula, var: str, mark_label: str, nbr_label: str) -> Formula:
    """Turn ``psi(var)`` into a sentence about a graph whose pinned vertex
    carries ``mark_label`` and whose neighbours carry ``nbr_label``.

    ``y = var`` becomes ``mark(y)``, ``E(var,y)`` becomes ``nbr(y)``.  Unary
    atoms on ``var`` (labels, set membership) become
    ``ex z. (mark(z) & P(z))``; ``E(var,var)`` becomes ``false``.
    """
    fresh = _fresh("p", _all_vars(psi, set()) | {var})

    def via_mark(atom_of_z):
        return ExistsInd(fresh, And(Label(mark_label, fresh), atom_of_z))

    def sub(atom):
        if isinstance(atom, Eq):
            if atom.left == var and atom.right == var:
                raise FormulaError(f"atom {var} = {var} not supported")
            if atom.left == var:
                return Label(mark_label, atom.right)
            if atom.right == var:
                return Label(mark_label, atom.left)
        elif isinstance(atom, Edge):
            if atom.left == var and atom.right == var:
                return FALSE
            if atom.left == var:
                return Label(nbr_label, atom.right)
            if atom.right == var:
                return Label(nbr_label, atom.left)
        elif isinstance(atom, Label) and atom.term == var:
            return via_mark(Label(atom.name, fresh))
        elif isinstance(atom, SetMember) and atom.term == var:
            return via_mark(SetMember(atom.setvar, fresh))
        return atom
    return _map_atoms(psi, sub)


def deg_formula(k: int, mode: str = ">=", var: str = "x") -> Formula:
    """``deg>=k(var)`` (rank k) or ``deg=k(var)`` (rank k+1)."""
    if k < 1:
        raise FormulaError("degree formulas need k >= 1")
    if mode in (">=", "ge"):
        ys = [f"d{i}" for i in range(1, k + 1)]
        body = conj([Not(Eq(a, b)) for a, b in itertools.combinations(ys, 2)]
                    + [Edge(var, y) for y in ys])
        for y in reversed(ys):
            body = ExistsInd(y, body)
        return body
    if mode in ("=", "eq"):
        return And(deg_formula(k, ">=", var), Not(deg_formula(k + 1, ">=", var)))
    raise FormulaError(f"unknown degree mode {mode!r}")


# ---------------------------------------------------------------------------
# formula banks

def _atoms(ind, sets, vocab):
    out = []
    for a, b in itertools.combinations(ind, 2):
        out.append(Edge(a, b))
    for a, b in itertools.combinations(ind, 2):
        out.append(Eq(a, b))
    for v in ind:
        for lab in vocab:
            out.append(Label(lab, v))
    for X in sets:
        for v in ind:
            out.append(SetMember(X, v))
    return out


def _level(ind, sets, vocab, q, allow_sets, fresh_ids):
    """Formulas with free variables among ``ind``/``sets`` and rank <= q, in bank order."""
    atoms = _atoms(ind, sets, vocab)
    yield TRUE
    yield FALSE
    yield from atoms
    for a in atoms:
        yield Not(a)
    if len(atoms) >= 2:
        a, b = atoms[0], atoms[1]
        for op in (And, Or, Implies, Iff):
            yield op(a, b)
    if q == 0:
        for a, b in itertools.combinations(atoms, 2):
            yield And(a, b)
            yield Or(a, b)
            yield And(a, Not(b))
            yield Implies(a, b)
        return
    z = f"z{fresh_ids[0]}"
    Z = f"Z{fresh_ids[1]}"
    inner_ind = list(ind) + [z]
    new_atoms = [a for a in _atoms(inner_ind, sets, vocab) if z in _atom_vars(a)]
    # shallow quantified formulas first so small budgets see each kind
    for a in new_atoms:
        yield ExistsInd(z, a)
        yield ForallInd(z, Not(a))
    for a, b in itertools.combinations(new_atoms, 2):
        yield ExistsInd(z, And(a, b))
        yield ForallInd(z, Implies(a, b))
    if allow_sets:
        for v in ind:
            yield ExistsSet(Z, SetMember(Z, v))
            yield ForallSet(Z, SetMember(Z, v))
        if len(ind) >= 2:
            a, b = ind[0], ind[1]
            yield ExistsSet(Z, And(SetMember(Z, a), Not(SetMember(Z, b))))
            yield ForallSet(Z, Implies(SetMember(Z, a), SetMember(Z, b)))
    ids = (fresh_ids[0] + 1, fresh_ids[1] + 1)
    deeper_ind = _level(inner_ind, sets, vocab, q - 1, allow_sets, ids)
    deeper_set = _level(list(ind), list(sets) + [Z], vocab, q - 1, allow_sets, ids) if allow_sets else iter(())
    for body in _roundrobin(deeper_ind, deeper_set):
        ind_free, set_free = free_variables(body)
        if z in ind_free:
            yield ExistsInd(z, body)
            yield ForallInd(z, body)
        elif Z in set_free:
            yield ExistsSet(Z, body)
            yield ForallSet(Z, body)
    # plain boolean combinations of lower-rank material
    for a, b in itertools.combinations(atoms, 2):
        yield And(a, b)
        yield Or(a, b)


def _atom_vars(a):
    return free_variables(a)[0]


def _roundrobin(*its):
    its = list(its)
    while its:
        alive = []
        for it in its:
            try:
                yield next(it)
                alive.append(it)
            except StopIteration:
                pass
        its = alive


def formula_bank(vocab: Iterable[str], q: int, k: int, ell: int, budget: int,
                 set_quantifiers: bool = True, max_set_depth: int | None = None) -> list[Formula]:
    """Deterministic list of distinct formulas of rank <= q with free
    individual variables among x1..xk, y1..yl, truncated at ``budget``.

    ``max_set_depth`` filters out formulas with deeper set-quantifier nesting.
    """
    if budget <= 0:
        return []
    vocab = sorted(vocab)
    ind = [f"x{i}" for i in range(1, k + 1)] + [f"y{i}" for i in range(1, ell + 1)]
    seen = set()
    out = []
    for f in _level(ind, [], vocab, q, set_quantifiers, (1, 1)):
        if max_set_depth is not None and set_depth(f) > max_set_depth:
            continue
        key = to_text(f)
        if key in seen:
            continue
        seen.add(key)
        out.append(f)
        if len(out) >= budget:
            break
    return out


def iter_subformulas(f: Formula) -> Iterator[Formula]:
    yield f
    if isinstance(f, Not) or type(f) in QUANTIFIERS:
        yield from iter_subformulas(f.body)
    elif type(f) in BINARY:
        yield from iter_subformulas(f.left)
        yield from iter_subformulas(f.right)
