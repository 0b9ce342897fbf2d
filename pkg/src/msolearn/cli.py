"""Command line front end.

Every command prints a plain-text report.  Lines above the ``# timings``
marker depend only on the inputs and the seed; wall-clock numbers go below
it.  Exit status: 0 success, 1 negative answer, 2 usage or input error,
3 resource cap hit.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import random
import sys
import time
from fractions import Fraction

from . import graphs, learners, logic, realizable, reductions, typeengine
from .graphs import ExpressionError
from .learners import LearningError
from .logic import FormulaError
from .realizable import ResourceCapExceeded

EXIT_OK, EXIT_NEG, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3

# instances at most this large get a brute-force cross-check under --verify
VERIFY_MAX_VERTICES = 10
# about 3 GB of interned types at ~2 KB each
DEFAULT_TYPE_CAP = 1_500_000


class UsageError(Exception):
    pass


class Report:
    def __init__(self, command):
        self.lines = [f"command: {command}"]
        self.timings = []
        self._t = time.perf_counter()

    def add(self, key, value):
        self.lines.append(f"{key}: {value}")

    def phase(self, name):
        now = time.perf_counter()
        self.timings.append((name, now - self._t))
        self._t = now

    def render(self):
        out = list(self.lines)
        out.append(f"interned_types: {len(typeengine.STORE)}")
        out.append("# timings (wall clock, not reproducible)")
        out.extend(f"  {name}: {sec:.3f}s" for name, sec in self.timings)
        return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# input helpers

def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def load_input(args, report):
    """Expression from ``--expr`` or ``--graph``; returns (expr, graph or None)."""
    if bool(args.expr) == bool(args.graph):
        raise UsageError("give exactly one of --expr or --graph")
    if args.expr:
        expr = graphs.parse_cwx(_read(args.expr))
        diags = graphs.check_wellformed(expr)
        if diags:
            raise UsageError("ill-formed expression: " + "; ".join(diags[:5]))
        report.add("input", f"expression {os.path.basename(args.expr)} ({graphs.expr_size(expr)} nodes)")
        return expr, None
    G = graphs.graph_from_json(json.loads(_read(args.graph)))
    builder = getattr(args, "builder", "trivial")
    if builder == "greedy":
        expr = graphs.greedy_expression(G)
        what = "greedy linear expression"
    else:
        expr = graphs.trivial_expression(G)
        what = "trivial one-label-per-vertex expression"
    report.add("input", f"graph {os.path.basename(args.graph)} ({len(G)} vertices)")
    report.add("flag", f"no expression given; built a {what} "
                       f"with {len(graphs.expr_labels_used(expr))} labels (no width guarantee)")
    return expr, G


def _graph_of(expr, G):
    return G if G is not None else graphs.eval_cexpr(expr, check=False)


def _vocab(expr):
    return sorted(l for l in graphs.expr_vocab(expr) if not l.startswith("@"))


def load_formula(args, vocab, free_sets=()):
    if args.formula and args.formula_file:
        raise UsageError("give only one of --formula or --formula-file")
    text = args.formula or (_read(args.formula_file) if args.formula_file else None)
    if text is None:
        return None
    return logic.parse_formula(text, vocab, free_sets)


def load_bank(path, vocab):
    bank = []
    for line in _read(path).splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            bank.append(logic.parse_formula(line, vocab))
    return bank


def _kw(args):
    return {"jobs": args.jobs, "cap": args.cap}


def _kappa(expr, q, k, ell):
    return len(_vocab(expr)) + q + k + ell


def _write_hypothesis(h, path, report):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(h.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        report.add("hypothesis_file", path)


def _emit_table(args, expr, examples, q, ell, b, report):
    if args.emit_table:
        table = realizable.realizable_tuples(expr, examples, q, ell, b, **_kw(args))
        report.add("table_rows", len(table.rows))
        report.lines.append(realizable.emit_table(table).rstrip("\n"))


def _common_params(args, k=None):
    if args.q < 0 or args.ell < 0:
        raise UsageError("--q and --ell must be >= 0")
    if args.set_budget is not None and args.set_budget < 0:
        raise UsageError("--set-budget must be >= 0")
    b = args.q if args.set_budget is None else min(args.set_budget, args.q)
    return b


# ---------------------------------------------------------------------------
# commands

def cmd_mc(args, report):
    expr, G = load_input(args, report)
    G = _graph_of(expr, G)
    phi = load_formula(args, _vocab(expr))
    if phi is None:
        raise UsageError("mc needs --formula or --formula-file")
    report.add("formula", logic.to_text(phi))
    report.add("qr", logic.quantifier_rank(phi))
    report.phase("parse")
    if args.method == "eval":
        verdict = logic.eval_formula(G, phi)
    else:
        stats = reductions.MCStats()
        verdict = reductions.mc_via_learning(G, phi, cap=args.cap, stats=stats)
        report.add("recursion_nodes", stats.nodes)
        report.add("oracle_queries", stats.queries)
        report.add("max_candidate_family", stats.max_family)
    report.phase("decide")
    report.add("verdict", "true" if verdict else "false")
    if args.verify and not verdict and len(G) <= VERIFY_MAX_VERTICES:
        report.add("verify_bruteforce", "false" if not logic.eval_formula(G, phi) else "MISMATCH")
    return EXIT_OK if verdict else EXIT_NEG


def _training(args, k=None):
    if not args.train:
        raise UsageError("--train is required")
    return learners.parse_training(_read(args.train), k)


def cmd_learn1d(args, report):
    expr, G = load_input(args, report)
    S = _training(args, 1)
    b = _common_params(args)
    report.add("params", f"q={args.q} k=1 ell={args.ell} setBudget={b} kappa={_kappa(expr, args.q, 1, args.ell)}")
    report.add("examples", len(S))
    bank = load_bank(args.bank, _vocab(expr)) if args.bank else None
    report.phase("parse")
    h = learners.learn_1d(expr, S, args.q, args.ell, b, bank=bank, **_kw(args))
    report.phase("learn")
    _emit_table(args, expr, [t for t, _ in S], args.q, args.ell, b, report)
    if h is None:
        report.add("verdict", "NoConsistent")
        if args.verify and len(_graph_of(expr, G)) <= VERIFY_MAX_VERTICES and bank is None:
            report.add("verify_bruteforce", _brute_synth(expr, G, S, args.q, 1, args.ell, b))
        return EXIT_NEG
    _report_hypothesis(h, expr, S, report)
    _write_hypothesis(h, args.out, report)
    return EXIT_OK


def _brute_synth(expr, G, S, q, k, ell, b):
    """Exhaustive search over parameter tuples for a separating type row."""
    G = _graph_of(expr, G)
    uniq, labels = learners._dedupe_labeled(S)
    if labels is None:
        return "none (contradictory examples)"
    rows = realizable.brute_realizable(G, uniq, q, ell, b)
    ok = any(learners._separates(row, labels) for row in rows)
    return "MISMATCH" if ok else "none"


def _report_hypothesis(h, expr, S, report):
    report.add("verdict", "Hypothesis")
    report.add("witness", " ".join(h.params) if h.params else "()")
    report.add("positive_types", len(h.positive))
    if h.formula is not None:
        report.add("formula", logic.to_text(h.formula))
    if S:
        preds = learners.classify_many(h, expr, [t for t, _ in S])
        report.add("classifications", " ".join(f"{' '.join(t)}:{p}" for (t, _), p in zip(S, preds)))
        report.add("training_error", learners.err_empirical(h, expr, S))


def cmd_learnhd(args, report):
    expr, G = load_input(args, report)
    S = _training(args)
    k = len(S[0][0]) if S else (args.k or 1)
    b = _common_params(args)
    report.add("params", f"q={args.q} k={k} ell={args.ell} setBudget={b} kappa={_kappa(expr, args.q, k, args.ell)}")
    report.add("examples", len(S))
    if learners._dedupe_labeled(S)[1] is None:
        report.add("verdict", "NoConsistent")
        report.add("reason", "an instance occurs with both labels")
        return EXIT_NEG
    phi = load_formula(args, _vocab(expr))
    report.phase("parse")
    if phi is None:
        h = learners.synthesize_hypothesis(expr, S, args.q, k, args.ell, b, method=args.method, **_kw(args))
        report.phase("learn")
        _emit_table(args, expr, [t for t, _ in S], args.q, args.ell, b, report)
        if h is None:
            report.add("verdict", "NoConsistent")
            if args.verify and len(_graph_of(expr, G)) <= VERIFY_MAX_VERTICES:
                report.add("verify_bruteforce", _brute_synth(expr, G, S, args.q, k, args.ell, b))
            return EXIT_NEG
        _report_hypothesis(h, expr, S, report)
        _write_hypothesis(h, args.out, report)
        return EXIT_OK
    report.add("formula", logic.to_text(phi))
    w = learners.learn_hd_consistent(expr, S, args.q, k, args.ell, b, phi, method=args.method, **_kw(args))
    report.phase("learn")
    _emit_table(args, expr, [t for t, _ in S], args.q, args.ell, b, report)
    if w is None:
        report.add("verdict", "NoWitness")
        Gv = _graph_of(expr, G)
        if args.verify and len(Gv) <= VERIFY_MAX_VERTICES:
            found = _brute_witness(Gv, S, phi, k, args.ell)
            report.add("verify_bruteforce", "none" if found is None else "MISMATCH")
        return EXIT_NEG
    report.add("verdict", "Witness")
    report.add("witness", " ".join(w) if w else "()")
    return EXIT_OK


def _brute_witness(G, S, phi, k, ell):
    names = [f"x{i + 1}" for i in range(k)] + [f"y{j + 1}" for j in range(ell)]
    for w in itertools.product(G.vertices, repeat=ell):
        if all(logic.eval_formula(G, phi, dict(zip(names, tuple(t) + w))) == (lab == "+") for t, lab in S):
            return w
    return None


def cmd_synth(args, report):
    expr, G = load_input(args, report)
    S = _training(args)
    k = len(S[0][0]) if S else (args.k or 1)
    b = _common_params(args)
    report.add("params", f"q={args.q} k={k} ell={args.ell} setBudget={b} kappa={_kappa(expr, args.q, k, args.ell)}")
    report.add("examples", len(S))
    report.phase("parse")
    h = learners.synthesize_hypothesis(expr, S, args.q, k, args.ell, b, method=args.method,
                                       export_formula=args.export_formula, **_kw(args))
    report.phase("learn")
    _emit_table(args, expr, [t for t, _ in S], args.q, args.ell, b, report)
    if h is None:
        report.add("verdict", "NoConsistent")
        if args.verify and len(_graph_of(expr, G)) <= VERIFY_MAX_VERTICES:
            report.add("verify_bruteforce", _brute_synth(expr, G, S, args.q, k, args.ell, b))
        return EXIT_NEG
    _report_hypothesis(h, expr, S, report)
    _write_hypothesis(h, args.out, report)
    return EXIT_OK


def cmd_pac(args, report):
    if args.seed is None:
        raise UsageError("pac needs --seed")
    expr, G = load_input(args, report)
    if not args.dist:
        raise UsageError("--dist is required")
    D = learners.parse_distribution(json.loads(_read(args.dist)))
    k = len(D[0][0])
    b = _common_params(args)
    eps, delta = Fraction(args.eps), Fraction(args.delta)
    report.add("params", f"q={args.q} k={k} ell={args.ell} setBudget={b} eps={eps} delta={delta} "
                         f"C={args.C} seed={args.seed} kappa={_kappa(expr, args.q, k, args.ell)}")
    report.phase("parse")
    h, sample = learners.pac_learn(expr, D, args.q, k, args.ell, b, eps, delta, args.seed,
                                   m_override=args.m_override, C=Fraction(args.C), d=args.d,
                                   mode=args.mode, **_kw(args))
    report.phase("learn")
    report.add("sample_size", len(sample))
    report.add("verdict", "Hypothesis")
    report.add("witness", " ".join(h.params) if h.params else "()")
    report.add("training_error", learners.err_empirical(h, expr, sample))
    report.add("true_error", learners.err_true(h, expr, D))
    _write_hypothesis(h, args.out, report)
    return EXIT_OK


def cmd_gen(args, report):
    fam = args.family
    if fam in ("cograph", "tree"):
        if args.n is None or args.seed is None:
            raise UsageError(f"gen {fam} needs --n and --seed")
        expr = (graphs.gen_cograph if fam == "cograph" else graphs.gen_tree)(args.n, args.seed)
        text = graphs.to_cwx(expr)
        report.add("expr_size", graphs.expr_size(expr))
        report.add("labels", len(graphs.expr_labels_used(expr)))
        report.add("digest", graphs.expr_digest(expr))
        _emit(args.out, text, report)
        return EXIT_OK
    if fam == "wsat":
        if not args.cnf or args.ell is None:
            raise UsageError("gen wsat needs --cnf and --ell")
        cnf = reductions.parse_dimacs(_read(args.cnf))
        expr, examples, labels, phi, ell = reductions.gen_wsat(cnf, args.ell)
        report.add("variables", cnf.n)
        report.add("clauses", len(cnf.clauses))
        report.add("formula", logic.to_text(phi))
        report.add("qr", logic.quantifier_rank(phi))
        prefix = args.out or "wsat"
        with open(prefix + ".cwx", "w", encoding="utf-8") as fh:
            fh.write(graphs.to_cwx(expr))
        with open(prefix + ".train", "w", encoding="utf-8") as fh:
            fh.write(learners.format_training(list(zip(examples, labels))))
        with open(prefix + ".formula", "w", encoding="utf-8") as fh:
            fh.write(logic.to_text(phi) + "\n")
        report.add("written", f"{prefix}.cwx {prefix}.train {prefix}.formula")
        if args.verify:
            report.add("wsat_brute", "true" if reductions.wsat_brute(cnf, ell) else "false")
        return EXIT_OK
    raise UsageError(f"unknown family {fam!r}")


def _emit(path, text, report):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        report.add("written", path)
    else:
        report.lines.append(text.rstrip("\n"))


def cmd_types(args, report):
    expr, G = load_input(args, report)
    G = _graph_of(expr, G)
    tup = tuple(args.tuple or ())
    b = args.q if args.set_budget is None else min(args.set_budget, args.q)
    report.phase("parse")
    if args.via == "dp":
        table = realizable.realizable_tuples(expr, [tup], args.q, 0, b, **_kw(args))
        (row,) = table.rows
        t = row[0]
    else:
        t = typeengine.compute_type(G, tup, (), args.q, b)
    report.phase("types")
    report.add("tuple", " ".join(tup) if tup else "()")
    report.add("rank", f"{t.rank} setBudget={t.budget}")
    report.add("digest", typeengine.type_digest(t))
    if args.dump:
        report.lines.append(typeengine.dump_types().rstrip("\n"))
    return EXIT_OK


def cmd_vc(args, report):
    expr, G = load_input(args, report)
    G = _graph_of(expr, G)
    phi = load_formula(args, _vocab(expr))
    if phi is None:
        raise UsageError("vc needs --formula or --formula-file")
    report.add("formula", logic.to_text(phi))
    report.phase("parse")
    d = realizable.vc_dimension(G, phi, args.k, args.ell, maxd=args.maxd)
    report.phase("vc")
    report.add("vc_dimension", d)
    report.add("sauer_shelah_bound", f"n={len(G)} -> {realizable.sauer_shelah_bound(len(G), d)}")
    return EXIT_OK


def cmd_bench(args, report):
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    if not sizes:
        raise UsageError("--sizes is empty")
    seed = 0 if args.seed is None else args.seed
    report.add("setup", f"family={args.family} q={args.q} setBudget={args.set_budget} "
                        f"k={args.k} ell={args.ell} m={args.m} seed={seed}")
    report.add("columns", "n expr_size visits rows max_node_rows interned_types")
    rows = []
    for n in sizes:
        typeengine.reset_types()
        gen = graphs.gen_cograph if args.family == "cograph" else graphs.gen_tree
        expr = gen(n, seed)
        verts = sorted(graphs.base_vertices(expr))
        rng = random.Random(seed)
        examples = [tuple(rng.choice(verts) for _ in range(args.k)) for _ in range(args.m)]
        t0 = time.perf_counter()
        table = realizable.realizable_tuples(expr, examples, args.q, args.ell, args.set_budget, **_kw(args))
        sec = time.perf_counter() - t0
        report.add("row", f"{n} {graphs.expr_size(expr)} {table.visits} {len(table.rows)} "
                          f"{table.max_count} {len(typeengine.STORE)}")
        rows.append((n, sec))
    for n, sec in rows:
        report.timings.append((f"n={n}", sec))
    return EXIT_OK


COMMANDS = {
    "mc": cmd_mc, "learn1d": cmd_learn1d, "learnhd": cmd_learnhd, "synth": cmd_synth, "pac": cmd_pac,
    "gen": cmd_gen, "types": cmd_types, "vc": cmd_vc, "bench": cmd_bench,
}


# ---------------------------------------------------------------------------
# argument parsing

def _input_args(p):
    p.add_argument("--expr", help="clique-width expression (.cwx)")
    p.add_argument("--graph", help="labeled graph (JSON); an expression is built from it")
    p.add_argument("--builder", choices=("trivial", "greedy"), default="trivial",
                   help="how to build an expression from --graph")


def _formula_args(p):
    p.add_argument("--formula", help="formula text")
    p.add_argument("--formula-file", help="file holding the formula")


def _learn_args(p, k=True):
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--ell", type=int, default=0)
    if k:
        p.add_argument("--k", type=int, default=None, help="arity when the training file is empty")
    p.add_argument("--set-budget", type=int, default=None, help="set-quantifier budget (default q)")


def _run_args(p):
    p.add_argument("--jobs", type=int, default=1, help="threads for the DP")
    p.add_argument("--cap", type=int, default=None, help="row/node cap (default $MSOLEARN_CAP_NODES)")
    p.add_argument("--verify", action="store_true", help="brute-force cross-check of negative answers")
    p.add_argument("--type-cap", type=int, default=DEFAULT_TYPE_CAP,
                   help=f"max interned types before giving up (default {DEFAULT_TYPE_CAP})")


def build_parser():
    ap = argparse.ArgumentParser(prog="msolearn", description="Learn MSO-definable classifiers on "
                                 "labeled graphs given by clique-width expressions.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mc", help="model checking (directly or through the learner)")
    _input_args(p)
    _formula_args(p)
    p.add_argument("--method", choices=("learning", "eval"), default="learning")
    _run_args(p)

    p = sub.add_parser("learn1d", help="consistent learning of unary classifiers")
    _input_args(p)
    p.add_argument("--train", required=True)
    _learn_args(p, k=False)
    p.add_argument("--bank", help="file with one candidate formula per line")
    p.add_argument("--out", default="hypothesis.json")
    p.add_argument("--emit-table", action="store_true")
    _run_args(p)

    for name, helptext in (("learnhd", "consistent learning for k-tuples (optionally for a fixed formula)"),
                           ("synth", "type-based hypothesis synthesis")):
        p = sub.add_parser(name, help=helptext)
        _input_args(p)
        p.add_argument("--train", required=True)
        _learn_args(p)
        if name == "learnhd":
            _formula_args(p)
        else:
            p.add_argument("--export-formula", action="store_true")
        p.add_argument("--method", choices=("table", "pinning"), default="table")
        p.add_argument("--out", default="hypothesis.json")
        p.add_argument("--emit-table", action="store_true")
        _run_args(p)

    p = sub.add_parser("pac", help="agnostic PAC learning by ERM")
    _input_args(p)
    p.add_argument("--dist", required=True)
    _learn_args(p, k=False)
    p.add_argument("--eps", default="0.1")
    p.add_argument("--delta", default="0.1")
    p.add_argument("--C", default="8")
    p.add_argument("--d", type=int, default=None, help="VC dimension to plug into the sample size")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--m-override", type=int, default=None)
    p.add_argument("--mode", choices=("types", "subsequence"), default="types")
    p.add_argument("--out", default=None)
    _run_args(p)

    p = sub.add_parser("gen", help="instance generators")
    p.add_argument("--family", choices=("cograph", "tree", "wsat"), required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--cnf", help="DIMACS 2-CNF (wsat)")
    p.add_argument("--ell", type=int, help="weight (wsat)")
    p.add_argument("--out", help="output file (prefix for wsat)")
    p.add_argument("--verify", action="store_true")

    p = sub.add_parser("types", help="compute a rank-q type")
    _input_args(p)
    p.add_argument("--tuple", nargs="*", default=[])
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--set-budget", type=int, default=None)
    p.add_argument("--via", choices=("dp", "direct"), default="dp")
    p.add_argument("--dump", action="store_true", help="dump every interned type")
    _run_args(p)

    p = sub.add_parser("vc", help="VC dimension of a formula's hypothesis class")
    _input_args(p)
    _formula_args(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--maxd", type=int, default=4)

    p = sub.add_parser("bench", help="DP scaling benchmark")
    p.add_argument("--family", choices=("cograph", "tree"), default="cograph")
    p.add_argument("--sizes", default="50,100,200")
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--set-budget", type=int, default=0)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--seed", type=int, default=None)
    _run_args(p)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "cap", None) is None and os.environ.get("MSOLEARN_CAP_NODES"):
        try:
            args.cap = int(os.environ["MSOLEARN_CAP_NODES"])
        except ValueError:
            print("error: MSOLEARN_CAP_NODES must be an integer", file=sys.stderr)
            return EXIT_USAGE
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    typeengine.STORE.limit = getattr(args, "type_cap", None)
    report = Report(args.command)
    try:
        code = COMMANDS[args.command](args, report)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ExpressionError, FormulaError, LearningError, reductions.CnfError,
            json.JSONDecodeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceCapExceeded as e:
        report.add("verdict", "ResourceCapExceeded")
        report.add("reason", str(e))
        sys.stdout.write(report.render())
        return EXIT_CAP
    report.phase("report")
    sys.stdout.write(report.render())
    return code


if __name__ == "__main__":
    sys.exit(main())
