"""Learning MSO-definable classifiers on graphs of bounded clique-width."""

from .graphs import (Base, Delta, Eta, ExpressionError, LabeledGraph, OrderedUnion, Rho, Union,
                     check_wellformed, eval_cexpr, expr_size, gen_cograph, gen_tree, greedy_expression,
                     parse_cwx, to_cwx, trivial_expression)
from .learners import (Hypothesis, LearningError, classify, erm, err_empirical, err_true, learn_1d,
                       learn_hd_consistent, pac_learn, sample_complexity, synthesize_hypothesis)
from .logic import FormulaError, FormulaSyntaxError, eval_formula, parse_formula, quantifier_rank, to_text
from .realizable import ResourceCapExceeded, phi_consistent, realizable_tuples
from .reductions import Cnf2, gen_wsat, mc_via_learning, two_copy_gadget, wsat_brute
from .typeengine import compute_type, type_digest, type_satisfies

__version__ = "0.1.0"
