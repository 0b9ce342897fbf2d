import itertools
import os
import random

import pytest

from msolearn.graphs import LabeledGraph, parse_cwx
from msolearn.logic import parse_formula

DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "examples", "data")

# bipartition formula of the running example: x1 on the same side as y1
EX11_PHI = ("EX Z. (((all z1. all z2. (E(z1,z2) -> !(Z(z1) <-> Z(z2)))) & Z(x1)) & Z(y1))")
EX11_S = [(("v1",), "+"), (("v3",), "+"), (("v4",), "-"), (("v5",), "-")]


def data_path(name):
    return os.path.join(DATA, name)


@pytest.fixture(scope="session")
def fig1_expr():
    with open(data_path("fig1.cwx")) as fh:
        return parse_cwx(fh.read())


@pytest.fixture(scope="session")
def ex11_phi():
    return parse_formula(EX11_PHI)


def random_graph(rng, n, labels=("A",), p=0.4, lp=0.4, prefix="u"):
    vs = [f"{prefix}{i}" for i in range(n)]
    edges = [(a, b) for a, b in itertools.combinations(vs, 2) if rng.random() < p]
    labs = {name: {v for v in vs if rng.random() < lp} for name in labels}
    return LabeledGraph(vs, edges, labs)


@pytest.fixture
def rng():
    return random.Random(12345)
