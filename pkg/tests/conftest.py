"""Shared fixtures: the default five-agent graph, its certificate, random
spanning-tree graph generation, and expensive session-scoped scenario runs
reused by several acceptance criteria."""

import numpy as np
import pytest

from consensus_net import runner
from consensus_net.graph import DirectedGraph, build_laplacian
from consensus_net.kernels import warm_up
from consensus_net.scenario import builtin_scenario
from consensus_net.spectral import solve_P


@pytest.fixture(scope="session")
def default_graph():
    return builtin_scenario("paper-matched").graph


@pytest.fixture(scope="session")
def default_lap(default_graph):
    return build_laplacian(default_graph)


@pytest.fixture(scope="session")
def default_cert(default_lap):
    return solve_P(default_lap)


@pytest.fixture(scope="session")
def warm_kernels():
    """JIT-compile the kernels so timed tests measure only the run."""
    warm_up()


def random_tree_graph(rng, n, extra_edges=0, w_lo=0.5, w_hi=2.0):
    """Random weighted digraph containing a spanning tree rooted at agent 0."""
    w = np.zeros((n, n))
    for i in range(1, n):
        parent = int(rng.integers(0, i))
        w[i, parent] = rng.uniform(w_lo, w_hi)
    for _ in range(extra_edges):
        i = int(rng.integers(0, n))
        j = int(rng.integers(0, n))
        if i != j:
            w[i, j] = rng.uniform(w_lo, w_hi)
    return DirectedGraph(w)


@pytest.fixture(scope="session")
def paper_matched_run(tmp_path_factory, warm_kernels):
    """The matched benchmark scenario, run twice for the determinism check."""
    sc = builtin_scenario("paper-matched")
    out1 = tmp_path_factory.mktemp("paper_matched_1")
    out2 = tmp_path_factory.mktemp("paper_matched_2")
    arts1 = runner.run(sc, out1)
    arts2 = runner.run(sc, out2)
    return {"scenario": sc, "arts": arts1, "arts_repeat": arts2}


@pytest.fixture(scope="session")
def paper_unmatched_run(tmp_path_factory, warm_kernels):
    """The unmatched benchmark scenario at its default 40 s horizon."""
    sc = builtin_scenario("paper-unmatched")
    out = tmp_path_factory.mktemp("paper_unmatched")
    arts = runner.run(sc, out)
    return {"scenario": sc, "arts": arts}
