"""Shared fixtures: a small fibred function algebra and its slot modules."""
import numpy as np
import pytest

from cqglab.fdca import (
    BlockAlgebra,
    FaithfulState,
    gns_realization,
    opposite_realization,
)
from cqglab.modstruct import AlgMap, QuantumGraph
from cqglab.rtp import make_module


def two_point_graph(weights=(1 / 3, 2 / 3)) -> tuple[QuantumGraph, AlgMap]:
    """Function algebra of the full relation on two points, with coinversion.

    Arrows are ordered (0,0), (0,1), (1,0), (1,1), first component the
    target; fibre averages put weight 1/2 on each arrow of a fibre.
    """
    base = BlockAlgebra((1, 1))
    total = BlockAlgebra((1, 1, 1, 1))
    mu = FaithfulState(base, np.diag(weights).astype(complex))

    tgt = [0, 0, 1, 1]
    src = [0, 1, 0, 1]
    r = AlgMap.from_function(
        lambda b: np.diag([b[tgt[g], tgt[g]] for g in range(4)]), base, total)
    s = AlgMap.from_function(
        lambda y: np.diag([y[src[g], src[g]] for g in range(4)]), base, total)
    phi = AlgMap.from_function(
        lambda a: np.diag([(a[0, 0] + a[1, 1]) / 2, (a[2, 2] + a[3, 3]) / 2]),
        total, base)
    psi = AlgMap.from_function(
        lambda a: np.diag([(a[0, 0] + a[2, 2]) / 2, (a[1, 1] + a[3, 3]) / 2]),
        total, base)
    w = [weights[tgt[g]] / 2 for g in range(4)]
    w_back = [weights[src[g]] / 2 for g in range(4)]
    delta = np.diag([w_back[g] / w[g] for g in range(4)]).astype(complex)
    graph = QuantumGraph(mu, total, r, phi, s, psi, delta)

    inv = [0, 2, 1, 3]
    coinv = AlgMap.from_function(
        lambda a: np.diag([a[inv[g], inv[g]] for g in range(4)]), total, total)
    return graph, coinv


@pytest.fixture(scope="session")
def graph_and_coinv():
    return two_point_graph()


@pytest.fixture(scope="session")
def slot_modules(graph_and_coinv):
    """The four canonical modules of the two-point graph, keyed by kind."""
    graph, _ = graph_and_coinv
    mu_left = gns_realization(graph.base_state)
    mu_right = opposite_realization(graph.base_state)
    return {
        "alpha_hat": make_module(mu_left, graph.slot_alpha_hat()),
        "beta": make_module(mu_right, graph.slot_beta()),
        "beta_hat": make_module(mu_right, graph.slot_beta_hat()),
        "alpha": make_module(mu_left, graph.slot_alpha()),
    }
