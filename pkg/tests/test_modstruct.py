"""Module structures, quantum graphs, coinvolutions and range expectations.

The main fixture is the function algebra of the full equivalence relation on
two points with non-uniform base weights (1/3, 2/3).  All expected matrices
below were computed by hand from the fibre averages, so the tests double as
an oracle for the induced states, the canonical isometries and the modular
element.
"""
import numpy as np
import pytest

from cqglab.fdca import BlockAlgebra, FaithfulState
from cqglab.linalg import OperatorSpan, opnorm
from cqglab.modstruct import (
    AlgMap,
    ModuleStructure,
    QuantumGraph,
    build_coinvolution,
    identity_map,
    rieffel_isometry,
    tau_maps,
    verify_module_structure,
    verify_quantum_graph,
)

TOL = 1e-9


def pair_point_graph() -> tuple[QuantumGraph, AlgMap]:
    """Arrows (0,0),(0,1),(1,0),(1,1) over units {0,1}, weights (1/3, 2/3).

    Fibre averages use weight 1/2 on each of the two arrows per fibre; the
    first arrow component is the target, the second the source.
    """
    base = BlockAlgebra((1, 1))
    total = BlockAlgebra((1, 1, 1, 1))
    mu = FaithfulState(base, np.diag([1 / 3, 2 / 3]).astype(complex))

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
    # ratio of the forward and backward fibre weights, inverted
    delta = np.diag([1.0, 2.0, 0.5, 1.0]).astype(complex)
    graph = QuantumGraph(mu, total, r, phi, s, psi, delta)

    inv = [0, 2, 1, 3]
    coinv = AlgMap.from_function(
        lambda a: np.diag([a[inv[g], inv[g]] for g in range(4)]), total, total)
    return graph, coinv


def factor_module_structure() -> ModuleStructure:
    """2x2 matrices inside 4x4 via the first tensor leg, weighted trace out."""
    base = BlockAlgebra((2,))
    total = BlockAlgebra((4,))
    dmu = np.array([[0.5, 0.1], [0.1, 0.5]], dtype=complex)
    rho = np.array([[0.6, 0.2], [0.2, 0.4]], dtype=complex)
    mu = FaithfulState(base, dmu)
    embed = AlgMap.from_function(lambda b: np.kron(b, np.eye(2)), base, total)
    expect = AlgMap.from_function(
        lambda a: np.einsum("ikjl,lk->ij", a.reshape(2, 2, 2, 2), rho),
        total, base)
    return ModuleStructure(mu, total, embed, expect)


def test_factor_module_structure_passes():
    ms = factor_module_structure()
    report = verify_module_structure(ms)
    assert max(report.values()) <= TOL
    # induced state is the product of the base state and the trace weight
    rho = np.array([[0.6, 0.2], [0.2, 0.4]])
    expected = np.kron(ms.base_state.density, rho)
    assert np.allclose(ms.compose_state.density, expected, atol=1e-12)


def test_factor_rieffel_isometry():
    ms = factor_module_structure()
    zeta, report = rieffel_isometry(ms)
    assert zeta.shape == (16, 4)
    assert max(report.values()) <= TOL


def test_broken_expectation_is_flagged():
    # tracing out the wrong tensor leg stays unital and positive but does
    # not split the embedding
    ms = factor_module_structure()
    rho = np.array([[0.6, 0.2], [0.2, 0.4]], dtype=complex)
    bad = ModuleStructure(
        ms.base_state, ms.total, ms.embed,
        AlgMap.from_function(
            lambda a: np.einsum("ikjl,ji->kl", a.reshape(2, 2, 2, 2), rho),
            ms.total, ms.base_state.algebra))
    report = verify_module_structure(bad)
    assert report["expectation_splits_embedding"] > 1e-3


def test_graph_induced_states_match_hand_values():
    graph, _ = pair_point_graph()
    assert np.allclose(np.diag(graph.nu.density),
                       [1 / 6, 1 / 6, 1 / 3, 1 / 3], atol=1e-12)
    assert np.allclose(np.diag(graph.nu_inv.density),
                       [1 / 6, 1 / 3, 1 / 6, 1 / 3], atol=1e-12)
    theta = graph.phi(graph.delta)
    assert np.allclose(np.diag(theta), [1.5, 0.75], atol=1e-12)
    psi_of_inverse = graph.psi(np.diag([1.0, 0.5, 2.0, 1.0]))
    assert np.allclose(theta, psi_of_inverse, atol=1e-12)


def test_graph_axioms_hold():
    graph, _ = pair_point_graph()
    report = verify_quantum_graph(graph)
    assert max(report.values()) <= TOL, report


def test_canonical_isometries_match_fibre_frames():
    graph, _ = pair_point_graph()
    h = np.sqrt(0.5)
    expected_phi = np.array(
        [[h, 0], [h, 0], [0, h], [0, h]], dtype=complex)
    expected_psi = np.array(
        [[h, 0], [0, h], [h, 0], [0, h]], dtype=complex)
    assert np.allclose(graph.zeta_phi, expected_phi, atol=1e-12)
    assert np.allclose(graph.zeta_psi, expected_psi, atol=1e-12)


def test_slot_spans_commutative_coincidences():
    # in the commutative case the two target-fibred spans agree, as do the
    # two source-fibred ones, and each fills the fibred operator space
    graph, _ = pair_point_graph()
    spans = {name: OperatorSpan((4, 2), cols) for name, cols in [
        ("alpha_hat", graph.slot_alpha_hat()),
        ("beta", graph.slot_beta()),
        ("beta_hat", graph.slot_beta_hat()),
        ("alpha", graph.slot_alpha()),
    ]}
    assert all(sp.dim == 4 for sp in spans.values())
    assert spans["alpha_hat"].gap(spans["beta"]) <= TOL
    assert spans["beta_hat"].gap(spans["alpha"]) <= TOL
    assert spans["alpha_hat"].gap(spans["alpha"]) > 0.5


def test_coinvolution_verifies():
    graph, coinv = pair_point_graph()
    impl, report = build_coinvolution(graph, coinv)
    assert max(report.values()) <= TOL, report
    # the implementation carries the rescaled cyclic vector to the plain one
    diff = impl(graph.space_inv.cyclic_vector) - graph.space.cyclic_vector
    assert opnorm(diff.reshape(-1, 1)) <= TOL


def test_wrong_coinvolution_detected():
    graph, _ = pair_point_graph()
    _, report = build_coinvolution(graph, identity_map(graph.total))
    assert report["swaps_range_and_source"] > 1e-3


def test_wrong_modular_element_detected():
    graph, _ = pair_point_graph()
    bad = QuantumGraph(graph.base_state, graph.total, graph.r, graph.phi,
                       graph.s, graph.psi, np.eye(4, dtype=complex))
    report = verify_quantum_graph(bad)
    assert report["source_state_is_rescaled"] > 1e-3


def test_tau_maps_average_over_units():
    graph, _ = pair_point_graph()
    tau, tau_dag, report = tau_maps(graph)
    assert max(report.values()) <= TOL, report
    b = np.diag([2.0, 0.0]).astype(complex)
    assert np.allclose(tau(b), np.eye(2), atol=1e-12)
    assert np.allclose(tau_dag(b), np.eye(2), atol=1e-12)


def test_algmap_compose_and_injectivity():
    graph, _ = pair_point_graph()
    through = graph.phi.compose(graph.r)
    assert np.allclose(through.mat, np.eye(2), atol=1e-12)
    assert graph.r.smallest_singular_value() > 0.5
    assert graph.phi.smallest_singular_value() > 0.5


def test_module_structure_rejects_indefinite_state():
    base = BlockAlgebra((1, 1))
    with pytest.raises(ValueError):
        FaithfulState(base, np.diag([1.0, -0.5]).astype(complex))
