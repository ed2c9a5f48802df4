"""Comultiplication bundles on the two point fibred function algebra."""
import numpy as np
import pytest

from cqglab.cqg import (
    Comultiplication,
    QuantumGroupoidBundle,
    canonical_modules,
    haar_uniqueness,
    modular_element_checks,
    tau_expectation_checks,
    verify_comultiplication,
    verify_counit,
    verify_density,
    verify_haar,
    verify_strong_invariance,
)
from cqglab.fdca import BlockAlgebra, FaithfulState, op_matrix
from cqglab.linalg import residual, sqrtm_psd
from cqglab.modstruct import AlgMap, QuantumGraph, identity_map
from cqglab.rtp import first_leg_operator, relative_tensor

TOL = 1e-9
TGT = (0, 0, 1, 1)
SRC = (0, 1, 0, 1)


def _pair_comultiplication(graph, home) -> Comultiplication:
    """Pullback of arrow composition through the composable-pair frame.

    The frame vector of a composable pair (x, y) is the second-leg ket of
    the y-indicator applied to the x-point mass; multiplication by the value
    at the composed arrow is conjugated back through that frame.
    """
    cols = []
    prods = []
    for x in range(4):
        for y in range(4):
            if SRC[x] != TGT[y]:
                continue
            unit = np.zeros((4, 4), dtype=complex)
            unit[y, y] = 1.0
            cols.append(home.ket2(graph.op(unit) @ graph.zeta_phi)[:, x])
            prods.append(2 * TGT[x] + SRC[y])
    frame = np.column_stack(cols)
    frame_inv = np.linalg.inv(frame)

    def fn(a):
        d = np.diag(a)
        return frame @ np.diag([d[p] for p in prods]) @ frame_inv

    return Comultiplication.from_function(graph.total, home, fn)


def _pair_graph(weights, fiber):
    """Two point pair groupoid graph with per-unit fibre weights.

    ``fiber[u]`` weights the arrows of the fibres at unit ``u``; uniform
    weights give the shared fixture, anything else keeps the graph valid
    but breaks invariance of the expectations under the comultiplication.
    """
    base = BlockAlgebra((1, 1))
    total = BlockAlgebra((1, 1, 1, 1))
    mu = FaithfulState(base, np.diag(weights).astype(complex))
    fw = [fiber[TGT[g]][SRC[g]] for g in range(4)]
    sw = [fiber[SRC[g]][TGT[g]] for g in range(4)]
    r = AlgMap.from_function(
        lambda b: np.diag([b[TGT[g], TGT[g]] for g in range(4)]), base, total)
    s = AlgMap.from_function(
        lambda y: np.diag([y[SRC[g], SRC[g]] for g in range(4)]), base, total)
    phi = AlgMap.from_function(
        lambda a: np.diag([sum(fw[g] * a[g, g] for g in range(4) if TGT[g] == u)
                           for u in range(2)]), total, base)
    psi = AlgMap.from_function(
        lambda a: np.diag([sum(sw[g] * a[g, g] for g in range(4) if SRC[g] == u)
                           for u in range(2)]), total, base)
    delta = np.diag([weights[SRC[g]] * sw[g] / (weights[TGT[g]] * fw[g])
                     for g in range(4)]).astype(complex)
    graph = QuantumGraph(mu, total, r, phi, s, psi, delta)
    inv = (0, 2, 1, 3)
    coinv = AlgMap.from_function(
        lambda a: np.diag([a[inv[g], inv[g]] for g in range(4)]), total, total)
    return graph, coinv


def _bundle_from(graph, coinv) -> QuantumGroupoidBundle:
    mods = canonical_modules(graph)
    home = relative_tensor(mods["alpha"], mods["beta"])
    return QuantumGroupoidBundle(graph, coinv, _pair_comultiplication(graph, home),
                                 mods)


@pytest.fixture(scope="module")
def bundle(graph_and_coinv):
    graph, coinv = graph_and_coinv
    return _bundle_from(graph, coinv)


def test_comultiplication_axioms(bundle):
    report = verify_comultiplication(bundle)
    for key, value in report.items():
        assert value <= TOL, key


def test_haar_invariance(bundle):
    report = verify_haar(bundle)
    for key, value in report.items():
        assert value <= TOL, key


def test_density_spans(bundle):
    report = verify_density(bundle)
    for key, value in report.items():
        assert value <= TOL, key


def test_strong_invariance(bundle):
    report = verify_strong_invariance(bundle)
    for key, value in report.items():
        assert value <= TOL, key


def test_modular_element_matches_oracle(bundle):
    theta, report = modular_element_checks(bundle)
    assert residual(theta, np.diag([1.5, 0.75])) <= 1e-12
    for key, value in report.items():
        assert value <= TOL, key


def test_central_expectation_identities(bundle):
    report = tau_expectation_checks(bundle)
    for key, value in report.items():
        assert value <= TOL, key


def test_counit(bundle):
    def counit(a):
        return np.diag([a[0, 0], a[3, 3]])

    report = verify_counit(bundle, counit)
    for key, value in report.items():
        assert value <= TOL, key


def test_reports_are_cached(bundle):
    assert verify_haar(bundle) is verify_haar(bundle)


def test_haar_uniqueness_recovers_central_scaling(bundle):
    graph = bundle.graph
    gamma0 = np.diag([0.8, 1.2]).astype(complex)
    s_gamma = graph.s(op_matrix(gamma0))
    s_half = sqrtm_psd(s_gamma)
    r_gamma = graph.r(gamma0)
    r_half = sqrtm_psd(r_gamma)
    base = graph.base_state.algebra
    phi_t = AlgMap.from_function(
        lambda a: graph.phi(s_half @ a @ s_half), graph.total, base)
    psi_t = AlgMap.from_function(
        lambda a: graph.psi(r_half @ a @ r_half), graph.total, base)
    delta_t = graph.delta @ r_gamma @ np.linalg.inv(s_gamma)
    gamma, report = haar_uniqueness(bundle, phi_t, psi_t, delta_t)
    assert residual(gamma, gamma0) <= 1e-8
    for key, value in report.items():
        assert value <= 1e-8, key


def test_haar_uniqueness_rejects_invalid_candidate(bundle):
    graph = bundle.graph
    base = graph.base_state.algebra
    doubled = AlgMap.from_function(lambda a: 2.0 * graph.phi(a),
                                   graph.total, base)
    with pytest.raises(ValueError):
        haar_uniqueness(bundle, doubled, graph.psi, graph.delta)


def test_skewed_fibre_weights_break_invariance(graph_and_coinv):
    graph, coinv = _pair_graph((1 / 3, 2 / 3), ((0.5, 0.5), (0.3, 0.7)))
    bad = _bundle_from(graph, coinv)
    # the graph itself is fine; the expectations just stop being invariant
    basic = verify_comultiplication(bad, intertwiners=False)
    for key, value in basic.items():
        assert value <= TOL, key
    report = verify_haar(bad)
    assert report["left_invariance"] > 1e-3
    assert report["right_invariance"] > 1e-3


def test_first_factor_comultiplication_fails_density(bundle):
    graph, home = bundle.graph, bundle.home
    broken = Comultiplication.from_function(
        graph.total, home,
        lambda a: first_leg_operator(home, graph.rep(a))[0])
    bad = QuantumGroupoidBundle(graph, bundle.coinv, broken, bundle.modules)
    # a commutative square keeps the legs closed; the span comparison is
    # what tells this homomorphism apart from a comultiplication
    basic = verify_comultiplication(bad, intertwiners=False)
    assert basic["multiplicative"] <= TOL
    report = verify_density(bad)
    assert report["first_leg_action_vs_translates"] > 0.05
    assert report["second_leg_isometry_vs_translates"] > 0.05


def test_identity_coinvolution_fails_strong_invariance(bundle):
    trivial = identity_map(bundle.total)
    bad = QuantumGroupoidBundle(bundle.graph, trivial, bundle.comult,
                                bundle.modules)
    report = verify_strong_invariance(bad)
    assert report["strong_invariance"] > 1e-3


def test_one_point_bundle_is_exact():
    alg = BlockAlgebra((1,))
    mu = FaithfulState(alg, np.eye(1, dtype=complex))
    iden = identity_map(alg)
    graph = QuantumGraph(mu, alg, iden, iden, iden, iden, np.eye(1))
    mods = canonical_modules(graph)
    home = relative_tensor(mods["alpha"], mods["beta"])
    comult = Comultiplication.from_function(
        alg, home, lambda a: np.asarray(a, dtype=complex))
    b = QuantumGroupoidBundle(graph, iden, comult, mods)
    for report in (verify_comultiplication(b), verify_haar(b),
                   verify_density(b), verify_strong_invariance(b),
                   tau_expectation_checks(b), modular_element_checks(b)[1],
                   verify_counit(b, lambda a: np.asarray(a, dtype=complex))):
        for key, value in report.items():
            assert value <= TOL, key
    gamma, report = haar_uniqueness(b, iden, iden, np.eye(1))
    assert residual(gamma, np.eye(1)) <= TOL
