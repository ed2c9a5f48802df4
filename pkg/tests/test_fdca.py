import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cqglab import fdca, linalg
from cqglab.linalg import dagger, residual


def random_faithful_state(alg, rng):
    blocks = []
    for d in alg.dims:
        m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        p = m @ dagger(m) + 0.1 * np.eye(d)
        blocks.append(p)
    dens = alg.embed(blocks)
    dens = dens / np.trace(dens).real
    return fdca.FaithfulState(alg, dens)


@pytest.fixture(scope="module")
def alg():
    return fdca.BlockAlgebra((2, 3))


@pytest.fixture(scope="module")
def state(alg):
    return random_faithful_state(alg, np.random.default_rng(11))


def test_block_algebra_basics(alg):
    assert alg.total_dim == 5
    assert alg.vector_dim == 13
    assert len(alg.basis()) == 13
    assert len(alg.hermitian_basis()) == 13
    x = alg.random_element(np.random.default_rng(0))
    assert alg.membership_defect(x) == 0.0
    v = alg.blockvec(x)
    assert residual(alg.from_blockvec(v), x) < 1e-14
    full = np.ones((5, 5))
    assert alg.membership_defect(full) > 0.1


def test_state_kms_identity(alg, state):
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = alg.random_element(rng)
        y = alg.random_element(rng)
        assert state.kms_defect(x, y) < 1e-10


def test_sigma_is_homomorphism_and_star_twisted(alg, state):
    rng = np.random.default_rng(4)
    x = alg.random_element(rng)
    y = alg.random_element(rng)
    t = 0.7
    lhs = state.sigma(t, x @ y)
    rhs = state.sigma(t, x) @ state.sigma(t, y)
    assert residual(lhs, rhs) < 1e-10
    # sigma_t commutes with the star for real t
    assert residual(state.sigma(t, dagger(x)), dagger(state.sigma(t, x))) < 1e-10
    # group law at complex parameters
    lhs = state.sigma(0.3j, state.sigma(0.2j, x))
    rhs = state.sigma(0.5j, x)
    assert residual(lhs, rhs) < 1e-10


def test_opposite_state_flow_reverses(alg, state):
    rng = np.random.default_rng(5)
    b = alg.random_element(rng)
    op = state.opposite()
    t = 0.9
    lhs = op.sigma(t, fdca.op_matrix(b))
    rhs = fdca.op_matrix(state.sigma(-t, b))
    assert residual(lhs, rhs) < 1e-10
    assert abs(op(fdca.op_matrix(b)) - state(b)) < 1e-12


def test_gns_isometry_and_cyclicity(alg, state):
    gns = fdca.gns_realization(state)
    assert gns.isometry_defect() < 1e-12
    # cyclic vector comes from the unit
    assert np.allclose(gns.lam(alg.identity()), gns.cyclic_vector)
    # representation is multiplicative and respects rep(a) lam(x) = lam(a x)
    rng = np.random.default_rng(6)
    a = alg.random_element(rng)
    x = alg.random_element(rng)
    assert np.allclose(gns.rep(a) @ gns.lam(x), gns.lam(a @ x))
    assert residual(gns.rep(a @ x), gns.rep(a) @ gns.rep(x)) < 1e-12
    assert np.allclose(gns.lam_inverse(gns.lam(x)), x)


def test_gns_conjugation_modular_and_commutant(alg, state):
    gns = fdca.gns_realization(state)
    assert gns.conjugation_defect() < 1e-10
    assert gns.modular_defect() < 1e-10
    j = gns.modular_conjugation
    assert j.defect() < 1e-12
    # J is an involution fixing the cyclic vector
    assert residual(j.compose_anti(j), np.eye(gns.dim)) < 1e-12
    assert np.allclose(j(gns.cyclic_vector), gns.cyclic_vector)
    # J rep(b)* J is the commuting right action
    rng = np.random.default_rng(7)
    b = alg.random_element(rng)
    lhs = linalg.conjugate_by_antiunitary(j, dagger(gns.rep(b)))
    assert residual(lhs, gns.opp_rep(fdca.op_matrix(b))) < 1e-12
    a = alg.random_element(rng)
    comm = gns.rep(a) @ gns.opp_rep(fdca.op_matrix(b)) - gns.opp_rep(fdca.op_matrix(b)) @ gns.rep(a)
    assert linalg.opnorm(comm) < 1e-12


def test_opposite_realization_structure(alg, state):
    gns = fdca.gns_realization(state)
    opp = fdca.opposite_realization(state)
    assert opp.isometry_defect() < 1e-12
    assert opp.conjugation_defect() < 1e-10
    assert opp.modular_defect() < 1e-10
    # shared cyclic vector and conjugation, inverse modular operator
    assert np.allclose(opp.cyclic_vector, gns.cyclic_vector)
    assert np.allclose(opp.modular_conjugation.mat, gns.modular_conjugation.mat)
    assert residual(opp.modular_operator, np.linalg.inv(gns.modular_operator)) < 1e-10
    # lam of the opposite realisation is J lam(b*)
    rng = np.random.default_rng(8)
    b = alg.random_element(rng)
    lhs = opp.lam(fdca.op_matrix(b))
    rhs = gns.modular_conjugation(gns.lam(dagger(b)))
    assert np.allclose(lhs, rhs)
    # round trip
    back = opp.opposite()
    assert back.side == "left"
    assert residual(back.state.density, state.density) < 1e-14
    # representations swap sides
    assert residual(opp.rep(fdca.op_matrix(b)), gns.opp_rep(fdca.op_matrix(b))) < 1e-14
    assert residual(opp.opp_rep(b), gns.rep(b)) < 1e-14


def test_twist_matches_rescaled_density(alg, state):
    # central positive element commutes with everything
    c = alg.embed([2.0 * np.eye(2), 0.5 * np.eye(3)])
    tw = fdca.gns_realization(state).twist(c)
    assert residual(tw.ref_state.density, state.density @ c) < 1e-12
    with pytest.raises(ValueError):
        rng = np.random.default_rng(9)
        h = alg.random_element(rng, hermitian=True)
        fdca.gns_realization(state).twist(h @ h + np.eye(5))


def test_functional_density_roundtrip(alg, state):
    dens = fdca.functional_density(alg, state)
    assert residual(dens, state.density) < 1e-12


def test_completely_positive_defect_detects():
    alg2 = fdca.BlockAlgebra((2,))
    # the identity map is completely positive, the transpose map is not
    assert fdca.completely_positive_defect(lambda x: x, alg2, alg2) < 1e-12
    assert fdca.completely_positive_defect(lambda x: x.T, alg2, alg2) > 0.1


def test_spectral_apply_blockwise(alg):
    rng = np.random.default_rng(10)
    h = alg.random_element(rng, hermitian=True)
    sq = fdca.spectral_apply(alg, lambda w: w ** 2, h)
    assert residual(sq, h @ h) < 1e-12


def test_json_roundtrip(alg, state):
    data = {**fdca.algebra_to_json(alg), "state": fdca.state_to_json(state)}
    alg2, state2 = fdca.load_algebra_with_state(data)
    assert alg2.dims == alg.dims
    assert residual(state2.density, state.density) < 1e-15


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=3), st.integers(min_value=1, max_value=3),
       st.integers(min_value=0, max_value=10_000))
def test_gns_axioms_hold_for_random_states(d1, d2, seed):
    alg = fdca.BlockAlgebra((d1, d2))
    state = random_faithful_state(alg, np.random.default_rng(seed))
    gns = fdca.gns_realization(state)
    assert gns.isometry_defect() < 1e-9
    assert gns.conjugation_defect() < 1e-9
    assert gns.modular_defect() < 1e-9
    opp = fdca.opposite_realization(state)
    assert opp.isometry_defect() < 1e-9
    assert opp.conjugation_defect() < 1e-9
