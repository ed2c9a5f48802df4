"""Base algebra embeddings with expectations, and the graph structure built on them.

A module structure is a unital embedding of a base algebra together with a
unital completely positive expectation splitting it.  Two such structures,
one over the base state and one over its opposite, with commuting ranges and
a compatible modular element, form the underlying graph of a quantum
groupoid.  This module verifies all defining identities numerically and
constructs the induced isometries between the standard representation
spaces, the coinvolution implementation, and the range expectations.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .fdca import (
    BlockAlgebra,
    FaithfulState,
    GnsRealization,
    completely_positive_defect,
    functional_density,
    gns_realization,
    op_matrix,
    opposite_realization,
)
from .linalg import (
    Antiunitary,
    Array,
    OperatorSpan,
    as_complex,
    commutant_basis,
    conjugate_by_antiunitary,
    dagger,
    isometry_defect,
    logm_pd,
    min_eig,
    opnorm,
    pinv,
    powm_pd,
    residual,
    sqrtm_psd,
)


@dataclass(frozen=True)
class AlgMap:
    """Linear map between block algebras, stored on blockvec coordinates."""

    source: BlockAlgebra
    target: BlockAlgebra
    mat: Array

    @staticmethod
    def from_function(f: Callable[[Array], Array], source: BlockAlgebra,
                      target: BlockAlgebra) -> "AlgMap":
        cols = [target.blockvec(f(b)) for b in source.basis()]
        return AlgMap(source, target, np.column_stack(cols))

    def __call__(self, x: Array) -> Array:
        return self.target.from_blockvec(self.mat @ self.source.blockvec(x))

    def compose(self, other: "AlgMap") -> "AlgMap":
        if other.target.dims != self.source.dims:
            raise ValueError("composition mismatch")
        return AlgMap(other.source, self.target, self.mat @ other.mat)

    def smallest_singular_value(self) -> float:
        s = np.linalg.svd(self.mat, compute_uv=False)
        return float(s[-1]) if s.size else 0.0

    def range_span(self) -> OperatorSpan:
        n = self.target.total_dim
        return OperatorSpan((n, n), [self(b) for b in self.source.basis()])


def identity_map(alg: BlockAlgebra) -> AlgMap:
    return AlgMap(alg, alg, np.eye(alg.vector_dim, dtype=np.complex128))


@dataclass(frozen=True)
class ModuleStructure:
    """Unital embedding of a based algebra with a splitting expectation.

    ``embed`` maps the base algebra into the total one, ``expect`` maps back,
    and ``base_state`` is the faithful state on the base.  For structures
    over the opposite base state, all base elements are understood as
    opposite-algebra matrices (transposes) and ``opposite_base`` is set.
    """

    base_state: FaithfulState
    total: BlockAlgebra
    embed: AlgMap
    expect: AlgMap
    opposite_base: bool = False

    @cached_property
    def compose_state(self) -> FaithfulState:
        """The induced state on the total algebra: base state after expectation."""
        dens = functional_density(self.total, lambda a: self.base_state(self.expect(a)))
        return FaithfulState(self.total, dens)

    def base_realization(self) -> GnsRealization:
        if self.opposite_base:
            reference = FaithfulState(self.base_state.algebra, np.conj(self.base_state.density))
            return opposite_realization(reference)
        return gns_realization(self.base_state)


def verify_module_structure(ms: ModuleStructure) -> dict[str, float]:
    """Residuals of every defining identity of a module structure.

    Keys ending in ``_generator`` come from the derivation criterion for
    modular invariance; values between the tolerance and its square root
    should be treated as indeterminate rather than failing.
    """
    base = ms.base_state.algebra
    total = ms.total
    r, phi = ms.embed, ms.expect
    bas = base.basis()
    tbas = total.basis()
    one_b = base.identity()
    one_a = total.identity()
    out: dict[str, float] = {}

    out["embedding_unital"] = residual(r(one_b), one_a)
    out["embedding_multiplicative"] = max(
        residual(r(x @ y), r(x) @ r(y)) for x in bas for y in bas)
    out["embedding_star"] = max(residual(r(dagger(x)), dagger(r(x))) for x in bas)
    out["embedding_injective"] = 0.0 if r.smallest_singular_value() > 1e-9 else 1.0

    out["expectation_unital"] = residual(phi(one_a), one_b)
    out["expectation_star"] = max(residual(phi(dagger(a)), dagger(phi(a))) for a in tbas)
    out["expectation_completely_positive"] = completely_positive_defect(phi, total, base)
    out["expectation_splits_embedding"] = max(residual(phi(r(b)), b) for b in bas)
    out["expectation_bimodule"] = max(
        residual(phi(r(x) @ a @ r(y)), x @ phi(a) @ y)
        for x in bas for a in tbas for y in bas)

    cond = AlgMap(total, total, r.mat @ phi.mat)
    out["conditional_expectation_idempotent"] = max(
        residual(cond(cond(a)), cond(a)) for a in tbas)

    # modular invariance of the embedded copy under the induced state
    nu = ms.compose_state
    range_span = r.range_span()
    out["range_modular_invariant"] = max(
        range_span.distance(nu.sigma(1.0, r(b))) for b in bas)
    gen = logm_pd(nu.density)
    out["range_modular_generator"] = max(
        range_span.distance(gen @ r(b) - r(b) @ gen) for b in bas)
    return out


def rieffel_isometry(ms: ModuleStructure,
                     total_real: GnsRealization | None = None
                     ) -> tuple[Array, dict[str, float]]:
    """Isometry between standard spaces induced by the embedding.

    It carries the cyclic image of a base element to the cyclic image of its
    embedding.  Returns the matrix together with residuals of the exchange
    relations it satisfies.
    """
    base_real = ms.base_realization()
    if total_real is None:
        total_real = gns_realization(ms.compose_state)
    bas = ms.base_state.algebra.basis()
    src = np.column_stack([base_real.lam(b) for b in bas])
    dst = np.column_stack([total_real.lam(ms.embed(b)) for b in bas])
    zeta = dst @ pinv(src)
    rep = {"well_defined": residual(zeta @ src, dst)}
    rep["isometry"] = isometry_defect(zeta)

    # intertwines the algebra actions through the embedding
    rep["intertwines_action"] = max(
        residual(zeta @ base_real.rep(b), total_real.rep(ms.embed(b)) @ zeta) for b in bas)

    # exchanges the modular conjugations
    jb = base_real.modular_conjugation.mat
    jt = total_real.modular_conjugation.mat
    rep["exchanges_conjugations"] = residual(zeta @ jb, jt @ np.conj(zeta))

    # adjoint implements the expectation on cyclic images
    tbas = ms.total.basis()
    zh = dagger(zeta)
    rep["adjoint_implements_expectation"] = max(
        float(np.linalg.norm(zh @ total_real.lam(a) - base_real.lam(ms.expect(a))))
        / max(1.0, float(np.linalg.norm(base_real.lam(ms.expect(a)))))
        for a in tbas)
    rep["adjoint_intertwines"] = max(
        residual(zh @ total_real.rep(a) @ zeta, base_real.rep(ms.expect(a))) for a in tbas)
    return zeta, rep


@dataclass(frozen=True)
class QuantumGraph:
    """Two compatible module structures with commuting ranges and a modular element.

    ``r``/``phi`` form the structure over the base state, ``s``/``psi`` the
    one over its opposite (arguments and values of the latter are transposed
    matrices).  ``delta`` relates the two induced states on the total
    algebra.
    """

    base_state: FaithfulState
    total: BlockAlgebra
    r: AlgMap
    phi: AlgMap
    s: AlgMap
    psi: AlgMap
    delta: Array

    @cached_property
    def range_module(self) -> ModuleStructure:
        return ModuleStructure(self.base_state, self.total, self.r, self.phi)

    @cached_property
    def source_module(self) -> ModuleStructure:
        op_state = FaithfulState(self.base_state.algebra, np.conj(self.base_state.density))
        return ModuleStructure(op_state, self.total, self.s, self.psi, opposite_base=True)

    @cached_property
    def nu(self) -> FaithfulState:
        """Induced state on the total algebra through the range expectation."""
        return self.range_module.compose_state

    @cached_property
    def nu_inv(self) -> FaithfulState:
        """The delta-rescaled induced state, equal to the source composition."""
        return FaithfulState(self.total, self.total.project(self.nu.density @ self.delta))

    @cached_property
    def space(self) -> GnsRealization:
        """Standard representation of the induced state; the ambient space."""
        return gns_realization(self.nu)

    @cached_property
    def space_inv(self) -> GnsRealization:
        return self.space.twist(self.delta)

    @cached_property
    def zeta_phi(self) -> Array:
        zeta, _ = rieffel_isometry(self.range_module, total_real=self.space)
        return zeta

    @cached_property
    def zeta_psi(self) -> Array:
        zeta, _ = rieffel_isometry(self.source_module, total_real=self.space_inv)
        return zeta

    @property
    def conjugation(self) -> Antiunitary:
        return self.space.modular_conjugation

    def rep(self, a: Array) -> Array:
        return self.space.rep(a)

    def op(self, a: Array) -> Array:
        """Commutant embedding of the opposite total algebra."""
        return conjugate_by_antiunitary(self.conjugation, dagger(self.rep(a)))

    # --- the four canonical column spans -------------------------------------

    def slot_alpha_hat(self) -> list[Array]:
        return [self.rep(a) @ self.zeta_phi for a in self.total.basis()]

    def slot_beta(self) -> list[Array]:
        return [self.op(a) @ self.zeta_phi for a in self.total.basis()]

    def slot_beta_hat(self) -> list[Array]:
        return [self.rep(a) @ self.zeta_psi for a in self.total.basis()]

    def slot_alpha(self) -> list[Array]:
        return [self.op(a) @ self.zeta_psi for a in self.total.basis()]


def verify_quantum_graph(graph: QuantumGraph) -> dict[str, float]:
    """Residuals of the compatibility conditions tying the two module structures."""
    out: dict[str, float] = {}
    for key, val in verify_module_structure(graph.range_module).items():
        out["range_" + key] = val
    for key, val in verify_module_structure(graph.source_module).items():
        out["source_" + key] = val

    base = graph.base_state.algebra
    bas = base.basis()
    tbas = graph.total.basis()
    mu = graph.base_state
    mu_op = mu.opposite()

    out["ranges_commute"] = max(
        residual(graph.r(x) @ graph.s(y), graph.s(y) @ graph.r(x))
        for x in bas for y in bas)

    delta = as_complex(graph.delta)
    out["modular_element_positive"] = max(0.0, -min_eig(delta)) + residual(delta, dagger(delta))
    out["modular_element_invertible"] = 0.0 if min_eig(delta) > 1e-12 else 1.0
    out["modular_element_commutes_range"] = max(
        residual(delta @ graph.r(b), graph.r(b) @ delta) for b in bas)
    out["modular_element_commutes_source"] = max(
        residual(delta @ graph.s(b), graph.s(b) @ delta) for b in bas)
    out["modular_element_invariant"] = residual(
        graph.nu.density @ delta, delta @ graph.nu.density)
    out["modular_element_normalized"] = abs(graph.nu(delta) - 1.0)

    dh = sqrtm_psd(delta)
    out["source_state_is_rescaled"] = max(
        abs(mu_op(graph.psi(a)) - graph.nu(dh @ a @ dh)) / max(1.0, abs(graph.nu(dh @ a @ dh)))
        for a in tbas)
    out["induced_restricts_to_base"] = max(
        abs(graph.nu(graph.r(b)) - mu(b)) / max(1.0, abs(mu(b))) for b in bas)
    out["rescaled_restricts_to_opposite"] = max(
        abs(graph.nu_inv(graph.s(b)) - mu_op(b)) / max(1.0, abs(mu_op(b))) for b in bas)

    theta = graph.phi(delta)
    theta_dag = graph.psi(powm_pd(delta, -1.0))
    cen = commutant_basis([*bas])
    cen_span = OperatorSpan((base.total_dim, base.total_dim),
                            [base.project(c) for c in cen])
    out["range_of_modular_element_central"] = cen_span.distance(theta)
    out["source_of_modular_element_central"] = cen_span.distance(theta_dag)
    out["range_of_modular_element_normalized"] = abs(mu(theta) - 1.0)
    out["source_of_modular_element_normalized"] = abs(mu_op(theta_dag) - 1.0)
    return out


def build_coinvolution(graph: QuantumGraph, coinv: AlgMap
                       ) -> tuple[Antiunitary, dict[str, float]]:
    """Antiunitary implementation of a candidate coinvolution.

    The antiunitary sends the cyclic image of an element in the rescaled
    space to the cyclic image of the starred coinvolution in the plain one.
    Returns it together with residuals of the coinvolution axioms.
    """
    total = graph.total
    tbas = total.basis()
    out: dict[str, float] = {}
    out["antimultiplicative"] = max(
        residual(coinv(x @ y), coinv(y) @ coinv(x)) for x in tbas for y in tbas)
    out["star_preserving"] = max(residual(coinv(dagger(a)), dagger(coinv(a))) for a in tbas)
    out["involutive"] = max(residual(coinv(coinv(a)), a) for a in tbas)

    bas = graph.base_state.algebra.basis()
    out["swaps_range_and_source"] = max(
        residual(coinv(graph.r(b)), graph.s(op_matrix(b))) for b in bas)
    out["exchanges_expectations"] = max(
        residual(graph.phi(coinv(a)), op_matrix(graph.psi(a))) for a in tbas)
    out["reverses_modular_flow"] = max(
        residual(graph.nu.sigma(1.0, coinv(a)),
                 coinv(graph.nu_inv.sigma(-1.0, a))) for a in tbas)
    out["inverts_modular_element"] = residual(coinv(graph.delta),
                                              powm_pd(as_complex(graph.delta), -1.0))

    src = np.column_stack([graph.space_inv.lam(a) for a in tbas])
    dst = np.column_stack([graph.space.lam(dagger(coinv(a))) for a in tbas])
    mat = dst @ pinv(np.conj(src))
    impl = Antiunitary(mat)
    out["implementation_well_defined"] = residual(mat @ np.conj(src), dst)
    out["implementation_antiunitary"] = impl.defect()
    out["implementation_involutive"] = residual(impl.compose_anti(impl),
                                                np.eye(graph.space.dim))
    jmat = graph.conjugation.mat
    out["implementation_commutes_conjugation"] = residual(mat @ np.conj(jmat), jmat @ np.conj(mat))
    out["implements_coinvolution"] = max(
        residual(conjugate_by_antiunitary(impl, dagger(graph.rep(a))), graph.rep(coinv(a)))
        for a in tbas)

    jmu = graph.range_module.base_realization().modular_conjugation.mat
    lhs = mat @ np.conj(graph.zeta_psi) @ np.conj(jmu)
    out["carries_source_isometry_to_range"] = residual(lhs, graph.zeta_phi)
    return impl, out


def tau_maps(graph: QuantumGraph) -> tuple[AlgMap, AlgMap, dict[str, float]]:
    """Range expectations of the two module structures and their identities.

    ``tau`` composes the source expectation with the range embedding,
    ``tau_dag`` the other way around; both land in the center of the base.
    """
    base = graph.base_state.algebra
    tau = AlgMap.from_function(lambda b: graph.psi(graph.r(b)), base, base)
    tau_dag = AlgMap.from_function(lambda y: graph.phi(graph.s(y)), base, base)
    bas = base.basis()
    tbas = graph.total.basis()
    mu = graph.base_state

    cen_span = OperatorSpan((base.total_dim, base.total_dim),
                            [base.project(c) for c in commutant_basis([*bas])])
    out: dict[str, float] = {}
    out["range_central"] = max(cen_span.distance(tau(b)) for b in bas)
    out["range_central_dag"] = max(cen_span.distance(tau_dag(b)) for b in bas)
    out["idempotent"] = max(residual(tau(tau(b)), tau(b)) for b in bas)
    out["embeddings_agree_on_range"] = max(
        residual(graph.s(tau(b)), graph.r(tau(b))) for b in bas)
    out["modular_invariance"] = max(
        residual(tau(mu.sigma(1.0, b)), tau(b)) for b in bas)
    out["expectations_exchange"] = max(
        residual(tau(graph.phi(a)), tau_dag(graph.psi(a))) for a in tbas)
    out["twisted_symmetry"] = max(
        residual(tau(x @ mu.sigma(-0.5j, y)), tau(y @ mu.sigma(-0.5j, x)))
        for x in bas for y in bas)
    return tau, tau_dag, out
