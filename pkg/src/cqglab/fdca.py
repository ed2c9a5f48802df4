"""Finite dimensional C*-algebras, faithful states, and their GNS data.

An algebra is a direct sum of full matrix blocks; elements are ordinary
block diagonal ``numpy`` matrices.  A faithful positive functional is stored
through its density matrix.  The standard representation carries the cyclic
vector, the modular operator, the modular conjugation, and the commuting
right action, realised explicitly on the block coordinates.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .linalg import (
    Antiunitary,
    Array,
    OperatorSpan,
    apply_spectral,
    as_complex,
    dagger,
    direct_sum,
    is_positive,
    min_eig,
    opnorm,
    powm_pd,
    residual,
    sqrtm_psd,
    vec,
)


@dataclass(frozen=True)
class BlockAlgebra:
    """Direct sum of full matrix algebras with the given block sizes."""

    dims: tuple[int, ...]

    def __post_init__(self):
        if not self.dims or any(d <= 0 for d in self.dims):
            raise ValueError("block sizes must be positive")

    @property
    def total_dim(self) -> int:
        """Size of the matrices realising elements."""
        return sum(self.dims)

    @property
    def vector_dim(self) -> int:
        """Linear dimension of the algebra."""
        return sum(d * d for d in self.dims)

    def offsets(self) -> list[int]:
        out = [0]
        for d in self.dims:
            out.append(out[-1] + d)
        return out

    def blocks(self, x: Array) -> list[Array]:
        x = as_complex(x)
        off = self.offsets()
        return [x[off[k]:off[k + 1], off[k]:off[k + 1]] for k in range(len(self.dims))]

    def embed(self, blocks: Sequence[Array]) -> Array:
        if len(blocks) != len(self.dims):
            raise ValueError("wrong number of blocks")
        for b, d in zip(blocks, self.dims):
            if np.shape(b) != (d, d):
                raise ValueError("block size mismatch")
        return direct_sum([as_complex(b) for b in blocks])

    def identity(self) -> Array:
        return np.eye(self.total_dim, dtype=np.complex128)

    def basis(self) -> list[Array]:
        """Matrix units of every block, embedded block diagonally."""
        out = []
        off = self.offsets()
        n = self.total_dim
        for k, d in enumerate(self.dims):
            for i in range(d):
                for j in range(d):
                    e = np.zeros((n, n), dtype=np.complex128)
                    e[off[k] + i, off[k] + j] = 1.0
                    out.append(e)
        return out

    def hermitian_basis(self) -> list[Array]:
        out = []
        off = self.offsets()
        n = self.total_dim
        for k, d in enumerate(self.dims):
            for i in range(d):
                for j in range(d):
                    if i == j:
                        e = np.zeros((n, n), dtype=np.complex128)
                        e[off[k] + i, off[k] + i] = 1.0
                        out.append(e)
                    elif i < j:
                        e = np.zeros((n, n), dtype=np.complex128)
                        e[off[k] + i, off[k] + j] = 1.0
                        e[off[k] + j, off[k] + i] = 1.0
                        out.append(e)
                        e = np.zeros((n, n), dtype=np.complex128)
                        e[off[k] + i, off[k] + j] = 1j
                        e[off[k] + j, off[k] + i] = -1j
                        out.append(e)
        return out

    def central_projections(self) -> list[Array]:
        out = []
        off = self.offsets()
        n = self.total_dim
        for k, d in enumerate(self.dims):
            p = np.zeros((n, n), dtype=np.complex128)
            p[off[k]:off[k] + d, off[k]:off[k] + d] = np.eye(d)
            out.append(p)
        return out

    def project(self, x: Array) -> Array:
        """Block diagonal part of a matrix."""
        return self.embed(self.blocks(x))

    def membership_defect(self, x: Array) -> float:
        return residual(as_complex(x), self.project(x))

    def blockvec(self, x: Array) -> Array:
        """Concatenated row-major vectorisations of the blocks."""
        return np.concatenate([vec(b) for b in self.blocks(x)])

    def from_blockvec(self, v: Array) -> Array:
        v = as_complex(v)
        blocks = []
        pos = 0
        for d in self.dims:
            blocks.append(v[pos:pos + d * d].reshape(d, d))
            pos += d * d
        return self.embed(blocks)

    def random_element(self, rng: np.random.Generator, hermitian: bool = False) -> Array:
        blocks = []
        for d in self.dims:
            m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            if hermitian:
                m = 0.5 * (m + dagger(m))
            blocks.append(m)
        return self.embed(blocks)


def algebra_to_json(alg: BlockAlgebra) -> dict:
    return {"blocks": list(alg.dims)}


def algebra_from_json(data: dict) -> BlockAlgebra:
    return BlockAlgebra(tuple(int(d) for d in data["blocks"]))


def matrix_to_json(m: Array) -> list:
    m = as_complex(m)
    return [np.real(m).tolist(), np.imag(m).tolist()]


def matrix_from_json(data) -> Array:
    re = np.asarray(data[0], dtype=float)
    im = np.asarray(data[1], dtype=float)
    return re + 1j * im


@dataclass(frozen=True)
class FaithfulState:
    """Faithful positive functional ``x -> tr(density x)`` on a block algebra."""

    algebra: BlockAlgebra
    density: Array

    def __post_init__(self):
        d = as_complex(self.density)
        object.__setattr__(self, "density", d)
        if self.algebra.membership_defect(d) > 1e-12:
            raise ValueError("density must be block diagonal")
        if not is_positive(d, tol=1e-12) or min_eig(d) <= 0:
            raise ValueError("density must be positive definite")

    def __call__(self, x: Array) -> complex:
        return complex(np.trace(self.density @ as_complex(x)))

    @property
    def is_unital(self) -> bool:
        return abs(self(self.algebra.identity()) - 1.0) <= 1e-12

    def sigma(self, z: complex, x: Array) -> Array:
        """Modular flow ``sigma_z(x) = D^{iz} x D^{-iz}`` at complex time ``z``."""
        dz = powm_pd(self.density, 1j * z)
        dzm = powm_pd(self.density, -1j * z)
        return dz @ as_complex(x) @ dzm

    def kms_defect(self, x: Array, y: Array) -> float:
        """Defect of ``state(x y) = state(y sigma_{-i}(x))``."""
        lhs = self(as_complex(x) @ as_complex(y))
        rhs = self(as_complex(y) @ self.sigma(-1j, x))
        return abs(lhs - rhs) / max(1.0, abs(lhs))

    def opposite(self) -> "FaithfulState":
        """The same functional on the opposite algebra, written on transposed matrices."""
        return FaithfulState(self.algebra, np.conj(self.density))

    def rescale(self, c: Array) -> "FaithfulState":
        """Functional ``x -> state(c^{1/2} x c^{1/2})`` for positive invertible ``c``."""
        half = sqrtm_psd(as_complex(c))
        return FaithfulState(self.algebra, self.algebra.project(half @ self.density @ half))


def state_to_json(state: FaithfulState) -> dict:
    return {"density": matrix_to_json(state.density)}


def state_from_json(alg: BlockAlgebra, data: dict) -> FaithfulState:
    return FaithfulState(alg, matrix_from_json(data["density"]))


def op_matrix(b: Array) -> Array:
    """Matrix realising an element inside the opposite algebra."""
    return as_complex(b).T


def functional_density(alg: BlockAlgebra, f: Callable[[Array], complex]) -> Array:
    """Density matrix of a linear functional: the ``X`` with ``f = tr(X .)``."""
    bas = alg.basis()
    mat = np.array([[complex(np.trace(q @ p)) for q in bas] for p in bas])
    vals = np.array([complex(f(p)) for p in bas])
    coeff = np.linalg.solve(mat, vals)
    x = sum(c * q for c, q in zip(coeff, bas))
    return alg.project(x)


def completely_positive_defect(phi: Callable[[Array], Array], source: BlockAlgebra,
                               target: BlockAlgebra) -> float:
    """Negative part of the positivity kernel ``[phi(x_p* x_q)]_{p,q}``.

    The map is completely positive exactly when this block matrix over a
    linear basis is positive semidefinite; returns ``max(0, -lambda_min)``
    relative to the kernel scale.
    """
    bas = source.basis()
    n = len(bas)
    m = target.total_dim
    kernel = np.zeros((n * m, n * m), dtype=np.complex128)
    for p, x in enumerate(bas):
        for q, y in enumerate(bas):
            kernel[p * m:(p + 1) * m, q * m:(q + 1) * m] = as_complex(phi(dagger(x) @ y))
    scale = max(1.0, opnorm(kernel))
    lam = min_eig(kernel)
    return max(0.0, -lam) / scale


def spectral_apply(alg: BlockAlgebra, f: Callable[[Array], Array], x: Array) -> Array:
    """Apply a scalar function to a Hermitian element blockwise."""
    return alg.embed([apply_spectral(f, b) for b in alg.blocks(x)])


def _transpose_permutation(dims: Sequence[int]) -> Array:
    """Blockwise permutation sending vec(m) to vec(m^T)."""
    total = sum(d * d for d in dims)
    p = np.zeros((total, total), dtype=np.complex128)
    pos = 0
    for d in dims:
        for i in range(d):
            for j in range(d):
                p[pos + j * d + i, pos + i * d + j] = 1.0
        pos += d * d
    return p


class GnsRealization:
    """Standard representation of a faithful state on block coordinates.

    The coordinate space always belongs to the reference state passed in.
    With ``side == "left"`` the state itself is represented, the algebra acts
    by left multiplication and the cyclic embedding is
    ``x -> blockvec(x density^{1/2})``.  With ``side == "right"`` the opposite
    state is represented on the same coordinates: its elements are transposed
    matrices, acting by right multiplication, with cyclic embedding
    ``y -> blockvec(density^{1/2} y^T)``.
    """

    def __init__(self, ref_state: FaithfulState, side: str = "left"):
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        self.side = side
        self.ref_state = ref_state
        self.algebra = ref_state.algebra
        #: the state actually represented here
        self.state = ref_state if side == "left" else ref_state.opposite()
        self._dh = sqrtm_psd(ref_state.density)
        self.dim = self.algebra.vector_dim

    # --- elementary structure -------------------------------------------------

    def lam(self, x: Array) -> Array:
        """Coordinates of the image of an element under the cyclic embedding."""
        x = as_complex(x)
        if self.side == "left":
            return self.algebra.blockvec(x @ self._dh)
        return self.algebra.blockvec(self._dh @ x.T)

    def lam_matrix(self) -> Array:
        """Matrix of the cyclic embedding on basis coordinates."""
        return np.column_stack([self.lam(b) for b in self.algebra.basis()])

    def lam_inverse(self, v: Array) -> Array:
        m = self.algebra.from_blockvec(v)
        dh_inv = powm_pd(self.ref_state.density, -0.5)
        if self.side == "left":
            return m @ dh_inv
        return (dh_inv @ m).T

    def _kron_left(self, x: Array) -> Array:
        return direct_sum([np.kron(b, np.eye(d)) for b, d in
                           zip(self.algebra.blocks(x), self.algebra.dims)])

    def _kron_right(self, x: Array) -> Array:
        return direct_sum([np.kron(np.eye(d), b) for b, d in
                           zip(self.algebra.blocks(x), self.algebra.dims)])

    def rep(self, x: Array) -> Array:
        """Action of the represented algebra."""
        return self._kron_left(x) if self.side == "left" else self._kron_right(x)

    def opp_rep(self, y: Array) -> Array:
        """Commuting action of the partner algebra.

        For a left realisation the partner elements are opposite-algebra
        matrices (transposes); for a right realisation ordinary ones.
        """
        return self._kron_right(y) if self.side == "left" else self._kron_left(y)

    @property
    def cyclic_vector(self) -> Array:
        return self.algebra.blockvec(self._dh)

    @property
    def modular_operator(self) -> Array:
        blocks = []
        for b in self.algebra.blocks(self.ref_state.density):
            binv = powm_pd(b, -1.0)
            if self.side == "left":
                blocks.append(np.kron(b, binv.T))
            else:
                blocks.append(np.kron(binv, b.T))
        return direct_sum(blocks)

    @property
    def modular_conjugation(self) -> Antiunitary:
        return Antiunitary(_transpose_permutation(self.algebra.dims))

    def opposite(self) -> "GnsRealization":
        """The realisation of the opposite state on the same coordinates."""
        other = "right" if self.side == "left" else "left"
        return GnsRealization(self.ref_state, side=other)

    def twist(self, delta: Array) -> "GnsRealization":
        """Left realisation of the rescaled state with density ``density @ delta``.

        Valid for positive invertible ``delta`` commuting with the density;
        the coordinate space stays the same.
        """
        if self.side != "left":
            raise ValueError("twisting is done on the left realisation")
        d = self.ref_state.density @ as_complex(delta)
        if residual(d, dagger(d)) > 1e-10:
            raise ValueError("twist needs delta commuting with the density")
        return GnsRealization(FaithfulState(self.algebra, self.algebra.project(d)), side="left")

    # --- derived spans ----------------------------------------------------------

    def rep_span(self) -> OperatorSpan:
        return OperatorSpan((self.dim, self.dim), [self.rep(b) for b in self.algebra.basis()])

    def opp_rep_span(self) -> OperatorSpan:
        return OperatorSpan((self.dim, self.dim), [self.opp_rep(b) for b in self.algebra.basis()])

    # --- diagnostics ------------------------------------------------------------

    def isometry_defect(self) -> float:
        bas = self.algebra.basis()
        worst = 0.0
        for x in bas:
            for y in bas:
                lhs = complex(np.vdot(self.lam(x), self.lam(y)))
                rhs = self.state(dagger(x) @ y)
                worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
        return worst

    def conjugation_defect(self) -> float:
        """Defect of ``J lam(x) = lam(sigma_{i/2}(x)*)`` over a basis."""
        j = self.modular_conjugation
        worst = 0.0
        for x in self.algebra.basis():
            lhs = j(self.lam(x))
            rhs = self.lam(dagger(self.state.sigma(0.5j, x)))
            worst = max(worst, float(np.linalg.norm(lhs - rhs)) / max(1.0, float(np.linalg.norm(rhs))))
        return worst

    def modular_defect(self) -> float:
        """Defect of ``Delta lam(x) = lam(sigma_{-i}(x))`` over a basis."""
        md = self.modular_operator
        worst = 0.0
        for x in self.algebra.basis():
            lhs = md @ self.lam(x)
            rhs = self.lam(self.state.sigma(-1j, x))
            worst = max(worst, float(np.linalg.norm(lhs - rhs)) / max(1.0, float(np.linalg.norm(rhs))))
        return worst


def gns_realization(state: FaithfulState) -> GnsRealization:
    return GnsRealization(state, side="left")


def opposite_realization(state: FaithfulState) -> GnsRealization:
    """GNS realisation of the opposite state on the same coordinate space."""
    return GnsRealization(state, side="right")


def load_algebra_with_state(path_or_dict) -> tuple[BlockAlgebra, FaithfulState]:
    data = path_or_dict
    if not isinstance(data, dict):
        with open(path_or_dict, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    alg = algebra_from_json(data)
    state = state_from_json(alg, data["state"])
    return alg, state
