"""Dense linear algebra helpers shared by the whole package.

Everything is finite dimensional and kept as explicit ``numpy`` arrays of
``complex128``.  Spans of operators are represented through an orthonormal
basis of their vectorisations, antilinear maps through the matrix of the
composition with entrywise conjugation, and positive semidefinite Gram
matrices through factorizations ``G = T* T`` whose row space serves as the
coordinate space of a quotient completion.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg

Array = np.ndarray

#: default relative tolerance for identity checks
TOL = 1e-9
#: relative singular value cutoff used when computing ranks of spans
RANK_CUTOFF = 1e-9
#: relative cutoff for pseudo-inverses of frames and Gram factors
PINV_RCOND = 1e-10
#: condition number beyond which linear solves emit a warning
COND_LIMIT = 1e12


def as_complex(a) -> Array:
    return np.asarray(a, dtype=np.complex128)


def dagger(a: Array) -> Array:
    return np.conj(np.asarray(a)).T


def opnorm(a: Array) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def residual(actual: Array, expected: Array) -> float:
    """Relative operator norm distance ``|actual - expected| / max(1, |expected|)``."""
    actual = as_complex(actual)
    expected = as_complex(expected)
    return opnorm(actual - expected) / max(1.0, opnorm(expected))


def hs_inner(a: Array, b: Array) -> complex:
    """Hilbert-Schmidt inner product, antilinear in the first argument."""
    return complex(np.vdot(np.asarray(a), np.asarray(b)))


def vec(m: Array) -> Array:
    """Row-major vectorisation; vec(a m) = kron(a, 1) vec(m), vec(m b) = kron(1, b^T) vec(m)."""
    return np.asarray(m).reshape(-1)


def unvec(v: Array, shape: tuple[int, int]) -> Array:
    return np.asarray(v).reshape(shape)


def direct_sum(blocks: Sequence[Array]) -> Array:
    if not blocks:
        return np.zeros((0, 0), dtype=np.complex128)
    return as_complex(scipy.linalg.block_diag(*blocks))


def is_hermitian(a: Array, tol: float = TOL) -> bool:
    return residual(a, dagger(a)) <= tol


def min_eig(a: Array) -> float:
    h = 0.5 * (as_complex(a) + dagger(a))
    if h.shape[0] == 0:
        return 0.0
    return float(np.linalg.eigvalsh(h)[0])


def is_positive(a: Array, tol: float = TOL) -> bool:
    """Hermitian within ``tol`` and with spectrum above ``-tol`` (relative scale)."""
    a = as_complex(a)
    scale = max(1.0, opnorm(a))
    return is_hermitian(a, tol) and min_eig(a) >= -tol * scale


def apply_spectral(f: Callable[[Array], Array], h: Array, hermitian_tol: float = 1e-8) -> Array:
    """Apply a scalar function to a Hermitian matrix through its eigendecomposition."""
    h = as_complex(h)
    if residual(h, dagger(h)) > hermitian_tol:
        raise ValueError("spectral calculus needs a Hermitian argument")
    w, u = np.linalg.eigh(0.5 * (h + dagger(h)))
    return u @ np.diag(as_complex(f(w))) @ dagger(u)


def sqrtm_psd(a: Array) -> Array:
    return apply_spectral(lambda w: np.sqrt(np.clip(w, 0.0, None)), a)


def powm_pd(a: Array, t: complex) -> Array:
    """Complex power of a positive definite matrix."""
    def f(w):
        if np.any(w <= 0):
            raise ValueError("matrix power needs a positive definite argument")
        return np.exp(t * np.log(w))
    return apply_spectral(f, a)


def logm_pd(a: Array) -> Array:
    def f(w):
        if np.any(w <= 0):
            raise ValueError("logarithm needs a positive definite argument")
        return np.log(w)
    return apply_spectral(f, a)


def _warn_condition(s: Array, what: str) -> None:
    s = np.asarray(s, dtype=float)
    if s.size and s[0] > 0:
        smin = s[s > 0].min()
        cond = s[0] / smin if smin > 0 else np.inf
        if cond > COND_LIMIT:
            warnings.warn(f"ill conditioned {what}: cond ~ {cond:.2e}", stacklevel=3)


def pinv(a: Array, rcond: float = PINV_RCOND) -> Array:
    a = as_complex(a)
    if a.size == 0:
        return np.zeros((a.shape[1], a.shape[0]), dtype=np.complex128)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    _warn_condition(s, "pseudo-inverse")
    cut = (s > rcond * s[0]) if s.size else np.zeros(0, dtype=bool)
    sinv = np.where(cut, 1.0 / np.where(s == 0, 1.0, s), 0.0)
    return dagger(vh) @ (sinv[:, None] * dagger(u))


def solve_via_frame(source_cols: Array, target_cols: Array, rcond: float = PINV_RCOND) -> tuple[Array, float]:
    """Return ``(m, defect)`` with ``m @ source_cols ~ target_cols``.

    ``defect`` is the relative residual of the equation; it vanishes exactly
    when the prescription is well defined on the span of the source columns.
    """
    source_cols = as_complex(source_cols)
    target_cols = as_complex(target_cols)
    m = target_cols @ pinv(source_cols, rcond=rcond)
    return m, residual(m @ source_cols, target_cols)


def nullspace(a: Array, rcond: float = RANK_CUTOFF) -> Array:
    """Orthonormal columns spanning the kernel of ``a``."""
    a = as_complex(a)
    if a.shape[0] == 0:
        return np.eye(a.shape[1], dtype=np.complex128)
    u, s, vh = np.linalg.svd(a, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > rcond * max(smax, 1e-300)))
    return dagger(vh)[:, rank:]


def commutant_basis(mats: Sequence[Array], rcond: float = RANK_CUTOFF) -> list[Array]:
    """Basis of all matrices commuting with every element of ``mats``."""
    mats = [as_complex(m) for m in mats]
    if not mats:
        raise ValueError("need at least one matrix")
    n = mats[0].shape[0]
    eye = np.eye(n, dtype=np.complex128)
    rows = [np.kron(eye, m.T) - np.kron(m, eye) for m in mats]
    ker = nullspace(np.vstack(rows), rcond=rcond)
    return [unvec(ker[:, j], (n, n)) for j in range(ker.shape[1])]


def unitary_defect(u: Array) -> float:
    u = as_complex(u)
    n, m = u.shape
    r1 = residual(dagger(u) @ u, np.eye(m))
    r2 = residual(u @ dagger(u), np.eye(n))
    return max(r1, r2)


def isometry_defect(v: Array) -> float:
    v = as_complex(v)
    return residual(dagger(v) @ v, np.eye(v.shape[1]))


class OperatorSpan:
    """Closed linear span of a family of operators between two fixed spaces.

    Internally an orthonormal basis of the vectorised operators, obtained by
    a singular value decomposition with relative cutoff ``RANK_CUTOFF``.
    """

    def __init__(self, shape: tuple[int, int], ops: Iterable[Array], cutoff: float = RANK_CUTOFF):
        self.shape = (int(shape[0]), int(shape[1]))
        rows = [vec(as_complex(op)) for op in ops]
        for r in rows:
            if r.shape[0] != self.shape[0] * self.shape[1]:
                raise ValueError("operator shape mismatch in span")
        if rows:
            m = np.array(rows)
            u, s, vh = np.linalg.svd(m, full_matrices=False)
            smax = s[0] if s.size else 0.0
            rank = int(np.sum(s > cutoff * max(smax, 1e-300)))
            # the row space of m is spanned by the conjugated right singular vectors
            self._vh = np.conj(vh[:rank])
        else:
            self._vh = np.zeros((0, self.shape[0] * self.shape[1]), dtype=np.complex128)

    @property
    def dim(self) -> int:
        return self._vh.shape[0]

    def basis(self) -> list[Array]:
        return [unvec(np.conj(self._vh[j]), self.shape) for j in range(self.dim)]

    def project(self, op: Array) -> Array:
        v = vec(as_complex(op))
        return unvec(dagger(self._vh) @ (self._vh @ v), self.shape)

    def distance(self, op: Array) -> float:
        """Relative distance of ``op`` from the span (Frobenius based)."""
        op = as_complex(op)
        d = np.linalg.norm(op - self.project(op))
        return float(d) / max(1.0, float(np.linalg.norm(op)))

    def contains(self, op: Array, tol: float = TOL) -> bool:
        return self.distance(op) <= tol

    def projector(self) -> Array:
        return dagger(self._vh) @ self._vh

    def gap(self, other: "OperatorSpan") -> float:
        """Principal angle gap: operator norm distance of the two projectors."""
        if self.shape != other.shape:
            raise ValueError("span shape mismatch")
        return opnorm(self.projector() - other.projector())

    def union(self, other: "OperatorSpan") -> "OperatorSpan":
        return OperatorSpan(self.shape, self.basis() + other.basis())


def closed_span(shape: tuple[int, int], ops: Iterable[Array], cutoff: float = RANK_CUTOFF) -> OperatorSpan:
    return OperatorSpan(shape, ops, cutoff=cutoff)


def product_span(left: Iterable[Array], right: Iterable[Array]) -> list[Array]:
    return [as_complex(a) @ as_complex(b) for a in left for b in right]


@dataclass(frozen=True)
class Antiunitary:
    """Antilinear map ``v -> mat @ conj(v)``; unitary ``mat`` gives an antiunitary."""

    mat: Array

    def __call__(self, v: Array) -> Array:
        return self.mat @ np.conj(as_complex(v))

    @property
    def dim(self) -> tuple[int, int]:
        return self.mat.shape

    def inverse(self) -> "Antiunitary":
        return Antiunitary(np.conj(pinv(self.mat)))

    def adjoint(self) -> "Antiunitary":
        # for an isometric antilinear map the adjoint is the inverse on the range
        return Antiunitary(self.mat.T)

    def after_linear(self, m: Array) -> "Antiunitary":
        """Composition ``self o m`` with a linear map ``m``."""
        return Antiunitary(self.mat @ np.conj(as_complex(m)))

    def before_linear(self, m: Array) -> "Antiunitary":
        """Composition ``m o self``."""
        return Antiunitary(as_complex(m) @ self.mat)

    def compose_anti(self, other: "Antiunitary") -> Array:
        """Linear matrix of ``self o other`` for antilinear ``other``."""
        return self.mat @ np.conj(other.mat)

    def defect(self) -> float:
        return unitary_defect(self.mat)


def conjugate_by_antiunitary(a: Antiunitary, x: Array) -> Array:
    """Linear matrix of ``a o x o a^{-1}``; equals ``M conj(x) M^{-1}`` for ``a = M conj``."""
    m = a.mat
    return m @ np.conj(as_complex(x)) @ np.linalg.inv(m)


def psd_factor(gram: Array, cutoff: float = RANK_CUTOFF) -> tuple[Array, Array]:
    """Factor a PSD Gram matrix as ``gram ~ T* T`` with ``T`` of full row rank.

    Returns ``(T, Tplus)`` where ``Tplus`` is the pseudo-inverse of ``T``.
    The rows of ``T`` are the coordinates of the quotient completion.
    """
    gram = as_complex(gram)
    h = 0.5 * (gram + dagger(gram))
    w, u = np.linalg.eigh(h)
    wmax = max(float(w[-1]), 0.0) if w.size else 0.0
    keep = w > cutoff * max(wmax, 1e-300)
    w = w[keep]
    u = u[:, keep]
    t = np.sqrt(w)[:, None] * dagger(u)
    tplus = u * (1.0 / np.sqrt(w))[None, :]
    return t, tplus


def psd_factor_lazy(diag: Array, column: Callable[[int], Array],
                    cutoff: float = 1e-12, max_rank: int | None = None) -> tuple[Array, Array]:
    """Pivoted partial Cholesky of a PSD matrix given through a column oracle.

    ``diag`` holds the diagonal, ``column(j)`` returns column ``j``.  Stops when
    the largest remaining diagonal entry falls below ``cutoff`` times the
    initial maximum.  Returns ``(T, Tplus)`` with ``gram ~ T* T`` as in
    :func:`psd_factor`.
    """
    d = np.asarray(diag, dtype=float).copy()
    n = d.shape[0]
    thresh = cutoff * max(float(d.max(initial=0.0)), 1e-300)
    cols: list[Array] = []
    cap = max_rank if max_rank is not None else n
    lmat = np.zeros((n, 0), dtype=np.complex128)
    while len(cols) < cap:
        j = int(np.argmax(d))
        if d[j] <= thresh:
            break
        c = as_complex(column(j))
        if cols:
            c = c - lmat @ np.conj(lmat[j, :])
        piv = float(c[j].real)
        if piv <= thresh:
            d[j] = 0.0
            continue
        l = c / np.sqrt(piv)
        cols.append(l)
        lmat = np.column_stack(cols)
        d = d - (l * np.conj(l)).real
        np.clip(d, 0.0, None, out=d)
    t = dagger(lmat)
    return t, pinv(t)


def gram_quotient(gram: Array, dense_limit: int = 1500, cutoff: float = RANK_CUTOFF) -> tuple[Array, Array]:
    """Quotient coordinates of a PSD Gram matrix, dense or lazy by size."""
    gram = as_complex(gram)
    n = gram.shape[0]
    if n <= dense_limit:
        return psd_factor(gram, cutoff=cutoff)
    return psd_factor_lazy(np.real(np.diag(gram)), lambda j: gram[:, j])
