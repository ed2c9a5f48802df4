"""Relative tensor products of represented spaces over a common base state.

A concrete module is a space carrying a frame of creation maps from the
standard space of a base state.  Two modules of opposite kind pair to a
relative tensor product: the raw span of simple tensors, with the inner
product contracted through the base, quotiented by its null space.  On the
quotient live the leg operators, flips, lifted frames, operator and
antiunitary tensor products, the associativity identification and the fiber
product of operator algebras.

Everything is tolerance-controlled: constructors return residual reports
instead of trusting algebraic identities.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .fdca import GnsRealization
from .linalg import (
    Antiunitary,
    Array,
    OperatorSpan,
    RANK_CUTOFF,
    as_complex,
    dagger,
    opnorm,
    pinv,
    psd_factor,
    psd_factor_lazy,
    residual,
    unitary_defect,
)

#: raw spans larger than this switch from a dense Gram matrix to a pivoted
#: partial Cholesky fed by a column oracle
DENSE_GRAM_LIMIT = 1500


@dataclass(frozen=True)
class ConcreteModule:
    """Frame of creation maps from a base standard space into a larger one.

    ``base.rep`` is the algebra the frame absorbs by precomposition and the
    one its inner products fall into; ``base.opp_rep`` induces the action
    :meth:`rho` on the carrier space.  The two kinds of module needed for a
    relative tensor product differ only in the side of ``base``.
    """

    base: GnsRealization
    frame: tuple[Array, ...]

    def __post_init__(self):
        frame = tuple(as_complex(f) for f in self.frame)
        if not frame:
            raise ValueError("empty frame")
        m = self.base.dim
        if any(f.shape[1] != m for f in frame):
            raise ValueError("frame columns must match the base space")
        if any(f.shape[0] != frame[0].shape[0] for f in frame):
            raise ValueError("frame rows must agree")
        object.__setattr__(self, "frame", frame)

    @property
    def space_dim(self) -> int:
        return self.frame[0].shape[0]

    @property
    def base_dim(self) -> int:
        return self.base.dim

    @property
    def size(self) -> int:
        return len(self.frame)

    @cached_property
    def stacked(self) -> Array:
        """All frame columns side by side, column ``(i, m)`` = ``frame[i] e_m``."""
        return np.hstack(self.frame)

    @cached_property
    def stacked_pinv(self) -> Array:
        return pinv(self.stacked)

    @cached_property
    def _vec_frame_pinv(self) -> Array:
        cols = np.column_stack([f.reshape(-1) for f in self.frame])
        return pinv(cols)

    @cached_property
    def _rep_frame_pinv(self) -> Array:
        cols = np.column_stack(
            [self.base.rep(b).reshape(-1) for b in self.base.algebra.basis()])
        return pinv(cols)

    def span(self) -> OperatorSpan:
        return OperatorSpan((self.space_dim, self.base_dim), list(self.frame))

    def coeffs(self, xi: Array) -> tuple[Array, float]:
        """Frame coefficients of a map, with the reconstruction residual."""
        xi = as_complex(xi)
        c = self._vec_frame_pinv @ xi.reshape(-1)
        rec = sum(ci * fi for ci, fi in zip(c, self.frame))
        return c, residual(rec, xi)

    def inner(self, xi: Array, eta: Array) -> Array:
        """Base-algebra element representing ``xi* eta`` on the base space."""
        x = dagger(as_complex(xi)) @ as_complex(eta)
        coeff = self._rep_frame_pinv @ x.reshape(-1)
        bas = self.base.algebra.basis()
        return sum(c * b for c, b in zip(coeff, bas))

    @cached_property
    def inner_table(self) -> Array:
        """All pairwise products ``frame[i]* frame[j]`` as one array."""
        k, m = self.size, self.base_dim
        out = np.empty((k, k, m, m), dtype=np.complex128)
        for i, f in enumerate(self.frame):
            fh = dagger(f)
            for j, g in enumerate(self.frame):
                out[i, j] = fh @ g
        return out

    def rho(self, y: Array) -> tuple[Array, float]:
        """Operator acting through the base on the second leg of each frame map.

        Solves ``rho frame[i] = frame[i] base.opp_rep(y)`` for all ``i`` at
        once and returns the solution with its consistency residual.
        """
        act = self.base.opp_rep(y)
        target = np.hstack([f @ act for f in self.frame])
        mat = target @ self.stacked_pinv
        return mat, residual(mat @ self.stacked, target)

    def pruned(self, cutoff: float = RANK_CUTOFF) -> "ConcreteModule":
        """Subset of the frame with the same span, chosen by pivoted QR."""
        cols = np.column_stack([f.reshape(-1) for f in self.frame])
        _, rdiag, piv = scipy.linalg.qr(cols, mode="economic", pivoting=True)
        d = np.abs(np.diag(rdiag))
        rank = int(np.sum(d > cutoff * max(float(d[0]) if d.size else 0.0, 1e-300)))
        keep = sorted(piv[:max(rank, 1)])
        return ConcreteModule(self.base, tuple(self.frame[i] for i in keep))


def verify_module(mod: ConcreteModule) -> dict[str, float]:
    """Residuals of the three module identities and of the induced action."""
    out: dict[str, float] = {}
    full = np.linalg.matrix_rank(mod.stacked, tol=1e-9) == mod.space_dim
    out["spans_space"] = 0.0 if full else 1.0

    span = mod.span()
    bas = mod.base.algebra.basis()
    out["absorbs_base"] = max(
        span.distance(f @ mod.base.rep(b)) for f in mod.frame for b in bas)

    rep_span = OperatorSpan((mod.base_dim, mod.base_dim),
                            [mod.base.rep(b) for b in bas])
    inner_span = OperatorSpan((mod.base_dim, mod.base_dim),
                              [mod.inner_table[i, j]
                               for i in range(mod.size) for j in range(mod.size)])
    out["inner_products_match_base"] = rep_span.gap(inner_span)

    out["action_well_defined"] = max(mod.rho(b)[1] for b in bas)
    rho_one, _ = mod.rho(mod.base.algebra.identity())
    out["action_unital"] = residual(rho_one, np.eye(mod.space_dim))
    return out


def make_module(base: GnsRealization, generators: Sequence[Array],
                strict: bool = True) -> ConcreteModule:
    """Module generated by the given maps, closed under the base action.

    With ``strict`` the full-span and inner-product identities are enforced
    and violations raise; otherwise the caller inspects
    :func:`verify_module` directly.
    """
    raw = [as_complex(g) for g in generators]
    closed = list(raw)
    for g in raw:
        closed.extend(g @ base.rep(b) for b in base.algebra.basis())
    mod = ConcreteModule(base, tuple(closed)).pruned()
    if strict:
        report = verify_module(mod)
        if report["spans_space"] > 0.0:
            raise ValueError("frame does not span the carrier space")
        if report["inner_products_match_base"] > 1e-7:
            raise ValueError("frame inner products do not recover the base algebra")
    return mod


def unit_module(base: GnsRealization) -> ConcreteModule:
    """The base standard space as a module over itself."""
    return ConcreteModule(
        base, tuple(base.rep(b) for b in base.algebra.basis())).pruned()


@dataclass(frozen=True)
class MultiModule:
    """Several module structures on one carrier space, by name."""

    slots: dict[str, ConcreteModule]

    def __post_init__(self):
        dims = {m.space_dim for m in self.slots.values()}
        if len(dims) != 1:
            raise ValueError("slots live on different spaces")


def verify_multi_module(mm: MultiModule) -> dict[str, float]:
    """Pairwise compatibility: each action leaves the other frames invariant."""
    out: dict[str, float] = {}
    for name, mod in mm.slots.items():
        for key, val in verify_module(mod).items():
            out[f"{name}_{key}"] = val
    for name_i, mod_i in mm.slots.items():
        bas = mod_i.base.algebra.basis()
        actions = [mod_i.rho(b)[0] for b in bas]
        for name_j, mod_j in mm.slots.items():
            if name_i == name_j:
                continue
            span_j = mod_j.span()
            out[f"{name_i}_action_preserves_{name_j}"] = max(
                span_j.distance(act @ f) for act in actions for f in mod_j.frame)
    return out


class RelTensor:
    """Relative tensor product of two concrete modules of opposite kind.

    The raw span is indexed by (left frame, base vector, right frame).  Its
    Gram matrix contracts both frames' inner products through the base and
    is quotiented to an orthonormal coordinate system ``T`` (with
    pseudo-inverse ``Tplus``).  Everything downstream works in quotient
    coordinates.
    """

    def __init__(self, left: ConcreteModule, right: ConcreteModule,
                 dense_limit: int = DENSE_GRAM_LIMIT):
        if left.base.side == right.base.side:
            raise ValueError("the two modules must have opposite base sides")
        if left.base_dim != right.base_dim:
            raise ValueError("base spaces differ")
        if not np.allclose(left.base.ref_state.density,
                           right.base.ref_state.density, atol=1e-12):
            raise ValueError("modules do not share the base state")
        self.left = left
        self.right = right
        self.dense_limit = dense_limit

    @property
    def base_dim(self) -> int:
        return self.left.base_dim

    @property
    def raw_dim(self) -> int:
        return self.left.size * self.base_dim * self.right.size

    @cached_property
    def _factor(self) -> tuple[Array, Array]:
        x = self.left.inner_table
        y = self.right.inner_table
        kl, m, kr = self.left.size, self.base_dim, self.right.size
        if self.raw_dim <= self.dense_limit:
            gram = np.einsum("ixmt,jytp->imjxpy", x, y, optimize=True)
            return psd_factor(gram.reshape(self.raw_dim, self.raw_dim))
        xd = x[np.arange(kl), np.arange(kl)]
        yd = y[np.arange(kr), np.arange(kr)]
        diag = np.einsum("imt,jtm->imj", xd, yd, optimize=True).reshape(-1)

        def column(idx: int) -> Array:
            i2, rem = divmod(idx, m * kr)
            m2, j2 = divmod(rem, kr)
            col = np.einsum("imt,jt->imj", x[:, i2], y[:, j2, :, m2],
                            optimize=True)
            return col.reshape(-1)

        return psd_factor_lazy(np.real(diag), column)

    @property
    def quotient(self) -> Array:
        return self._factor[0]

    @property
    def quotient_pinv(self) -> Array:
        return self._factor[1]

    @cached_property
    def dim(self) -> int:
        return self.quotient.shape[0]

    # --- leg operators --------------------------------------------------------

    def ket1(self, xi: Array, tol: float = 1e-7) -> Array:
        """First-leg creation operator of a left-frame element."""
        c, defect = self.left.coeffs(xi)
        if defect > tol:
            raise ValueError("element is not in the left frame span")
        pr = self.right.stacked_pinv.reshape(
            self.right.size, self.base_dim, self.right.space_dim)
        k1 = np.einsum("i,jmn->imjn", c, pr, optimize=True)
        return self.quotient @ k1.reshape(self.raw_dim, self.right.space_dim)

    def ket2(self, eta: Array, tol: float = 1e-7) -> Array:
        """Second-leg creation operator of a right-frame element."""
        d, defect = self.right.coeffs(eta)
        if defect > tol:
            raise ValueError("element is not in the right frame span")
        pl = self.left.stacked_pinv.reshape(
            self.left.size, self.base_dim, self.left.space_dim)
        k2 = np.einsum("j,imn->imjn", d, pl, optimize=True)
        return self.quotient @ k2.reshape(self.raw_dim, self.left.space_dim)

    def bra1(self, xi: Array) -> Array:
        return dagger(self.ket1(xi))

    def bra2(self, eta: Array) -> Array:
        return dagger(self.ket2(eta))

    def simple(self, xi: Array, v: Array, eta: Array) -> Array:
        """Quotient coordinates of a simple tensor."""
        return self.ket1(xi) @ (as_complex(eta) @ as_complex(v))

    # --- flip -----------------------------------------------------------------

    @cached_property
    def _flip(self) -> tuple["RelTensor", Array, float]:
        other = RelTensor(self.right, self.left, self.dense_limit)
        kl, m, kr = self.left.size, self.base_dim, self.right.size
        # reorder the columns of the flipped quotient back to this raw order
        tf = other.quotient.reshape(other.dim, kr, m, kl)
        tf = tf.transpose(0, 3, 2, 1).reshape(other.dim, self.raw_dim)
        sigma = tf @ self.quotient_pinv
        defect = residual(sigma @ self.quotient, tf)
        return other, sigma, defect

    def flipped(self) -> tuple["RelTensor", Array, float]:
        """The product in the opposite order, the flip unitary, its defect."""
        return self._flip

    def debug_json(self) -> dict:
        from .fdca import matrix_to_json
        return {"raw_dim": self.raw_dim, "dim": self.dim,
                "quotient": matrix_to_json(self.quotient)}


def relative_tensor(left: ConcreteModule, right: ConcreteModule,
                    dense_limit: int = DENSE_GRAM_LIMIT) -> RelTensor:
    return RelTensor(left, right, dense_limit)


# --- lifted frames -------------------------------------------------------------

def lift_first(rt: RelTensor, mod: ConcreteModule,
               prune: bool = True) -> ConcreteModule:
    """Transport a module on the left factor to the product space.

    Its maps are pushed through the second-leg creation operators of the
    pairing frame.
    """
    if mod.space_dim != rt.left.space_dim:
        raise ValueError("module does not live on the left factor")
    kets = [rt.ket2(eta) for eta in rt.right.frame]
    frames = tuple(k @ f for k in kets for f in mod.frame)
    lifted = ConcreteModule(mod.base, frames)
    return lifted.pruned() if prune else lifted


def lift_second(rt: RelTensor, mod: ConcreteModule,
                prune: bool = True) -> ConcreteModule:
    """Transport a module on the right factor to the product space."""
    if mod.space_dim != rt.right.space_dim:
        raise ValueError("module does not live on the right factor")
    kets = [rt.ket1(xi) for xi in rt.left.frame]
    frames = tuple(k @ f for k in kets for f in mod.frame)
    lifted = ConcreteModule(mod.base, frames)
    return lifted.pruned() if prune else lifted


# --- operator and antiunitary tensors -------------------------------------------

def _transport_coeffs(target: ConcreteModule, images: Sequence[Array]
                      ) -> tuple[Array, float]:
    cols = []
    defect = 0.0
    for img in images:
        c, d = target.coeffs(img)
        cols.append(c)
        defect = max(defect, d)
    return np.column_stack(cols), defect


def operator_tensor(src: RelTensor, s_op: Array, t_op: Array,
                    target: RelTensor | None = None
                    ) -> tuple[Array, dict[str, float]]:
    """Joint action of two factor operators on the quotient.

    ``s_op`` must carry the source left frame into the target left frame's
    span, ``t_op`` likewise on the right; the report records those transport
    residuals and the well-definedness on the quotient.
    """
    tgt = src if target is None else target
    s_op, t_op = as_complex(s_op), as_complex(t_op)
    c, dc = _transport_coeffs(tgt.left, [s_op @ f for f in src.left.frame])
    d, dd = _transport_coeffs(tgt.right, [t_op @ f for f in src.right.frame])
    tq = tgt.quotient.reshape(tgt.dim, tgt.left.size, tgt.base_dim,
                              tgt.right.size)
    tk = np.einsum("dkml,ki,lj->dimj", tq, c, d, optimize=True)
    tk = tk.reshape(tgt.dim, src.raw_dim)
    mat = tk @ src.quotient_pinv
    report = {"left_transport": dc, "right_transport": dd,
              "well_defined": residual(mat @ src.quotient, tk)}
    return mat, report


def first_leg_operator(rt: RelTensor, s_op: Array) -> tuple[Array, dict[str, float]]:
    """Quotient action of a first-factor operator, taken past second-leg kets.

    Unlike ``operator_tensor`` this does not ask ``s_op`` to preserve the
    pairing frame; it is well defined exactly when ``s_op`` commutes with
    the pairing action of the base on the first factor, and the residual
    records the failure.
    """
    s_op = as_complex(s_op)
    kets = [rt.ket2(eta) for eta in rt.right.frame]
    src = np.hstack(kets)
    tgt = np.hstack([k @ s_op for k in kets])
    mat = tgt @ pinv(src)
    return mat, {"well_defined": residual(mat @ src, tgt)}


def second_leg_operator(rt: RelTensor, t_op: Array) -> tuple[Array, dict[str, float]]:
    """Quotient action of a second-factor operator, taken past first-leg kets."""
    t_op = as_complex(t_op)
    kets = [rt.ket1(xi) for xi in rt.left.frame]
    src = np.hstack(kets)
    tgt = np.hstack([k @ t_op for k in kets])
    mat = tgt @ pinv(src)
    return mat, {"well_defined": residual(mat @ src, tgt)}


def antiunitary_tensor(src: RelTensor, s_anti: Antiunitary, t_anti: Antiunitary,
                       target: RelTensor | None = None,
                       middle: Antiunitary | None = None
                       ) -> tuple[Antiunitary, dict[str, float]]:
    """Joint antiunitary action, conjugating through the base in the middle.

    Frame elements are transported by sandwiching with the middle
    conjugation, which exchanges the two kinds of module; the target product
    must pair the transported frames (built by the caller, typically with
    the factor spaces swapped in kind).
    """
    mid = src.left.base.modular_conjugation if middle is None else middle
    mid_inv = mid.inverse().mat
    tgt = src if target is None else target
    s_imgs = [s_anti.mat @ np.conj(f) @ np.conj(mid_inv) for f in src.left.frame]
    t_imgs = [t_anti.mat @ np.conj(f) @ np.conj(mid_inv) for f in src.right.frame]
    c, dc = _transport_coeffs(tgt.left, s_imgs)
    d, dd = _transport_coeffs(tgt.right, t_imgs)
    tq = tgt.quotient.reshape(tgt.dim, tgt.left.size, tgt.base_dim,
                              tgt.right.size)
    tk = np.einsum("dkml,ki,mn,lj->dinj", tq, c, mid.mat, d, optimize=True)
    tk = tk.reshape(tgt.dim, src.raw_dim)
    mat = tk @ np.conj(src.quotient_pinv)
    report = {"left_transport": dc, "right_transport": dd,
              "well_defined": residual(mat @ np.conj(src.quotient), tk)}
    return Antiunitary(mat), report


def unit_contraction(rt: RelTensor, leg: int) -> tuple[Array, dict[str, float]]:
    """Isomorphism absorbing a unit-module factor into the other space.

    With ``leg == 2`` the right factor is the base standard space and the
    map sends a simple tensor to the left frame element applied to the
    acted-on base vector; ``leg == 1`` mirrors this.
    """
    kl, m, kr = rt.left.size, rt.base_dim, rt.right.size
    if leg == 2:
        if rt.right.space_dim != m:
            raise ValueError("the right factor is not the base space")
        target = np.zeros((rt.left.space_dim, rt.raw_dim), dtype=np.complex128)
        idx = 0
        for i in range(kl):
            for mm in range(m):
                for j in range(kr):
                    target[:, idx] = rt.left.frame[i] @ (rt.right.frame[j][:, mm])
                    idx += 1
    elif leg == 1:
        if rt.left.space_dim != m:
            raise ValueError("the left factor is not the base space")
        target = np.zeros((rt.right.space_dim, rt.raw_dim), dtype=np.complex128)
        idx = 0
        for i in range(kl):
            for mm in range(m):
                for j in range(kr):
                    target[:, idx] = rt.right.frame[j] @ (rt.left.frame[i][:, mm])
                    idx += 1
    else:
        raise ValueError("leg must be 1 or 2")
    mat = target @ rt.quotient_pinv
    report = {"well_defined": residual(mat @ rt.quotient, target),
              "unitary": unitary_defect(mat)}
    return mat, report


# --- associativity ---------------------------------------------------------------

@dataclass(frozen=True)
class TripleTensor:
    """Both bracketings of a threefold product with their identification."""

    left_assoc: RelTensor
    right_assoc: RelTensor
    assoc: Array
    report: dict[str, float]


def assoc_unitary(t_left: RelTensor, rt12: RelTensor,
                  t_right: RelTensor, rt23: RelTensor
                  ) -> tuple[Array, dict[str, float]]:
    """Identification of the two bracketing orders through spanning frames.

    ``t_left`` pairs the product ``rt12`` with the third factor, ``t_right``
    the first factor with ``rt23``; the frames run over the outer pairing
    frames and a basis of the middle space.
    """
    k1 = [rt12.ket1(xi) for xi in rt12.left.frame]
    kr1 = [t_right.ket1(xi) for xi in rt12.left.frame]
    fl_blocks = []
    fr_blocks = []
    for c_l in rt23.right.frame:
        mid_l = t_left.ket2(c_l)
        mid_r = rt23.ket2(c_l)
        for k, kr in zip(k1, kr1):
            fl_blocks.append(mid_l @ k)
            fr_blocks.append(kr @ mid_r)
    f_left = np.hstack(fl_blocks)
    f_right = np.hstack(fr_blocks)
    mat = f_right @ pinv(f_left)
    report = {
        "left_frame_spans": 0.0 if np.linalg.matrix_rank(f_left, tol=1e-9)
        == t_left.dim else 1.0,
        "right_frame_spans": 0.0 if np.linalg.matrix_rank(f_right, tol=1e-9)
        == t_right.dim else 1.0,
        "well_defined": residual(mat @ f_left, f_right),
        "unitary": unitary_defect(mat),
    }
    return mat, report


def triple_tensor(rt12: RelTensor, rt23: RelTensor,
                  dense_limit: int = DENSE_GRAM_LIMIT) -> TripleTensor:
    """Threefold product built in both orders and identified.

    ``rt12.right`` and ``rt23.left`` must live on the same middle space.
    """
    if rt12.right.space_dim != rt23.left.space_dim:
        raise ValueError("middle spaces differ")
    t_left = RelTensor(lift_second(rt12, rt23.left), rt23.right, dense_limit)
    t_right = RelTensor(rt12.left, lift_first(rt23, rt12.right), dense_limit)
    assoc, report = assoc_unitary(t_left, rt12, t_right, rt23)
    return TripleTensor(t_left, t_right, assoc, report)


def sigma23(src_outer: RelTensor, src_inner: RelTensor,
            tgt_outer: RelTensor, tgt_inner: RelTensor
            ) -> tuple[Array, dict[str, float]]:
    """Exchange of the second and third factors of two nested products.

    Both products are right-associated on their inner factor: the source is
    ``(H (x) K) (x) L`` with ``src_inner`` pairing ``H`` and ``K``; the target
    swaps ``K`` and ``L``.  Frames run over the inner second-leg frame, the
    outer second-leg frame and a basis of the first space.
    """
    f_src = []
    f_tgt = []
    for c_l in src_outer.right.frame:
        src_mid = src_outer.ket2(c_l)
        tgt_in = tgt_inner.ket2(c_l)
        for b_j in src_inner.right.frame:
            src_cols = src_mid @ src_inner.ket2(b_j)
            tgt_cols = tgt_outer.ket2(b_j) @ tgt_in
            f_src.append(src_cols)
            f_tgt.append(tgt_cols)
    f_src_m = np.hstack(f_src)
    f_tgt_m = np.hstack(f_tgt)
    mat = f_tgt_m @ pinv(f_src_m)
    report = {
        "frame_spans": 0.0 if np.linalg.matrix_rank(f_src_m, tol=1e-9)
        == src_outer.dim else 1.0,
        "well_defined": residual(mat @ f_src_m, f_tgt_m),
        "unitary": unitary_defect(mat),
    }
    return mat, report


# --- fiber product ----------------------------------------------------------------

@dataclass(frozen=True)
class FiberProduct:
    """Largest operator space on a quotient respecting both leg closures."""

    tensor: RelTensor
    algebra: OperatorSpan
    report: dict[str, float]

    @property
    def dim(self) -> int:
        return self.algebra.dim


def fiber_membership(rt: RelTensor, z: Array,
                     left_ops: Sequence[Array], right_ops: Sequence[Array]
                     ) -> dict[str, float]:
    """Residuals of the four leg-closure conditions for one operator."""
    z = as_complex(z)
    k1 = [rt.ket1(xi) for xi in rt.left.frame]
    k2 = [rt.ket2(eta) for eta in rt.right.frame]
    span1 = OperatorSpan(k1[0].shape, [k @ c for k in k1 for c in right_ops])
    span2 = OperatorSpan(k2[0].shape, [k @ a for k in k2 for a in left_ops])
    zh = dagger(z)
    return {
        "first_leg": max(span1.distance(z @ k) for k in k1),
        "first_leg_adjoint": max(span1.distance(zh @ k) for k in k1),
        "second_leg": max(span2.distance(z @ k) for k in k2),
        "second_leg_adjoint": max(span2.distance(zh @ k) for k in k2),
    }


def _intersect_constraint(basis: list[Array], apply: Callable[[Array], Array],
                          cutoff: float = 1e-9) -> list[Array]:
    """Shrink a spanning set to the kernel of a linear map given by its action.

    The rank cutoff is floored at 1 so that a constraint matrix made of pure
    float noise (every basis element already satisfies the condition) counts
    as rank zero; basis elements are kept at unit scale by the callers.
    """
    if not basis:
        return basis
    cols = np.column_stack([apply(b).reshape(-1) for b in basis])
    _, s, vh = np.linalg.svd(cols, full_matrices=True)
    scale = max(float(s[0]) if s.size else 0.0, 1.0)
    rank = int(np.sum(s > cutoff * scale))
    combos = np.conj(vh[rank:])
    return [sum(c * b for c, b in zip(row, basis)) for row in combos]


def _intersect_antilinear(basis: list[Array], apply: Callable[[Array], Array],
                          cutoff: float = 1e-9) -> list[Array]:
    """Kernel of an antilinear condition, computed on the real coefficient form.

    The solution set is a complex subspace because the condition is
    compatible with multiplication by ``i``.
    """
    if not basis:
        return basis
    real_basis = basis + [1j * b for b in basis]
    cols = np.column_stack([apply(b).reshape(-1) for b in real_basis])
    big = np.vstack([cols.real, cols.imag])
    _, s, vh = np.linalg.svd(big, full_matrices=True)
    scale = max(float(s[0]) if s.size else 0.0, 1.0)
    rank = int(np.sum(s > cutoff * scale))
    out = [sum(c * b for c, b in zip(row, real_basis)) for row in vh[rank:]]
    # the real kernel double-counts the complex dimension; re-extract a basis
    span = OperatorSpan(basis[0].shape, out) if out else None
    return span.basis() if span is not None else []


def fiber_product(rt: RelTensor, left_ops: Sequence[Array],
                  right_ops: Sequence[Array], passes: int = 5
                  ) -> FiberProduct:
    """Solve the leg-closure conditions for the joint operator space.

    The space starts as all operators on the quotient and is cut down by one
    constraint family at a time; adjoint families are handled on the real
    form of the remaining coefficients.  A closure verification pass follows
    and, if products or adjoints escape, the span is intersected with its
    closure defectors up to ``passes`` times.  A zero-dimensional outcome is
    reported, not raised.
    """
    d = rt.dim
    left_ops = [as_complex(a) for a in left_ops]
    right_ops = [as_complex(c) for c in right_ops]
    k1 = [rt.ket1(xi) for xi in rt.left.frame]
    k2 = [rt.ket2(eta) for eta in rt.right.frame]
    span1 = OperatorSpan(k1[0].shape, [k @ c for k in k1 for c in right_ops])
    span2 = OperatorSpan(k2[0].shape, [k @ a for k in k2 for a in left_ops])

    def defect1(x: Array) -> Array:
        return x - span1.project(x)

    def defect2(x: Array) -> Array:
        return x - span2.project(x)

    basis: list[Array] = [m.reshape(d, d) for m in np.eye(d * d, dtype=np.complex128)
                          .reshape(d * d, d, d)]
    for k in k1:
        basis = _intersect_constraint(basis, lambda z, k=k: defect1(z @ k))
    for k in k2:
        basis = _intersect_constraint(basis, lambda z, k=k: defect2(z @ k))
    for k in k1:
        basis = _intersect_antilinear(basis, lambda z, k=k: defect1(dagger(z) @ k))
    for k in k2:
        basis = _intersect_antilinear(basis, lambda z, k=k: defect2(dagger(z) @ k))

    algebra = OperatorSpan((d, d), basis)
    report: dict[str, float] = {"closed_under_product": 0.0,
                                "closed_under_adjoint": 0.0}
    for _ in range(passes):
        ops = algebra.basis()
        if not ops:
            break
        prod_defect = max(algebra.distance(x @ y) for x in ops for y in ops)
        adj_defect = max(algebra.distance(dagger(x)) for x in ops)
        report["closed_under_product"] = prod_defect
        report["closed_under_adjoint"] = adj_defect
        if max(prod_defect, adj_defect) <= 1e-9:
            break
        # shrink to the part whose products and adjoints stay inside
        proj = algebra.project
        kept = _intersect_constraint(
            ops, lambda z: np.concatenate(
                [(z @ y - proj(z @ y)).reshape(-1) for y in ops]))
        kept = _intersect_antilinear(
            kept, lambda z: (dagger(z) - proj(dagger(z))).reshape(-1))
        algebra = OperatorSpan((d, d), kept)
    report["dimension"] = float(algebra.dim)
    return FiberProduct(rt, algebra, report)
