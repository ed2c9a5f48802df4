"""Finite groupoids, Haar systems, and the groupoid model unitaries.

A finite groupoid is stored as explicit source/target/composition tables and
every axiom is checked exhaustively on construction.  On top of a groupoid, a
Haar system (one weight per arrow, constant along target fibers in the sense
of left invariance) and a full-support unit measure produce the arrow
measures, their reverses, and the positive modulus cocycle.

From that data the module builds the classical model unitary acting between
the two weighted pair spaces (composable pairs and common-target pairs),
together with its companion inversion unitary, its legs (multiplication and
convolution operators), and a pentagon certificate.  These serve as
independent oracles for the operator-algebraic constructions assembled
elsewhere in the package.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from math import isqrt

import numpy as np

from .cqg import Comultiplication, QuantumGroupoidBundle, canonical_modules
from .fdca import (
    BlockAlgebra,
    FaithfulState,
    functional_density,
    gns_realization,
    opposite_realization,
)
from .linalg import (
    Array,
    OperatorSpan,
    as_complex,
    dagger,
    direct_sum,
    nullspace,
    opnorm,
    pinv,
    residual,
    solve_via_frame,
    unitary_defect,
    vec,
)
from .modstruct import AlgMap, ModuleStructure, QuantumGraph, verify_module_structure
from .rtp import RelTensor, first_leg_operator, relative_tensor, second_leg_operator


class GroupoidError(ValueError):
    """A composition table violates one of the groupoid axioms."""


class FiniteGroupoid:
    """A finite groupoid given by explicit tables.

    Arrows compose like functions: ``table[(a, b)]`` is defined exactly when
    ``source[a] == target[b]``, and then the product has the source of ``b``
    and the target of ``a``.  Construction validates associativity, unit
    arrows, and inverses on every applicable tuple; violations raise
    :class:`GroupoidError` naming the offending arrows.
    """

    def __init__(self, units: Sequence, arrows: Sequence, source: Mapping,
                 target: Mapping, table: Mapping, inverse: Mapping):
        self.units = tuple(units)
        self.arrows = tuple(arrows)
        self.source = dict(source)
        self.target = dict(target)
        self.table = dict(table)
        self.inverse = dict(inverse)
        self.unit_arrows = self._validate()

    def product(self, a, b):
        return self.table[(a, b)]

    def is_composable(self, a, b) -> bool:
        return self.source[a] == self.target[b]

    def unit_arrow(self, u):
        return self.unit_arrows[u]

    def target_fiber(self, u) -> tuple:
        return tuple(x for x in self.arrows if self.target[x] == u)

    def source_fiber(self, u) -> tuple:
        return tuple(x for x in self.arrows if self.source[x] == u)

    def composable_pairs(self) -> tuple:
        return tuple((a, b) for a in self.arrows for b in self.arrows
                     if self.is_composable(a, b))

    def arrow_position(self, x) -> int:
        return self._positions[x]

    def _validate(self) -> dict:
        if len(set(self.units)) != len(self.units):
            raise GroupoidError("duplicate unit labels")
        if len(set(self.arrows)) != len(self.arrows):
            raise GroupoidError("duplicate arrow labels")
        self._positions = {x: i for i, x in enumerate(self.arrows)}
        arrow_set = set(self.arrows)
        for x in self.arrows:
            if x not in self.source or x not in self.target:
                raise GroupoidError(f"arrow {x!r} lacks a source or target")
            if self.source[x] not in self.units or self.target[x] not in self.units:
                raise GroupoidError(f"arrow {x!r} has an endpoint outside the unit set")
        expected = {(a, b) for a in self.arrows for b in self.arrows
                    if self.source[a] == self.target[b]}
        missing = expected - set(self.table)
        extra = set(self.table) - expected
        if missing:
            raise GroupoidError(f"composable pair {sorted(missing)[0]!r} has no product")
        if extra:
            raise GroupoidError(f"product defined on non-composable pair {sorted(extra)[0]!r}")
        for (a, b), c in self.table.items():
            if c not in arrow_set:
                raise GroupoidError(f"product of ({a!r}, {b!r}) is not an arrow: {c!r}")
            if self.source[c] != self.source[b] or self.target[c] != self.target[a]:
                raise GroupoidError(
                    f"product of ({a!r}, {b!r}) has wrong endpoints: {c!r}")
        for a in self.arrows:
            for b in self.target_fiber(self.source[a]):
                for c in self.target_fiber(self.source[b]):
                    left = self.table[(self.table[(a, b)], c)]
                    right = self.table[(a, self.table[(b, c)])]
                    if left != right:
                        raise GroupoidError(
                            f"associativity fails on ({a!r}, {b!r}, {c!r}): "
                            f"{left!r} != {right!r}")
        unit_arrows = {}
        for u in self.units:
            found = [e for e in self.arrows
                     if self.source[e] == u and self.target[e] == u
                     and all(self.table[(e, b)] == b for b in self.target_fiber(u))
                     and all(self.table[(a, e)] == a for a in self.source_fiber(u))]
            if len(found) != 1:
                raise GroupoidError(
                    f"unit {u!r} has {len(found)} identity arrows, expected one")
            unit_arrows[u] = found[0]
        if set(self.inverse) != arrow_set:
            raise GroupoidError("inverse table does not cover the arrow set")
        for a in self.arrows:
            b = self.inverse[a]
            if b not in arrow_set:
                raise GroupoidError(f"inverse of {a!r} is not an arrow: {b!r}")
            if self.inverse[b] != a:
                raise GroupoidError(f"inversion is not involutive at {a!r}")
            if self.source[b] != self.target[a] or self.target[b] != self.source[a]:
                raise GroupoidError(f"inverse of {a!r} has wrong endpoints")
            if self.table[(a, b)] != unit_arrows[self.target[a]]:
                raise GroupoidError(f"{a!r} composed with its inverse misses the unit")
            if self.table[(b, a)] != unit_arrows[self.source[a]]:
                raise GroupoidError(f"inverse of {a!r} composed back misses the unit")
        return unit_arrows


def make_finite_groupoid(data: Mapping) -> FiniteGroupoid:
    """Build a validated groupoid from the table-based input mapping.

    Expected keys: ``units`` (labels), ``arrows`` (list of mappings with
    ``id``/``src``/``tgt``), ``compose`` (list of ``[a, b, ab]`` triples),
    ``inverse`` (mapping).  Extra keys such as measure data are ignored here.
    """
    arrows = [entry["id"] for entry in data["arrows"]]
    source = {entry["id"]: entry["src"] for entry in data["arrows"]}
    target = {entry["id"]: entry["tgt"] for entry in data["arrows"]}
    table = {(a, b): c for a, b, c in data["compose"]}
    return FiniteGroupoid(data["units"], arrows, source, target, table,
                          data["inverse"])


def pair_groupoid(n: int) -> FiniteGroupoid:
    """Groupoid of ordered pairs over ``n`` points: (i,j)(j,k) = (i,k)."""
    units = list(range(n))
    arrows = [(i, j) for i in range(n) for j in range(n)]
    source = {(i, j): j for i, j in arrows}
    target = {(i, j): i for i, j in arrows}
    table = {((i, j), (j2, k)): (i, k)
             for i, j in arrows for j2, k in arrows if j == j2}
    inverse = {(i, j): (j, i) for i, j in arrows}
    return FiniteGroupoid(units, arrows, source, target, table, inverse)


def one_point_groupoid() -> FiniteGroupoid:
    return pair_groupoid(1)


def cyclic_group_groupoid(n: int) -> FiniteGroupoid:
    """The cyclic group of order ``n`` as a one-unit groupoid."""
    units = ["*"]
    arrows = list(range(n))
    source = {a: "*" for a in arrows}
    target = {a: "*" for a in arrows}
    table = {(a, b): (a + b) % n for a in arrows for b in arrows}
    inverse = {a: (-a) % n for a in arrows}
    return FiniteGroupoid(units, arrows, source, target, table, inverse)


def transformation_groupoid(n: int, points: Sequence,
                            step: Mapping) -> FiniteGroupoid:
    """Action groupoid of the order-``n`` cyclic shift ``step`` on ``points``.

    Arrows are pairs ``(g, p)`` with source ``p`` and target ``step^g(p)``;
    ``(g, step^h(p)) * (h, p) = (g + h mod n, p)``.
    """
    def power(g, p):
        for _ in range(g):
            p = step[p]
        return p

    for p in points:
        if power(n, p) != p:
            raise GroupoidError(f"step does not have order dividing {n} at {p!r}")
    arrows = [(g, p) for g in range(n) for p in points]
    source = {(g, p): p for g, p in arrows}
    target = {(g, p): power(g, p) for g, p in arrows}
    table = {}
    for g, q in arrows:
        for h, p in arrows:
            if q == power(h, p):
                table[((g, q), (h, p))] = ((g + h) % n, p)
    inverse = {(g, p): ((-g) % n, power(g, p)) for g, p in arrows}
    return FiniteGroupoid(list(points), arrows, source, target, table, inverse)


def normalized_haar(g: FiniteGroupoid) -> dict:
    """The uniform probability weight on each target fiber."""
    return {x: 1.0 / len(g.target_fiber(g.target[x])) for x in g.arrows}


def counting_haar(g: FiniteGroupoid) -> dict:
    return {x: 1.0 for x in g.arrows}


def uniform_unit_measure(g: FiniteGroupoid) -> dict:
    return {u: 1.0 / len(g.units) for u in g.units}


@dataclass(frozen=True)
class HaarMeasureData:
    """A groupoid with a left Haar system and a full-support unit measure.

    ``haar[x]`` is the fiber weight of the arrow ``x`` inside the fiber over
    its own target.  ``arrow_measure`` integrates the fibers against the unit
    measure, ``reverse_measure`` is its pullback under inversion, and
    ``modulus`` is their positive ratio, a cocycle for composition.
    """

    groupoid: FiniteGroupoid
    haar: dict
    unit_measure: dict
    arrow_measure: dict
    reverse_measure: dict
    modulus: dict
    report: dict

    def modulus_vector(self) -> Array:
        return np.array([self.modulus[x] for x in self.groupoid.arrows])

    def arrow_measure_vector(self) -> Array:
        return np.array([self.arrow_measure[x] for x in self.groupoid.arrows])

    def reverse_measure_vector(self) -> Array:
        return np.array([self.reverse_measure[x] for x in self.groupoid.arrows])

    def is_counting(self) -> bool:
        return all(abs(w - 1.0) <= 1e-12 for w in self.haar.values())


def haar_and_measure(g: FiniteGroupoid, haar: Mapping, unit_measure: Mapping,
                     strict: bool = True, tol: float = 1e-12) -> HaarMeasureData:
    """Attach measure data to a groupoid and certify it.

    Left invariance is checked on every point mass: translating a target
    fiber by an arrow must carry the fiber weights along.  With ``strict``
    the check raises on failure; otherwise the defect only lands in the
    report, which also carries the modulus cocycle and inversion residuals.
    """
    haar = {x: float(haar[x]) for x in g.arrows}
    unit_measure = {u: float(unit_measure[u]) for u in g.units}
    if any(w <= 0 for w in haar.values()):
        raise ValueError("haar weights must be positive")
    if any(w <= 0 for w in unit_measure.values()):
        raise ValueError("unit measure must have full support")
    total = sum(unit_measure.values())
    unit_measure = {u: w / total for u, w in unit_measure.items()}

    invariance = 0.0
    worst = None
    for z in g.arrows:
        for y in g.target_fiber(g.target[z]):
            moved = g.product(g.inverse[z], y)
            gap = abs(haar[moved] - haar[y])
            if gap > invariance:
                invariance, worst = gap, (z, y)
    if strict and invariance > tol:
        raise ValueError(
            f"weights are not left invariant: translating {worst[1]!r} by "
            f"{worst[0]!r} changes the weight by {invariance:.3e}")

    arrow_measure = {x: haar[x] * unit_measure[g.target[x]] for x in g.arrows}
    reverse_measure = {x: arrow_measure[g.inverse[x]] for x in g.arrows}
    modulus = {x: arrow_measure[x] / reverse_measure[x] for x in g.arrows}
    cocycle = max((abs(modulus[g.product(a, b)] - modulus[a] * modulus[b])
                   for a, b in g.composable_pairs()), default=0.0)
    inversion = max(abs(modulus[g.inverse[x]] * modulus[x] - 1.0)
                    for x in g.arrows)
    report = {
        "left_invariance": invariance,
        "modulus_cocycle": cocycle,
        "modulus_inversion": inversion,
        "unit_measure_rescale": abs(total - 1.0),
    }
    return HaarMeasureData(g, haar, unit_measure, arrow_measure,
                           reverse_measure, modulus, report)


@dataclass(frozen=True)
class WeightedSpace:
    """An enumerated finite set carrying positive weights.

    Vectors over the set are stored in weighted coordinates: the plain
    function ``f`` corresponds to the vector with entries ``sqrt(w) * f``,
    which makes the natural measure inner product the standard one.
    """

    points: tuple
    weights: Array

    @cached_property
    def position(self) -> dict:
        return {p: i for i, p in enumerate(self.points)}

    @property
    def dim(self) -> int:
        return len(self.points)

    def to_weighted(self, values: Mapping | Array) -> Array:
        if isinstance(values, Mapping):
            flat = np.array([complex(values.get(p, 0.0)) for p in self.points])
        else:
            flat = np.asarray(values, dtype=np.complex128)
        return np.sqrt(self.weights) * flat

    def point_mass(self, p) -> Array:
        out = np.zeros(self.dim, dtype=np.complex128)
        out[self.position[p]] = 1.0
        return out


def arrow_space(hm: HaarMeasureData) -> WeightedSpace:
    g = hm.groupoid
    return WeightedSpace(g.arrows, hm.arrow_measure_vector())


def composable_pair_space(hm: HaarMeasureData) -> WeightedSpace:
    """Pairs (x, y) with source(x) = target(y), fibered over the arrows."""
    g = hm.groupoid
    points, weights = [], []
    for x in g.arrows:
        for y in g.target_fiber(g.source[x]):
            points.append((x, y))
            weights.append(hm.arrow_measure[x] * hm.haar[y])
    return WeightedSpace(tuple(points), np.array(weights))


def common_target_pair_space(hm: HaarMeasureData) -> WeightedSpace:
    """Pairs (x, y) with target(x) = target(y)."""
    g = hm.groupoid
    points, weights = [], []
    for x in g.arrows:
        for y in g.target_fiber(g.target[x]):
            points.append((x, y))
            weights.append(hm.arrow_measure[x] * hm.haar[y])
    return WeightedSpace(tuple(points), np.array(weights))


def _triple_space(hm: HaarMeasureData, second: str, third: str) -> WeightedSpace:
    """Triples (x, y, z) cut out by fiber conditions.

    ``second`` anchors target(y) at the source or target of x; ``third``
    anchors target(z) at one of "sx", "tx", "sy", "ty".
    """
    g = hm.groupoid

    def anchor(code: str, x, y):
        ref = x if code[1] == "x" else y
        return g.source[ref] if code[0] == "s" else g.target[ref]

    points, weights = [], []
    for x in g.arrows:
        for y in g.target_fiber(anchor(second + "x", x, None)):
            for z in g.target_fiber(anchor(third, x, y)):
                points.append((x, y, z))
                weights.append(hm.arrow_measure[x] * hm.haar[y] * hm.haar[z])
    return WeightedSpace(tuple(points), np.array(weights))


def _substitution(src: WeightedSpace, tgt: WeightedSpace,
                  move: Callable) -> Array:
    """The weighted-coordinate matrix of a pullback along ``move``.

    ``move`` sends each target point to the source point it reads from; the
    entry carries the square-root weight ratio so that measure-preserving
    substitutions become unitary.
    """
    mat = np.zeros((tgt.dim, src.dim), dtype=np.complex128)
    for i, p in enumerate(tgt.points):
        q = move(p)
        j = src.position[q]
        mat[i, j] = np.sqrt(tgt.weights[i] / src.weights[j])
    return mat


def multiplication_operator(hm: HaarMeasureData, values: Mapping | Array) -> Array:
    """Pointwise multiplication on the weighted arrow space (a diagonal)."""
    g = hm.groupoid
    if isinstance(values, Mapping):
        flat = [complex(values.get(x, 0.0)) for x in g.arrows]
    else:
        flat = np.asarray(values, dtype=np.complex128)
    return np.diag(np.asarray(flat, dtype=np.complex128))


def convolution_operator(hm: HaarMeasureData, values: Mapping | Array) -> Array:
    """Left convolution by a function, on the weighted arrow space.

    Each arrow in the target fiber of the output point contributes its
    function value, damped by the square root of the modulus, reading the
    input at the translated point.
    """
    g = hm.groupoid
    if not isinstance(values, Mapping):
        values = dict(zip(g.arrows, np.asarray(values, dtype=np.complex128)))
    pos = {x: i for i, x in enumerate(g.arrows)}
    nu = hm.arrow_measure
    mat = np.zeros((len(g.arrows), len(g.arrows)), dtype=np.complex128)
    for y in g.arrows:
        for x in g.target_fiber(g.target[y]):
            if x not in values:
                continue
            src = g.product(g.inverse[x], y)
            mat[pos[y], pos[src]] += (complex(values[x])
                                      * hm.modulus[x] ** -0.5 * hm.haar[x]
                                      * np.sqrt(nu[y] / nu[src]))
    return mat


def inversion_conjugate(values: Mapping, g: FiniteGroupoid) -> dict:
    """The adjoint symbol of a convolution: invert and conjugate pointwise."""
    return {x: np.conj(complex(values.get(g.inverse[x], 0.0))) for x in g.arrows}


@dataclass(frozen=True)
class ReferenceUnitary:
    """The groupoid model unitary between the two weighted pair spaces.

    ``unitary`` reads a function on composable pairs at (x, x^{-1} y) to
    produce one on common-target pairs; ``inversion`` is the companion
    unitary on the arrow space that reverses arrows (modulus-corrected so it
    is a plain permutation in weighted coordinates).  The report certifies
    unitarity, the pentagon identity on the five triple spaces, and that the
    two slice legs span exactly the multiplication and convolution algebras.
    """

    haar_data: HaarMeasureData
    source_space: WeightedSpace
    target_space: WeightedSpace
    unitary: Array
    inversion: Array
    report: dict

    def second_leg_slice(self, out_arrow, in_arrow) -> Array:
        """Contract the second legs against point masses, leaving leg one."""
        g = self.haar_data.groupoid
        n = len(g.arrows)
        out = np.zeros((n, n), dtype=np.complex128)
        for (x, y), i in self.target_space.position.items():
            if y != out_arrow:
                continue
            for (xs, ys), j in self.source_space.position.items():
                if ys != in_arrow:
                    continue
                out[g.arrow_position(x), g.arrow_position(xs)] = self.unitary[i, j]
        return out

    def first_leg_slice(self, out_arrow, in_arrow) -> Array:
        g = self.haar_data.groupoid
        n = len(g.arrows)
        out = np.zeros((n, n), dtype=np.complex128)
        for (x, y), i in self.target_space.position.items():
            if x != out_arrow:
                continue
            for (xs, ys), j in self.source_space.position.items():
                if xs != in_arrow:
                    continue
                out[g.arrow_position(y), g.arrow_position(ys)] = self.unitary[i, j]
        return out


def _pentagon_residual(hm: HaarMeasureData) -> float:
    """Compose the five substitution maps on triples and compare the routes."""
    g = hm.groupoid
    inv, mul = g.inverse, g.table
    t_start = _triple_space(hm, "s", "sy")
    t_after23 = _triple_space(hm, "s", "sx")
    t_after13 = _triple_space(hm, "s", "tx")
    t_end = _triple_space(hm, "t", "tx")
    t_mid = _triple_space(hm, "t", "sy")

    def shift_last_by(code):
        def move(p):
            x, y, z = p
            ref = x if code == "x" else y
            return (x, y, mul[(inv[ref], z)])
        return move

    def shift_middle(p):
        x, y, z = p
        return (x, mul[(inv[x], y)], z)

    act23 = _substitution(t_start, t_after23, shift_last_by("y"))
    act13 = _substitution(t_after23, t_after13, shift_last_by("x"))
    act12 = _substitution(t_after13, t_end, shift_middle)
    act12_first = _substitution(t_start, t_mid, shift_middle)
    act23_second = _substitution(t_mid, t_end, shift_last_by("y"))
    return residual(act12 @ act13 @ act23, act23_second @ act12_first)


def build_reference_VG(hm: HaarMeasureData) -> ReferenceUnitary:
    """Assemble the model unitary for a measured groupoid and certify it."""
    g = hm.groupoid
    src = composable_pair_space(hm)
    tgt = common_target_pair_space(hm)
    mat = _substitution(src, tgt,
                        lambda p: (p[0], g.product(g.inverse[p[0]], p[1])))
    arrows = arrow_space(hm)
    inversion = np.zeros((arrows.dim, arrows.dim), dtype=np.complex128)
    for x in g.arrows:
        i = arrows.position[x]
        j = arrows.position[g.inverse[x]]
        inversion[i, j] = (np.sqrt(hm.arrow_measure[x] / hm.arrow_measure[g.inverse[x]])
                           * hm.modulus[x] ** -0.5)

    report = {
        "unitary": unitary_defect(mat),
        "inversion_unitary": unitary_defect(inversion),
        "inversion_involutive": residual(inversion @ inversion,
                                         np.eye(arrows.dim)),
        "pentagon": _pentagon_residual(hm),
    }
    ref = ReferenceUnitary(hm, src, tgt, mat, inversion, report)

    mult_span = OperatorSpan((arrows.dim, arrows.dim),
                             [np.diag(arrows.point_mass(x)) for x in g.arrows])
    conv_span = OperatorSpan((arrows.dim, arrows.dim),
                             [convolution_operator(hm, {x: 1.0})
                              for x in g.arrows])
    second_slices = OperatorSpan((arrows.dim, arrows.dim),
                                 [ref.second_leg_slice(b, a)
                                  for b in g.arrows for a in g.arrows])
    first_slices = OperatorSpan((arrows.dim, arrows.dim),
                                [ref.first_leg_slice(b, a)
                                 for b in g.arrows for a in g.arrows])
    report["second_slices_match_multiplication"] = second_slices.gap(mult_span)
    report["first_slices_match_convolution"] = first_slices.gap(conv_span)
    unit_mask = {g.unit_arrow(u): 1.0 for u in g.units}
    report["unit_indicator_fixed"] = _fixed_indicator_residual(ref, unit_mask)
    return ref


def _first_leg_insertion(ref: ReferenceUnitary, space: WeightedSpace,
                         values: Mapping) -> Array:
    """Insert a fixed function into leg one of a pair space.

    Columns are indexed by the weighted arrow space carrying the remaining
    leg; the pair weights supply the fiber weight of the inserted leg.
    """
    hm = ref.haar_data
    g = hm.groupoid
    mat = np.zeros((space.dim, len(g.arrows)), dtype=np.complex128)
    for (x, y), i in space.position.items():
        if x in values:
            ratio = space.weights[i] / hm.arrow_measure[y]
            mat[i, g.arrow_position(y)] = np.sqrt(ratio) * complex(values[x])
    return mat


def _fixed_indicator_residual(ref: ReferenceUnitary, values: Mapping) -> float:
    lifted_src = _first_leg_insertion(ref, ref.source_space, values)
    lifted_tgt = _first_leg_insertion(ref, ref.target_space, values)
    return residual(ref.unitary @ lifted_src, lifted_tgt)


def function_algebra_graph(hm: HaarMeasureData
                           ) -> tuple[QuantumGraph, AlgMap]:
    """The commutative quantum graph of functions on a measured groupoid.

    Functions on arrows form the total algebra, functions on units the base;
    the embeddings pull back along target and source, the expectations
    integrate the fibers, and the candidate modular element is the inverse
    modulus.  Returns the graph together with the inversion coinvolution.
    """
    g = hm.groupoid
    base = BlockAlgebra((1,) * len(g.units))
    total = BlockAlgebra((1,) * len(g.arrows))
    mu = FaithfulState(base, np.diag([hm.unit_measure[u] for u in g.units]))
    unit_pos = {u: i for i, u in enumerate(g.units)}

    def pullback(unit_of):
        def act(f):
            vals = [f[unit_pos[unit_of[x]], unit_pos[unit_of[x]]]
                    for x in g.arrows]
            return np.diag(np.asarray(vals, dtype=np.complex128))
        return act

    def fiber_integral(fiber_of, weight_of):
        def act(a):
            diag = np.diag(a)
            out = np.zeros(len(g.units), dtype=np.complex128)
            for x in g.arrows:
                out[unit_pos[fiber_of[x]]] += diag[g.arrow_position(x)] * weight_of(x)
            return np.diag(out)
        return act

    embed_range = AlgMap.from_function(pullback(g.target), base, total)
    embed_source = AlgMap.from_function(pullback(g.source), base, total)
    expect_range = AlgMap.from_function(
        fiber_integral(g.target, lambda x: hm.haar[x]), total, base)
    expect_source = AlgMap.from_function(
        fiber_integral(g.source, lambda x: hm.haar[g.inverse[x]]), total, base)
    delta = np.diag(np.array([1.0 / hm.modulus[x] for x in g.arrows],
                             dtype=np.complex128))
    graph = QuantumGraph(mu, total, embed_range, expect_range,
                         embed_source, expect_source, delta)
    flip = AlgMap.from_function(
        lambda f: np.diag(np.array(
            [f[g.arrow_position(g.inverse[x]), g.arrow_position(g.inverse[x])]
             for x in g.arrows], dtype=np.complex128)), total, total)
    return graph, flip

# ---------------------------------------------------------------------------
# charts between relative tensor squares and weighted pair spaces


def pair_space_chart(double: RelTensor, arrow_chart: Array,
                     space: WeightedSpace, g: FiniteGroupoid
                     ) -> tuple[Array, dict[str, float]]:
    """Unitary chart from a relative tensor square onto a weighted pair space.

    Over a commutative base the frame inner products are diagonal, so the raw
    coordinate of (left frame, base point, right frame) pairs off against the
    function sending an arrow pair to the product of the transported frame
    columns at that base point.  The resulting matrix descends along the
    quotient; the report certifies well-definedness and unitarity, which fail
    loudly if the pair space does not match the gradings of the two modules.
    """
    la = np.stack([arrow_chart @ f for f in double.left.frame])
    ra = np.stack([arrow_chart @ f for f in double.right.frame])
    ixs = [g.arrow_position(x) for x, _ in space.points]
    iys = [g.arrow_position(y) for _, y in space.points]
    raw = np.einsum("ipm,jpm->pimj", la[:, ixs, :], ra[:, iys, :],
                    optimize=True)
    raw = raw.reshape(space.dim, double.raw_dim)
    chart = raw @ double.quotient_pinv
    return chart, {
        "well_defined": residual(chart @ double.quotient, raw),
        "unitary": unitary_defect(chart),
    }


# ---------------------------------------------------------------------------
# numerical block decomposition of a concrete matrix star algebra


@dataclass(eq=False)
class MatrixAlgebraModel:
    """A concrete matrix star algebra in block-diagonal coordinates.

    ``chart`` is a unitary on the representation space; conjugating by it
    carries the abstract block algebra, each block inflated by its
    multiplicity, onto the span of the generating operators.
    """

    algebra: BlockAlgebra
    multiplicities: tuple[int, ...]
    chart: Array
    report: dict[str, float] = field(default_factory=dict)

    def realize(self, a: Array) -> Array:
        inflated = [np.kron(b, np.eye(m)) for b, m in
                    zip(self.algebra.blocks(as_complex(a)), self.multiplicities)]
        return self.chart @ direct_sum(inflated) @ dagger(self.chart)

    def abstract(self, op: Array) -> tuple[Array, float]:
        m = dagger(self.chart) @ as_complex(op) @ self.chart
        parts = []
        off = 0
        for n, mult in zip(self.algebra.dims, self.multiplicities):
            size = n * mult
            corner = m[off:off + size, off:off + size]
            part = corner.reshape(n, mult, n, mult)
            parts.append(np.einsum("itjt->ij", part) / mult)
            off += size
        a = direct_sum(parts)
        return a, residual(self.realize(a), op)


def _center_basis(basis: Sequence[Array]) -> list[Array]:
    cols = [np.concatenate([vec(b @ other - other @ b) for other in basis])
            for b in basis]
    # the basis is orthonormal, so commutator sizes are absolute quantities
    # and the rank cut must not rescale to pure float noise
    _, s, vh = np.linalg.svd(np.column_stack(cols), full_matrices=False)
    kernel = [np.conj(vh[k]) for k in range(len(s)) if s[k] <= 1e-9]
    return [sum(c * b for c, b in zip(coeffs, basis)) for coeffs in kernel]


def _eig_clusters(vals: Array, tol: float) -> list[list[int]]:
    groups = [[0]]
    for i in range(1, len(vals)):
        if vals[i] - vals[i - 1] > tol * max(1.0, abs(vals[i])):
            groups.append([])
        groups[-1].append(i)
    return groups


def matrix_algebra_model(ops: Sequence[Array], seed: int = 7,
                         cluster_tol: float = 1e-7) -> MatrixAlgebraModel:
    """Split the star algebra spanned by ``ops`` into matrix blocks.

    The operators must span a unital star-closed algebra.  A random Hermitian
    central element separates the minimal central projections; inside each
    corner, eigenspaces of a random Hermitian element are aligned by polar
    parts of corner maps so that the corner becomes a full matrix block times
    an identity of multiplicity size.  Deterministic for a fixed seed.
    """
    ops = [as_complex(o) for o in ops]
    n = ops[0].shape[0]
    span = OperatorSpan((n, n), ops)
    basis = span.basis()
    closure = max(span.distance(dagger(b)) for b in basis)
    closure = max(closure, span.distance(np.eye(n)))
    if closure > 1e-8:
        raise ValueError("operators do not span a unital star-closed algebra")
    center = _center_basis(basis)
    rng = np.random.default_rng(seed)

    def random_hermitian(mats: Sequence[Array]) -> Array:
        h = np.zeros_like(mats[0])
        for m in mats:
            t, s = rng.standard_normal(2)
            h = h + t * (m + dagger(m)) + 1j * s * (m - dagger(m))
        return h

    for _ in range(32):
        vals, vecs = np.linalg.eigh(random_hermitian(center))
        groups = _eig_clusters(vals, cluster_tol)
        if len(groups) == len(center):
            break
    else:
        raise ValueError("could not separate the central spectrum")

    dims, mults, pieces = [], [], []
    for grp in groups:
        iso = vecs[:, grp]
        corner = OperatorSpan((len(grp), len(grp)),
                              [dagger(iso) @ b @ iso for b in basis])
        block = isqrt(corner.dim)
        if block * block != corner.dim or len(grp) % block != 0:
            raise ValueError("corner dimension is not a full matrix block")
        mult = len(grp) // block
        cbasis = corner.basis()
        aligned = None
        for _ in range(32):
            cvals, cvecs = np.linalg.eigh(random_hermitian(cbasis))
            cgroups = _eig_clusters(cvals, cluster_tol)
            if len(cgroups) != block or any(len(cg) != mult for cg in cgroups):
                continue
            eigbases = [cvecs[:, cg] for cg in cgroups]
            probe = random_hermitian(cbasis)
            cols = [eigbases[0]]
            for j in range(1, block):
                f = dagger(eigbases[j]) @ probe @ eigbases[0]
                u, s, vh = np.linalg.svd(f)
                if s[-1] < 1e-8 * max(s[0], 1e-300):
                    cols = None
                    break
                cols.append(eigbases[j] @ (u @ vh))
            if cols is not None:
                aligned = np.hstack(cols)
                break
        if aligned is None:
            raise ValueError("could not align a matrix corner")
        pieces.append(iso @ aligned)
        dims.append(block)
        mults.append(mult)

    model = MatrixAlgebraModel(BlockAlgebra(tuple(dims)), tuple(mults),
                               np.hstack(pieces))
    block_form = max(model.abstract(op)[1] for op in ops)
    model.report.update({
        "span_closure": closure,
        "chart_unitary": unitary_defect(model.chart),
        "block_form": block_form,
    })
    return model


def convolution_symbol(hm: HaarMeasureData, op: Array) -> dict:
    """Read the convolution kernel of an operator off its matrix entries.

    Inverts the defining matrix elements against the unit-arrow columns;
    exact for any operator in the span of arrow convolutions.
    """
    g = hm.groupoid
    out = {}
    for x in g.arrows:
        ux = g.unit_arrow(g.source[x])
        scale = (hm.modulus[x] ** -0.5) * hm.haar[x] * np.sqrt(
            hm.arrow_measure[x] / hm.arrow_measure[ux])
        out[x] = complex(op[g.arrow_position(x), g.arrow_position(ux)]) / scale
    return out


# ---------------------------------------------------------------------------
# measured groupoid to operator bundle


@dataclass(eq=False)
class GroupoidBundleModel:
    """An operator bundle built from a measured groupoid.

    ``arrow_chart`` identifies the induced standard space with the weighted
    arrow space (for the function algebra it is the identity up to float
    noise), and ``reference`` carries the classical substitution unitary used
    for cross checks.  The counit is only populated when the total algebra is
    commutative.
    """

    haar_data: HaarMeasureData
    bundle: QuantumGroupoidBundle
    reference: ReferenceUnitary
    arrow_chart: Array
    counit: Callable[[Array], Array] | None
    report: dict[str, float] = field(default_factory=dict)


def build_function_algebra_cqg(hm: HaarMeasureData) -> GroupoidBundleModel:
    """Bundle of functions on a measured groupoid with normalized fibers.

    Each target fiber weight must sum to one, otherwise the fiber integral
    fails to be unital and construction is refused.  The comultiplication
    acts on the canonical double as substitution along composition: the
    double is spanned by second-leg insertions of fiber indicators applied to
    point masses, and each such pair vector is an eigenvector of the image
    with eigenvalue the function at the composed arrow.
    """
    g = hm.groupoid
    for u in g.units:
        total = sum(hm.haar[x] for x in g.target_fiber(u))
        if abs(total - 1.0) > 1e-9:
            raise ValueError(
                f"fiber weights over unit {u!r} sum to {total:.6g}, not 1; "
                "normalize the Haar system for the function algebra model")

    graph, flip = function_algebra_graph(hm)
    mods = canonical_modules(graph)
    home = relative_tensor(mods["alpha"], mods["beta"])

    cols, prods = [], []
    npos = g.arrow_position
    for x in g.arrows:
        for y in g.target_fiber(g.source[x]):
            unit = np.zeros((len(g.arrows),) * 2, dtype=np.complex128)
            unit[npos(y), npos(y)] = 1.0
            cols.append(home.ket2(graph.op(unit) @ graph.zeta_phi)[:, npos(x)])
            prods.append(npos(g.product(x, y)))
    frame = np.column_stack(cols)
    frame_inv = np.linalg.inv(frame)

    def comult_fn(a: Array) -> Array:
        d = np.diag(as_complex(a))
        return frame @ np.diag(d[prods]) @ frame_inv

    comult = Comultiplication.from_function(graph.total, home, comult_fn)
    bundle = QuantumGroupoidBundle(graph, flip, comult, mods)

    unit_rows = [npos(g.unit_arrow(u)) for u in g.units]

    def counit(a: Array) -> Array:
        return np.diag(np.diag(as_complex(a))[unit_rows])

    arrows = arrow_space(hm)
    tgt = np.column_stack([arrows.to_weighted({x: 1.0}) for x in g.arrows])
    chart, chart_res = solve_via_frame(graph.space.lam_matrix(), tgt)
    ref = build_reference_VG(hm)
    report = {
        "arrow_chart_well_defined": chart_res,
        "arrow_chart_unitary": unitary_defect(chart),
        "pair_frame_size": 0.0 if frame.shape[0] == frame.shape[1] else 1.0,
    }
    return GroupoidBundleModel(hm, bundle, ref, chart, counit, report)


def build_etale_cqg(hm: HaarMeasureData) -> GroupoidBundleModel:
    """Convolution algebra bundle of a groupoid with counting weights.

    The total algebra is the span of the arrow convolution operators, split
    into matrix blocks numerically; unit functions embed as unit-supported
    kernels, the expectation restricts kernels to unit arrows, and the
    modular element is trivial.  The comultiplication transports the
    classical substitution unitary through the pair-space charts of the two
    canonical doubles.
    """
    if not hm.is_counting():
        raise ValueError("convolution model requires counting fiber weights")
    g = hm.groupoid
    model = matrix_algebra_model(
        [convolution_operator(hm, {x: 1.0}) for x in g.arrows])
    total = model.algebra
    base = BlockAlgebra((1,) * len(g.units))
    mu = FaithfulState(base, np.diag([hm.unit_measure[u] for u in g.units]))
    unit_pos = {u: i for i, u in enumerate(g.units)}
    defects = {"embed": 0.0, "reverse": 0.0}

    def embed(f: Array) -> Array:
        kernel = {g.unit_arrow(u): f[unit_pos[u], unit_pos[u]]
                  for u in g.units}
        a, res = model.abstract(convolution_operator(hm, kernel))
        defects["embed"] = max(defects["embed"], res)
        return a

    def restrict(a: Array) -> Array:
        f = convolution_symbol(hm, model.realize(a))
        return np.diag(np.array([f[g.unit_arrow(u)] for u in g.units],
                                dtype=np.complex128))

    def reverse(a: Array) -> Array:
        f = convolution_symbol(hm, model.realize(a))
        out, res = model.abstract(convolution_operator(
            hm, {x: f[g.inverse[x]] for x in g.arrows}))
        defects["reverse"] = max(defects["reverse"], res)
        return out

    ident = AlgMap.from_function(embed, base, total)
    restr = AlgMap.from_function(restrict, total, base)
    graph = QuantumGraph(mu, total, ident, restr, ident, restr,
                         total.identity())
    flip = AlgMap.from_function(reverse, total, total)

    arrows = arrow_space(hm)
    tgt_cols = []
    for a in total.basis():
        f = convolution_symbol(hm, model.realize(a))
        tgt_cols.append(arrows.to_weighted(
            {x: f[x] * hm.modulus[x] ** -0.5 for x in g.arrows}))
    chart, chart_res = solve_via_frame(graph.space.lam_matrix(),
                                       np.column_stack(tgt_cols))

    mods = canonical_modules(graph)
    home = relative_tensor(mods["alpha"], mods["beta"])
    src_double = relative_tensor(mods["beta_hat"], mods["alpha"])
    ref = build_reference_VG(hm)
    chart_src, rep_src = pair_space_chart(src_double, chart,
                                          ref.source_space, g)
    chart_tgt, rep_tgt = pair_space_chart(home, chart, ref.target_space, g)
    transported = dagger(chart_tgt) @ ref.unitary @ chart_src

    leg_defect = {"worst": 0.0}

    def comult_fn(a: Array) -> Array:
        mat, rep = first_leg_operator(src_double, graph.rep(a))
        leg_defect["worst"] = max(leg_defect["worst"], rep["well_defined"])
        return transported @ mat @ dagger(transported)

    comult = Comultiplication.from_function(total, home, comult_fn)
    bundle = QuantumGroupoidBundle(graph, flip, comult, mods)
    report = {
        "arrow_chart_well_defined": chart_res,
        "arrow_chart_unitary": unitary_defect(chart),
        "source_chart_well_defined": rep_src["well_defined"],
        "source_chart_unitary": rep_src["unitary"],
        "target_chart_well_defined": rep_tgt["well_defined"],
        "target_chart_unitary": rep_tgt["unitary"],
        "transport_unitary": unitary_defect(transported),
        "first_leg_well_defined": leg_defect["worst"],
        "embedding_round_trip": defects["embed"],
        "reversal_round_trip": defects["reverse"],
        **{f"block_split_{k}": v for k, v in model.report.items()},
    }
    return GroupoidBundleModel(hm, bundle, ref, chart, None, report)


# ---------------------------------------------------------------------------
# principal bundles: totals generated by the two base copies


def principal_comultiplication(graph: QuantumGraph, home: RelTensor,
                               tol: float = 1e-8
                               ) -> tuple[Comultiplication,
                                          Callable[[Array], Array],
                                          dict[str, float]]:
    """Comultiplication and counit of a total generated by its base copies.

    A product of a range element and a source element acts as the range part
    on the first leg and the source part on the second; bilinearity extends
    this to the whole algebra once such products span it, and the span
    residual is enforced.  The counit pairs the same decomposition with the
    two standard actions of the base on its own space.
    """
    total = graph.total
    bbasis = graph.base_state.algebra.basis()
    nb = len(bbasis)
    first, second = [], []
    leg_worst = 0.0
    for b in bbasis:
        m1, r1 = first_leg_operator(home, graph.rep(graph.r(b)))
        m2, r2 = second_leg_operator(home, graph.rep(graph.s(b)))
        leg_worst = max(leg_worst, r1["well_defined"], r2["well_defined"])
        first.append(m1)
        second.append(m2)
    leg_prod = [f @ s for f in first for s in second]
    base_real = gns_realization(graph.base_state)
    eps_prod = [base_real.rep(b) @ base_real.opp_rep(c)
                for b in bbasis for c in bbasis]
    prods = np.column_stack([total.blockvec(graph.r(b) @ graph.s(c))
                             for b in bbasis for c in bbasis])
    prods_pinv = pinv(prods)

    def coefficients(a: Array) -> Array:
        v = total.blockvec(as_complex(a))
        coeff = prods_pinv @ v
        defect = float(np.linalg.norm(prods @ coeff - v))
        if defect > tol * max(1.0, float(np.linalg.norm(v))):
            raise ValueError(
                f"span defect {defect:.3g}: total algebra is not generated "
                "by range and source elements")
        return coeff

    mats = []
    for a in total.basis():
        coeff = coefficients(a)
        mats.append(sum(c * m for c, m in zip(coeff, leg_prod)))
    comult = Comultiplication(total, home, tuple(mats))

    def counit(a: Array) -> Array:
        return sum(c * m for c, m in zip(coefficients(a), eps_prod))

    return comult, counit, {"legs": leg_worst}


@dataclass(eq=False)
class PrincipalBundleModel:
    """A bundle whose total algebra is generated by the two base copies."""

    upsilon: FaithfulState
    iota: AlgMap
    tau: AlgMap
    bundle: QuantumGroupoidBundle
    counit: Callable[[Array], Array]
    pair_chart: Array | None
    report: dict[str, float] = field(default_factory=dict)


def build_principal(upsilon: FaithfulState, algebra: BlockAlgebra,
                    iota: AlgMap, tau: AlgMap,
                    tol: float = 1e-8) -> PrincipalBundleModel:
    """Bundle generated by a block algebra and its opposite over a core.

    ``iota`` embeds the commutative core into the center of ``algebra`` and
    ``tau`` is a compatible expectation back onto the core.  Construction
    verifies the module structure axioms, centrality of the core image, and
    the symmetry of ``tau`` under the half twist of the induced state; any
    failure raises with the offending residual.  Blocks of the total algebra
    are pairs of blocks of ``algebra`` over a common core label, the range
    copy acting on the left tensor factor and the source copy on the right.
    """
    core = upsilon.algebra
    if any(d != 1 for d in core.dims):
        raise ValueError("core algebra must be commutative")
    ms = ModuleStructure(upsilon, algebra, iota, tau)
    structure = verify_module_structure(ms)
    bad = {k: round(v, 12) for k, v in structure.items() if v > tol}
    if bad:
        raise ValueError(f"module structure axioms fail: {bad}")
    bbasis = algebra.basis()
    central = max(opnorm(iota(c) @ b - b @ iota(c))
                  for c in core.basis() for b in bbasis)
    if central > tol:
        raise ValueError(f"core image is not central: defect {central:.3g}")
    mu = ms.compose_state
    twisted = max(
        residual(tau(b @ mu.sigma(-0.5j, d)), tau(d @ mu.sigma(-0.5j, b)))
        for b in bbasis for d in bbasis)
    if twisted > tol:
        raise ValueError(
            f"expectation breaks the half-twist symmetry: {twisted:.3g}")

    dims = algebra.dims
    labels = []
    for j in range(len(dims)):
        hits = []
        for i, c in enumerate(core.basis()):
            blk = algebra.blocks(iota(c))[j]
            if opnorm(blk - np.eye(dims[j])) <= 1e-8:
                hits.append(i)
            elif opnorm(blk) > 1e-8:
                raise ValueError("core projections do not split the blocks")
        if len(hits) != 1:
            raise ValueError("core projections do not split the blocks")
        labels.append(hits[0])
    pairs = [(j, k) for j in range(len(dims)) for k in range(len(dims))
             if labels[j] == labels[k]]
    total = BlockAlgebra(tuple(dims[j] * dims[k] for j, k in pairs))
    weights = [functional_density(
        algebra, lambda c, i=i: complex(tau(c)[i, i]))
        for i in range(len(core.dims))]

    def embed_range(b: Array) -> Array:
        blk = algebra.blocks(as_complex(b))
        return direct_sum([np.kron(blk[j], np.eye(dims[k]))
                           for j, k in pairs])

    def embed_source(m: Array) -> Array:
        blk = algebra.blocks(as_complex(m))
        return direct_sum([np.kron(np.eye(dims[j]), blk[k])
                           for j, k in pairs])

    def expect_range(a: Array) -> Array:
        blk = total.blocks(as_complex(a))
        out = [np.zeros((d, d), dtype=np.complex128) for d in dims]
        for t, (j, k) in enumerate(pairs):
            part = blk[t].reshape(dims[j], dims[k], dims[j], dims[k])
            w = algebra.blocks(weights[labels[j]])[k]
            out[j] += np.einsum("ambn,mn->ab", part, w, optimize=True)
        return direct_sum(out)

    def expect_source(a: Array) -> Array:
        blk = total.blocks(as_complex(a))
        out = [np.zeros((d, d), dtype=np.complex128) for d in dims]
        for t, (j, k) in enumerate(pairs):
            part = blk[t].reshape(dims[j], dims[k], dims[j], dims[k])
            w = algebra.blocks(weights[labels[j]])[j]
            out[k] += np.einsum("ambn,ba->mn", part, w, optimize=True)
        return direct_sum(out)

    graph = QuantumGraph(
        mu, total,
        AlgMap.from_function(embed_range, algebra, total),
        AlgMap.from_function(expect_range, total, algebra),
        AlgMap.from_function(embed_source, algebra, total),
        AlgMap.from_function(expect_source, total, algebra),
        total.identity())

    pair_index = {p: t for t, p in enumerate(pairs)}

    def reverse(a: Array) -> Array:
        blk = total.blocks(as_complex(a))
        out = []
        for j, k in pairs:
            m = blk[pair_index[(k, j)]].reshape(dims[k], dims[j],
                                                dims[k], dims[j])
            out.append(m.transpose(3, 2, 1, 0).reshape(dims[j] * dims[k],
                                                       dims[j] * dims[k]))
        return direct_sum(out)

    flip = AlgMap.from_function(reverse, total, total)
    mods = canonical_modules(graph)
    home = relative_tensor(mods["alpha"], mods["beta"])
    comult, counit, legs = principal_comultiplication(graph, home, tol=tol)
    bundle = QuantumGroupoidBundle(graph, flip, comult, mods)

    pair_chart = None
    report = {
        **{f"structure_{k}": v for k, v in structure.items()},
        "core_central": central,
        "twisted_symmetry": twisted,
        "leg_well_defined": legs["legs"],
    }
    if core.total_dim == 1:
        base_real = gns_realization(mu)
        right_real = opposite_realization(mu)

        def one_block(idx: int, m: Array) -> Array:
            return algebra.embed([m if t == idx else
                                  np.zeros((d, d), dtype=np.complex128)
                                  for t, d in enumerate(dims)])

        cols = []
        for j, k in pairs:
            for p in range(dims[j] * dims[k]):
                for q in range(dims[j] * dims[k]):
                    a1, m1 = divmod(p, dims[k])
                    b1, n1 = divmod(q, dims[k])
                    bmat = np.zeros((dims[j], dims[j]), dtype=np.complex128)
                    bmat[a1, b1] = 1.0
                    cmat = np.zeros((dims[k], dims[k]), dtype=np.complex128)
                    cmat[m1, n1] = 1.0
                    cols.append(np.kron(
                        base_real.lam(one_block(j, bmat)),
                        right_real.lam(one_block(k, cmat))))
        pair_chart, chart_res = solve_via_frame(graph.space.lam_matrix(),
                                                np.column_stack(cols))
        report["pair_chart_well_defined"] = chart_res
        report["pair_chart_unitary"] = unitary_defect(pair_chart)
    return PrincipalBundleModel(upsilon, iota, tau, bundle, counit,
                                pair_chart, report)


@dataclass(eq=False)
class RestrictedBundle:
    """A bundle restricted to the subalgebra generated by its base copies."""

    bundle: QuantumGroupoidBundle
    counit: Callable[[Array], Array]
    model: MatrixAlgebraModel
    report: dict[str, float] = field(default_factory=dict)


def underlying_principal(bundle: QuantumGroupoidBundle,
                         tol: float = 1e-8) -> RestrictedBundle:
    """Restrict a bundle to the subalgebra spanned by range and source copies.

    Requires a trivial modular element so the restricted expectations stay
    compatible.  The generated subalgebra is split into blocks numerically,
    the structure maps are transported through the splitting chart, and the
    comultiplication is rebuilt from the two-leg actions of the generators.
    """
    graph = bundle.graph
    total = graph.total
    if residual(graph.delta, total.identity()) > tol:
        raise ValueError("restriction requires a trivial modular element")
    base = graph.base_state.algebra
    bas = base.basis()
    model = matrix_algebra_model(
        [graph.r(b) @ graph.s(c) for b in bas for c in bas])
    sub = model.algebra
    round_trip = {"worst": 0.0}

    def down(x: Array) -> Array:
        a, res = model.abstract(x)
        round_trip["worst"] = max(round_trip["worst"], res)
        return a

    sub_graph = QuantumGraph(
        graph.base_state, sub,
        AlgMap.from_function(lambda b: down(graph.r(b)), base, sub),
        AlgMap.from_function(lambda a: graph.phi(model.realize(a)), sub, base),
        AlgMap.from_function(lambda m: down(graph.s(m)), base, sub),
        AlgMap.from_function(lambda a: graph.psi(model.realize(a)), sub, base),
        sub.identity())
    flip = AlgMap.from_function(
        lambda a: down(bundle.coinv(model.realize(a))), sub, sub)
    mods = canonical_modules(sub_graph)
    home = relative_tensor(mods["alpha"], mods["beta"])
    comult, counit, legs = principal_comultiplication(sub_graph, home,
                                                      tol=tol)
    out = QuantumGroupoidBundle(sub_graph, flip, comult, mods)
    report = {
        "round_trip": round_trip["worst"],
        "leg_well_defined": legs["legs"],
        **{f"block_split_{k}": v for k, v in model.report.items()},
    }
    return RestrictedBundle(out, counit, model, report)
