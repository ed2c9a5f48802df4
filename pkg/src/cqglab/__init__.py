"""Computational laboratory for compact quantum groupoids on finite dimensional algebras."""

from .linalg import TOL, Antiunitary, OperatorSpan, closed_span, residual
from .fdca import (
    BlockAlgebra,
    FaithfulState,
    GnsRealization,
    gns_realization,
    opposite_realization,
    spectral_apply,
)
from .modstruct import (
    AlgMap,
    ModuleStructure,
    QuantumGraph,
    build_coinvolution,
    rieffel_isometry,
    tau_maps,
    verify_module_structure,
    verify_quantum_graph,
)
from .rtp import (
    ConcreteModule,
    MultiModule,
    RelTensor,
    antiunitary_tensor,
    fiber_membership,
    fiber_product,
    lift_first,
    lift_second,
    make_module,
    operator_tensor,
    relative_tensor,
    triple_tensor,
    unit_module,
    verify_module,
)

__all__ = [
    "TOL",
    "Antiunitary",
    "OperatorSpan",
    "closed_span",
    "residual",
    "BlockAlgebra",
    "FaithfulState",
    "GnsRealization",
    "gns_realization",
    "opposite_realization",
    "spectral_apply",
    "AlgMap",
    "ModuleStructure",
    "QuantumGraph",
    "build_coinvolution",
    "rieffel_isometry",
    "tau_maps",
    "verify_module_structure",
    "verify_quantum_graph",
    "ConcreteModule",
    "MultiModule",
    "RelTensor",
    "antiunitary_tensor",
    "fiber_membership",
    "fiber_product",
    "lift_first",
    "lift_second",
    "make_module",
    "operator_tensor",
    "relative_tensor",
    "triple_tensor",
    "unit_module",
    "verify_module",
]

__version__ = "0.1.0"
