"""Numerical laboratory for finite-dimensional open quantum systems."""

__version__ = "0.1.0"

from .errors import (
    CROSS_ATOL,
    MIN_BRANCH_PROBABILITY,
    VALIDITY_ATOL,
    DecolabError,
    SpaceMismatchError,
    ValidationError,
    ZeroProbabilityError,
)
from .hilbert import (
    DensityOperator,
    Observable,
    StateVector,
    TensorSpace,
    basis_state,
    build_observable,
    computational_basis,
    embed_matrix,
    embed_observable,
    expectation,
    partial_trace,
    random_state,
    ray_equal,
    tensor,
    tensor_many,
)
from .dynamics import (
    CollapseRecord,
    Hamiltonian,
    collapse,
    luders_project,
    propagator,
    schrodinger_evolve,
    von_neumann_evolve,
)
from .entanglement import (
    SchmidtDecomposition,
    decoherence_factor,
    ensemble_entropy,
    entropy_bits,
    linear_entropy,
    schmidt_decompose,
    shannon_entropy,
)
from .measurement import (
    ApparatusModel,
    BranchingModel,
    ChainSpec,
    branch_and_recohere,
    chain_propagate,
    measurement_unitary,
    premeasure,
)
from .histories import (
    HistorySpec,
    ProjectorSet,
    RateMatrix,
    consistency_defect,
    decohere_projectors,
    enumerate_histories,
    graham_deviant_norm,
    history_probability,
    history_trace_single_sided,
    pauli_master_evolve,
)
from .ledger import (
    LedgerRow,
    branching_ledger,
    classical_ledger,
    quantum_collapse_ledger,
)
from .wigner import (
    GridState,
    WignerGrid,
    marginals,
    oscillator_state,
    pauli_kernel_value,
    two_packet_mixture,
    two_packet_superposition,
    wigner_transform,
    wigner_via_kernel,
)

__all__ = [
    "__version__",
    "CROSS_ATOL",
    "MIN_BRANCH_PROBABILITY",
    "VALIDITY_ATOL",
    "DecolabError",
    "SpaceMismatchError",
    "ValidationError",
    "ZeroProbabilityError",
    "DensityOperator",
    "Observable",
    "StateVector",
    "TensorSpace",
    "basis_state",
    "build_observable",
    "computational_basis",
    "embed_matrix",
    "embed_observable",
    "expectation",
    "partial_trace",
    "random_state",
    "ray_equal",
    "tensor",
    "tensor_many",
    "CollapseRecord",
    "Hamiltonian",
    "collapse",
    "luders_project",
    "propagator",
    "schrodinger_evolve",
    "von_neumann_evolve",
    "SchmidtDecomposition",
    "decoherence_factor",
    "ensemble_entropy",
    "entropy_bits",
    "linear_entropy",
    "schmidt_decompose",
    "shannon_entropy",
    "ApparatusModel",
    "BranchingModel",
    "ChainSpec",
    "branch_and_recohere",
    "chain_propagate",
    "measurement_unitary",
    "premeasure",
    "HistorySpec",
    "ProjectorSet",
    "RateMatrix",
    "consistency_defect",
    "decohere_projectors",
    "enumerate_histories",
    "graham_deviant_norm",
    "history_probability",
    "history_trace_single_sided",
    "pauli_master_evolve",
    "LedgerRow",
    "branching_ledger",
    "classical_ledger",
    "quantum_collapse_ledger",
    "GridState",
    "WignerGrid",
    "marginals",
    "oscillator_state",
    "pauli_kernel_value",
    "two_packet_mixture",
    "two_packet_superposition",
    "wigner_transform",
    "wigner_via_kernel",
]
