"""Clustering-based projection design of reduced-order LQR controllers.

The pipeline clusters the states of a networked LTI plant through a
structured row-orthonormal projection, solves a reduced LQR problem in the
cluster coordinates, and lifts the solution back to the full network.  The
clusters and per-state projection weights are designed from the closed-loop
controllability Gramian so that the H2 mismatch against the full-order LQR
loop stays small, with computable error bounds and stability certificates.
"""

from .cluster_design import (
    KMeansProblem,
    KMeansResult,
    closed_loop_cluster_inputs,
    coherency_cluster_inputs,
    open_loop_h2_cluster_inputs,
    weighted_kmeans,
)
from .errors import ClusterLqrError
from .harness import ExperimentConfig, run_sweep, run_weight_comparison, validate_instance
from .lqr import (
    AreSolution,
    GramianFactor,
    StabilityCertificate,
    StableEigenbasis,
    are_solution_bound,
    closed_loop_gramian,
    h2_norm,
    hinf_norm,
    hamiltonian_matrix,
    model_matching_error,
    solve_are_full,
    stability_certificates,
    stable_eigenbasis,
)
from .netgen import (
    ClusterPartition,
    Graph,
    LtiSystem,
    consensus_mode,
    consensus_system,
    generate_clustered_consensus,
    is_almost_equitable,
    pbh_checks,
)
from .projection import (
    ClusteredController,
    ProjectionMatrix,
    build_projection,
    control_inversion,
    count_links,
    invert_controller,
    projection_mismatch,
    reduce_system,
    solve_reduced_lqr,
    weighted_error_bound,
)
from .spectral import (
    LowRankConfig,
    low_rank_gap_bound,
    low_rank_gramian,
    partial_stable_eigenbasis,
)
from .weight_design import (
    UnstableModes,
    WeightDesignConfig,
    alternating_design,
    block_diagonal_gap,
    build_cluster_tensor,
    stable_weight_design,
    unstable_weight_design,
)

__version__ = "0.1.0"

__all__ = [
    "AreSolution",
    "ClusterLqrError",
    "ClusterPartition",
    "ClusteredController",
    "ExperimentConfig",
    "Graph",
    "GramianFactor",
    "KMeansProblem",
    "KMeansResult",
    "LowRankConfig",
    "LtiSystem",
    "ProjectionMatrix",
    "StabilityCertificate",
    "StableEigenbasis",
    "UnstableModes",
    "WeightDesignConfig",
    "alternating_design",
    "are_solution_bound",
    "block_diagonal_gap",
    "build_cluster_tensor",
    "build_projection",
    "closed_loop_cluster_inputs",
    "closed_loop_gramian",
    "coherency_cluster_inputs",
    "consensus_mode",
    "consensus_system",
    "control_inversion",
    "count_links",
    "generate_clustered_consensus",
    "h2_norm",
    "hamiltonian_matrix",
    "hinf_norm",
    "invert_controller",
    "is_almost_equitable",
    "low_rank_gap_bound",
    "low_rank_gramian",
    "model_matching_error",
    "open_loop_h2_cluster_inputs",
    "partial_stable_eigenbasis",
    "pbh_checks",
    "projection_mismatch",
    "reduce_system",
    "run_sweep",
    "run_weight_comparison",
    "solve_are_full",
    "solve_reduced_lqr",
    "stability_certificates",
    "stable_eigenbasis",
    "stable_weight_design",
    "unstable_weight_design",
    "validate_instance",
    "weighted_error_bound",
    "weighted_kmeans",
]
