"""Percolation locality experiments on free products, their coset quotients and related graphs."""

__version__ = "0.1.0"

from numba import config as _numba_config

# The system TBB is older than numba supports; choosing OpenMP first avoids a fallback warning.
_numba_config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

from .balls import Ball, bfs_ball, local_radius, rooted_isomorphic
from .families import family_sequence, parse_family
from .graphs import (
    CosetQuotientGraph,
    FreeProductGraph,
    ImplicitGraph,
    ModifiedGrandparentGraph,
    edge_key,
    make_free_product,
    make_modified_grandparent,
    make_quotient,
    sphere_class,
    tree,
)
from .words import CosetContext, FactorSpec, FreeProduct, coset_canonical
from .walks import (
    harmonic_measure,
    nice_edge_count,
    quotient_identity_check,
    ratio_report,
    return_probabilities,
    spectral_estimate,
)
from .percolation import (
    assumption2_report,
    connection_prob,
    connection_prob_exact,
    pc_estimate,
    reach_prob,
    sample_percolation,
    tree_pc_oracle,
)
from .exploration import CoupledField, locality_experiment, run_exploration, survival_summary

__all__ = [
    "Ball", "bfs_ball", "local_radius", "rooted_isomorphic", "family_sequence", "parse_family",
    "CosetQuotientGraph", "FreeProductGraph", "ImplicitGraph", "ModifiedGrandparentGraph", "edge_key",
    "make_free_product", "make_modified_grandparent", "make_quotient", "sphere_class", "tree",
    "CosetContext", "FactorSpec", "FreeProduct", "coset_canonical",
    "harmonic_measure", "nice_edge_count", "quotient_identity_check", "ratio_report", "return_probabilities",
    "spectral_estimate", "assumption2_report", "connection_prob", "connection_prob_exact", "pc_estimate",
    "reach_prob", "sample_percolation", "tree_pc_oracle", "CoupledField", "locality_experiment",
    "run_exploration", "survival_summary", "__version__",
]
