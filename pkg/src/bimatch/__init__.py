"""Bipartite Euclidean optimization functionals over pairs of point sets.

Power-cost minimum matching, alternating traveling-salesperson tours,
generic bipartite graph-family functionals, their penalized boundary
variants, a Monte Carlo harness for the n^(1-p/d) scaling limits, and a
property-check battery for the constant-bearing inequalities.
"""

from .boundary import (
    boundary_generic_cost,
    boundary_matching_brute_force,
    boundary_matching_cost,
    boundary_matching_reduction,
)
from .bounds import boundary_lower_bound, partition_upper_bound, size_bound_check
from .experiments import (
    BetaEstimate,
    EstimateRecord,
    ExperimentConfig,
    density_functional,
    estimate_beta,
    run_concentration,
    run_convergence,
    run_density_limit,
    run_poissonization_gap,
    run_singular_decay,
    run_tail_max,
)
from .geometry import (
    BoxRegion,
    DyadicPartition,
    PointCloud,
    boundary_dist,
    diameter,
    dyadic_partition,
    euclid_dist,
)
from .graphs import (
    BipartiteGraph,
    GraphFamily,
    check_axioms,
    enumerate_family,
    generic_cost,
    tsp_exact,
    tsp_heuristic,
)
from .matching import (
    CostParams,
    SizeLimitError,
    SolveResult,
    assignment_min_cost,
    brute_force_matching,
    matching_cost,
    monotone_matching_1d,
)
from .sampling import (
    BlockDensity,
    CantorMeasure,
    HeavyTailRadial,
    MeasureSpec,
    Mixture,
    SampleConfig,
    SingularSegment,
    UniformBox,
    max_radius,
    rng_stream,
    sample_pair,
)

__version__ = "0.1.0"
