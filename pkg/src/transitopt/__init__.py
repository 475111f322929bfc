"""transitopt: bus network redesign over a fixed road/metro/walking substrate.

Approximates the Pareto front of four network objectives with an elitist
multi-objective GA, infers scalarization weights from ratings of sampled
non-dominated networks, and refines with a weighted single-objective GA.
"""

from .evaluation import (
    EvalConfig,
    EvalContext,
    ObjectiveVector,
    Trip,
    Uncovered,
    evaluate,
    plan_trip,
)
from .graphs import (
    BusNetwork,
    CompleteNetwork,
    MetroNetwork,
    RoadGraph,
    Route,
    RouteKind,
    WalkNetwork,
    assemble_complete,
    build_walk_network,
    route_length,
)
from .moea import (
    GAConfig,
    ParetoArchive,
    crowding_distance,
    crossover,
    dominates,
    mutate,
    nondominated_sort,
    run_classic_ga,
    run_nsga2,
    sample_by_crowding,
)
from .preprocess import (
    ClusterMap,
    DemandMatrix,
    ZoneGrid,
    build_grid,
    cluster_stops,
    synth_city,
)
from .routegen import RouteLengthBounds, RoutePool, build_pool, gen_hub_connectors, gen_traversal
from .weightfit import (
    RatingRecord,
    WeightVector,
    fit_weights,
    scalarize_uniform,
    scalarize_weighted,
)

__version__ = "0.1.0"
