"""Hybrid zonotope set computation and reachability toolkit."""

from .sets import (
    ComplexityCount,
    DimensionError,
    HybridZonotope,
    IntervalBox,
    SchemaError,
    cartesian_product,
    cleanup,
    generalized_intersection,
    intersection,
    linear_map,
    minkowski_sum,
)
from .vpoly import VPolyCollection, edges_incidence, to_hybrid_zonotope
from .pwa import ErrorBound, UnaryFuncSpec, build_sos, error_bound, exact_pwa
from .graphs import (
    ApproxPolicy,
    Atom,
    Decomposition,
    GraphSet,
    affine,
    atom_step,
    binary_gadget_decomposition,
    boolean_atom,
    build_graph,
    comparison_atom,
    evaluate,
    evaluate_outputs,
    gadget,
    input_assignment,
    load_nn_json,
    nn_decomposition,
    project_io,
    propagate_domains,
    unary,
    witness_binaries,
)
from .query import (
    DEFAULT_ENUM_CAP,
    DEFAULT_TOLS,
    EmptySetError,
    EnumerationCapError,
    QueryResult,
    Tolerances,
    contains_point,
    enumerate_binary_assignments,
    interval_hull,
    is_empty,
    polygon_2d,
    support,
    support_relaxed,
)
from .reach import (
    CellwiseCertifier,
    DomainBoxHull,
    DomainCheckError,
    ReachTrace,
    StateUpdateSet,
    build_open_sus,
    build_state_input_map,
    close_loop,
    free_input_map,
    reach,
    successor_closed,
    successor_open,
    trajectory_binaries,
)
from .complexity import (
    METHODS,
    TABLE_CASES,
    RecurrenceReport,
    bilinear_counts,
    bilinear_table,
    closed_successor_counts,
    open_successor_counts,
    verify_trace_recurrence,
)
from .scenario import (
    EXIT_CAP,
    EXIT_DOMAIN,
    EXIT_OK,
    EXIT_SCHEMA,
    RunResult,
    Scenario,
    build_pipeline,
    load_scenario,
    run_scenario,
)

__version__ = "0.1.0"
