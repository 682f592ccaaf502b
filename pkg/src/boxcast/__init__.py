"""Numerical toolkit for local broadcasting limits of boxes and assemblages."""

from .behaviors import (
    Behavior,
    Scenario,
    bipartite_scenario,
    broadcast_scenario,
    condition_on_pair0,
    is_broadcast_of,
    is_nonsignalling,
    marginal_pair,
    pr_box,
    product,
    uniform_box,
)
from .divergence import (
    BoxDivergenceReport,
    ElrConfig,
    ElrResult,
    box_kl,
    broadcast_gap,
    conditional_box_checks,
    relative_entropy_nl,
)
from .errors import (
    BoxcastError,
    CapacityError,
    ConditioningError,
    DimensionError,
    OptimizationError,
    SignallingError,
    SolverError,
    ValidationError,
)
from .losr import LosrMap, apply, contractivity_check, preserves_lrns, random_losr
from .polytopes import (
    MembershipResult,
    VertexCatalogue,
    local_deterministic_vertices,
    local_vertices_222,
    lrns_vertices,
    lrns_vertices_222,
    membership,
    ns_vertices_222,
)
from .tensor import JointTable, ProbVector, chain_rule_split, kl_divergence

__version__ = "0.1.0"
