"""Desk-scale simulator for participatory land-use planning.

A region is split into areas grouped by community; vacant areas receive
one of eight facility types under per-type minimum quotas. Baseline
planners fill the region in one shot; the participatory pipeline then
runs community discussion rounds with synthesized residents and revises
the plan one community at a time. Four spatial metrics score the result.
"""
from .discussion import (
    ABLATION_MODES,
    DiscussionConfig,
    Transcript,
    invite,
    load_transcript,
    run_ablation,
    run_community_revision,
    run_full_pipeline,
    save_transcript,
)
from .errors import (
    BackendError,
    GeometryError,
    Infeasible,
    InvariantError,
    ParseError,
    PlanningError,
    SpecError,
)
from .fixtures import (
    dhm_like_region,
    grid16_region,
    hlg_like_demographics,
    hlg_like_region,
    make_grid_region,
    write_bundled_data,
)
from .llm import (
    BackendConfig,
    ChatMessage,
    RemoteBackend,
    RuleBackend,
    ScriptedBackend,
    make_backend,
    request_initial_plan,
)
from .metrics import (
    METRIC_COLUMNS,
    DistanceCache,
    MetricsConfig,
    MetricsReport,
    ecology,
    inclusion,
    report,
    satisfaction,
    service,
    write_metrics_csv,
)
from .planners import (
    PLANNER_NAMES,
    PlannerConfig,
    centralized_plan,
    decentralized_plan,
    gsca_plan,
    gsca_trace,
    local_search_plan,
    plan_objective,
    random_plan,
)
from .population import (
    DemographicSpec,
    Population,
    Profile,
    Resident,
    load_demographics,
    load_population,
    save_population,
    synthesize,
)
from .region import (
    ASSIGNABLE_USES,
    Area,
    LandUse,
    Plan,
    Region,
    load_plan,
    load_region,
    plan_digest,
    save_plan,
    save_region,
    validate_plan,
)

__version__ = "0.1.0"

__all__ = [
    "ABLATION_MODES",
    "ASSIGNABLE_USES",
    "Area",
    "BackendConfig",
    "BackendError",
    "ChatMessage",
    "DemographicSpec",
    "DiscussionConfig",
    "DistanceCache",
    "GeometryError",
    "Infeasible",
    "InvariantError",
    "LandUse",
    "METRIC_COLUMNS",
    "MetricsConfig",
    "MetricsReport",
    "PLANNER_NAMES",
    "ParseError",
    "Plan",
    "PlannerConfig",
    "PlanningError",
    "Population",
    "Profile",
    "Region",
    "RemoteBackend",
    "Resident",
    "RuleBackend",
    "ScriptedBackend",
    "SpecError",
    "Transcript",
    "centralized_plan",
    "decentralized_plan",
    "dhm_like_region",
    "ecology",
    "grid16_region",
    "gsca_plan",
    "gsca_trace",
    "hlg_like_demographics",
    "hlg_like_region",
    "inclusion",
    "invite",
    "load_demographics",
    "load_plan",
    "load_population",
    "load_region",
    "load_transcript",
    "local_search_plan",
    "make_backend",
    "make_grid_region",
    "plan_digest",
    "plan_objective",
    "random_plan",
    "report",
    "request_initial_plan",
    "run_ablation",
    "run_community_revision",
    "run_full_pipeline",
    "satisfaction",
    "save_plan",
    "save_population",
    "save_region",
    "save_transcript",
    "service",
    "synthesize",
    "validate_plan",
    "write_bundled_data",
    "write_metrics_csv",
]
