"""Exact finite probability spaces, measure-preserving abstractions between
them, and a DAG of abstraction levels with highest-possible-abstraction
quotients."""

from .abstraction import (
    AbstractionMap,
    ConvergentFamily,
    DirectReport,
    DivergentFamily,
    MapKind,
    UnifiedSpace,
    build_convergent,
    build_divergent,
    identity_map,
    make_map,
    validate_direct,
)
from .dag import HpamDag, check_dag, compose_path
from .dot import export_dot
from .errors import *  # noqa: F401,F403
from .hpoa import (
    EssentialEventSet,
    HpoaResult,
    brute_force_hpoa,
    check_integrity,
    check_minimality,
    compute_hpoa,
    factor_intermediate,
    merge_chain,
)
from .measure import (
    Event,
    FiniteProbSpace,
    Skeleton,
    check_measurable_map,
    format_rational,
    make_skeleton,
    make_space,
    measure_of,
    pushforward,
    sigma_closure,
    to_rational,
    uniform_space,
)
from .model import ModelDocument, load_model, parse_model, serialize_model, validate_document
from .pipeline import (
    ConvergentStage,
    DirectStage,
    DivergentStage,
    PipelineOutcome,
    PipelineSpec,
    SequentialStage,
    Verdict,
    compare_outcomes,
    identity_hook,
    proportional_hook,
    run_pipeline,
)

__version__ = "0.1.0"
