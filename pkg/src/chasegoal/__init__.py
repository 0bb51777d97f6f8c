"""Goal-driven query answering for terminating existential rules with
equality: singularize, Skolemize, prune by relevance, focus with equality-
aware magic sets, defunctionalize, and chase with representatives."""

from .chase import (
    BodyContractViolation,
    ChaseResult,
    ChaseStats,
    DepthLimitExceeded,
    FactLimitExceeded,
    Limits,
    chase,
    constant_answers,
    extract_answers,
    naive_fixpoint,
)
from .driver import (
    PipelineConfig,
    PipelineError,
    RunReport,
    dump_stage,
    emit_report,
    format_stats,
    run_pipeline,
)
from .eqprep import (
    check_eq_safety,
    congruence_axioms,
    reflexivity_axioms,
    singularize,
    skolemize,
    sym_trans,
)
from .finalize import NonVariableEqualityBody, defunctionalize, desingularize
from .frontend import (
    ArityMismatch,
    FrontendError,
    MalformedRule,
    Scenario,
    UnboundFrontierVariable,
    UnknownPredicate,
    load_scenario,
    parse_instance,
    parse_program,
    parse_rules,
    parse_schema,
    serialize_program,
)
from .kernel import (
    EGD,
    EQUALITY,
    Atom,
    Constant,
    FunPredicate,
    Functional,
    Instance,
    MagicPredicate,
    Predicate,
    Program,
    Rule,
    TGD,
    Variable,
    compare_terms,
    enumerate_matches,
    eq,
    map_shallow,
    substitute,
)
from .magic import NoAdmissibleOrdering, adorn, magic, reorder
from .relevance import (
    AbstractionFixpointDiverged,
    SortMismatch,
    abstract_functions_to_constants,
    critical_instance,
    relevance,
)

__all__ = [n for n in dir() if not n.startswith("_")]
