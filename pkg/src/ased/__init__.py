"""Architecture search by estimation of network structure distributions.

The search state is a single row-stochastic matrix (the prototype) whose
row i is the categorical distribution of layer i's type.  Each iteration
samples candidate networks from it, evaluates them, and recomputes the
matrix from the best performers; convergence-control operators (capping,
inversion) keep the distribution from collapsing prematurely.
"""

from .architecture import (
    CandidateArchitecture,
    InfeasibleArchitecture,
    ShapeTrace,
    ShortcutPattern,
    apply_pattern,
    effective_depth,
    format_layers,
    generate_residual,
    generate_semi_dense,
    load_architecture,
    parameter_count,
    parse_layers,
    save_architecture,
    trace_shapes,
)
from .evaluation import (
    EvaluationRequest,
    EvaluationTimeout,
    EvaluatorPool,
    PoolExhausted,
    ProtocolViolation,
    SurrogateEvaluator,
    SurrogateSpec,
    WorkerClient,
    WorkerCrash,
    WorkerError,
    derive_rng,
    derive_seed,
    dispatch,
    evaluate_external,
    evaluate_surrogate,
)
from .layer_library import (
    LayerKind,
    LayerLibrary,
    LayerType,
    UnknownShorthand,
    default_library,
    library_from_tokens,
    lookup,
    parse_token,
)
from .metrics import (
    EvaluationResult,
    accuracy,
    candidate_log_row,
    failed_result,
    matthews_multiclass,
    rank_candidates,
)
from .prototype import (
    CapConfig,
    Prototype,
    argmax_architecture,
    cap_normalize,
    invert_full,
    invert_partial,
    is_fully_converged,
    mean_l2_norm,
    row_l2_norm,
    sample,
    uniform,
    update_from_selection,
)
from .search import (
    ConfigError,
    IterationStats,
    SearchAborted,
    SearchConfig,
    SearchOutcome,
    SearchState,
    convergence_control_step,
    growth_for,
    max_depth,
    profile,
    run,
)

__version__ = "0.1.0"
