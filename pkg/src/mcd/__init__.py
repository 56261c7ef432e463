"""Model-agnostic counterfactual design search with decoupled resampling.

Given a query design, black-box predictors, and hard output requirements,
the optimizer searches for feasible design modifications with a
mixed-variable evolutionary algorithm, then any number of weighted, diverse
counterfactual sets can be drawn from the resulting archive without further
model evaluations.
"""

from .design_space import (
    CATEGORICAL,
    CONTINUOUS,
    Dataset,
    DesignSchema,
    DesignSpaceError,
    FeatureSpec,
    RowValidationError,
    SchemaMismatchError,
    ValidationResult,
    load_dataset,
    load_schema,
    random_point,
    uniform_point,
    validate_point,
)
from .objectives import (
    AuxiliaryObjectiveSpec,
    ObjectiveValues,
    avg_gower_to_knn,
    changed_feature_ratio,
    evaluate_objectives,
    gower_distance,
)
from .optimizer import (
    ArchiveEntry,
    ArchiveError,
    CandidateArchive,
    GenerationProgress,
    Individual,
    OptimizationError,
    OptimizerConfig,
    crowding_distance,
    dominates,
    make_offspring,
    nondominated_sort,
    revert_operator,
    run_optimization,
)
from .predictors import (
    BuiltinBackend,
    PredictionRecord,
    PredictorError,
    PredictorRuntime,
    PredictorSpec,
    SubprocessBackend,
    register_builtin,
    run_worker,
)
from .problem import (
    ConfigError,
    DomainConstraintSpec,
    OutputConstraint,
    ProblemSpec,
    constraint_violation,
    is_valid_counterfactual,
    load_problem_config,
    parse_problem_config,
    register_domain_constraint,
)
from .sampler import (
    ArchiveMismatchError,
    CounterfactualSet,
    SampledCounterfactual,
    SamplingError,
    SamplingRequest,
    TargetSpec,
    alpha_pair_schedule,
    diversity_matrix,
    dtai,
    dtai_objective_score,
    k_greedy_sample,
    quality_score,
    quality_scores,
    quality_weight_schedule,
    sample,
    sweep,
)

__version__ = "0.1.0"
