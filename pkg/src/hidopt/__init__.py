"""Interactive multi-objective optimization with online objective reduction."""

from .core import (
    DimensionMismatchError,
    DomainBoundsError,
    EngineStateError,
    EvalCounter,
    Individual,
    InsufficientDataError,
    ParameterError,
    ScheduleError,
    SnapshotMismatchError,
    apply_mask,
    dominates,
)
from .detection import (
    DetectionConfig,
    UnivariateScores,
    feature_contribution,
    rfe_select,
    select_univariate,
    univariate_scores,
)
from .dm import UtilityFunction, competition_ranks, mdm_rank, utility
from .engine import (
    SecondaryCriterion,
    VariationParams,
    crowding_criterion,
    crowding_distance,
    evolve,
    fast_nondominated_sort,
    random_population,
    variation,
)
from .learning import LearnParams, UtilityModel, fit_utility, predict_score
from .orchestrator import RunConfig, RunRecord, RunState, run, select_examples
from .problems import (
    DtlzProblem,
    RmnkInstance,
    RmnkProblem,
    make_problem,
    problem_bounds,
    rmnk_evaluate,
    rmnk_generate,
)

__version__ = "0.1.0"
