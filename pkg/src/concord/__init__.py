"""Multi-stakeholder decision engine.

Learns per-actor reward predictors and an outcome predictor, aggregates
them into expected-reward matrices, selects actions with game-theoretic
compromise rules, ranks strategies by a normalized composite score, and
emits robustness certificates bounding score degradation under
coalition-bounded reward perturbations.
"""

from .core_model import (
    ActionSpace,
    AugmentedDataset,
    Context,
    Dataset,
    DatasetSchema,
    ExpectedRewardMatrix,
    OutcomeSpace,
    PredictedRewardMatrix,
    RewardTensor,
    StakeholderSet,
    build_expected_reward_matrix,
    build_expected_reward_tensor,
    clip_to_tube,
    ingest_csv,
    write_csv,
)
from .errors import (
    ConcordError,
    ConfigurationError,
    DimensionError,
    FeasibilityError,
    ParameterError,
    SchemaError,
    StateError,
    TableLookupError,
    ValidationError,
)
from .evaluation import (
    CostModel,
    Metric,
    MetricInputs,
    SelectionResult,
    accuracy_metric,
    action_entropy,
    composite_score,
    compute_raw_metric,
    cross_validate_select,
    demographic_parity_metric,
    estimate_overhead,
    normalize_scores,
    precision_macro_metric,
    value_metric,
)
from .learners import (
    DEFAULT_OUTCOME_CONFIG,
    DEFAULT_REWARD_GRID,
    LearnerConfig,
    ModelReport,
    OutcomePredictor,
    RewardModel,
    fit_cate_tlearner,
    fit_outcome_model,
    fit_reward_model,
    predict_reward_matrix,
)
from .robustness import (
    Certificate,
    PerturbationSpec,
    RankingCertificate,
    RuleConstants,
    RuleScorer,
    brute_force_worst_case,
    check_feasibility,
    check_ranking_consistency,
    estimate_constants,
    estimate_gradient_l1,
    optimal_temperature,
    robust_lower_bound,
    sharp_composite_score,
    smooth_composite_score,
)
from .scenarios import (
    GeneratedScenario,
    ScenarioSpec,
    case_metrics,
    generate,
    generate_healthcare,
    generate_lending,
)
from .strategies import (
    ActionDistribution,
    CompromiseRule,
    Strategy,
    StrategySet,
    decide,
    default_compromise_strategies,
    score_actions,
    select_sharp,
    select_smooth,
)

__version__ = "0.1.0"
