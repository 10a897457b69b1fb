"""Diagnose the causal structure of dataset shift and audit fairness transfer."""

__version__ = "0.1.0"

from .exceptions import ShiftAuditError
from .fairness import (
    FairnessReport,
    PredictionSet,
    demographic_parity_gap,
    equalized_odds_gap,
    fairness_transfer_report,
    subgroup_accuracy,
)
from .graph import (
    CausalGraph,
    FairnessCriterion,
    NodeRole,
    blocking_set,
    build_graph,
    d_separated,
    parse_graph_spec,
    separating_set,
    table_form,
)
from .mitigation import (
    GroupThresholdClassifier,
    apply_thresholds,
    fit_group_thresholds,
    mitigation_transfer_experiment,
)
from .shift import (
    DirectEffectConfig,
    ShiftVerdict,
    SummaryScorer,
    Verdict,
    classify_shift,
    direct_effect_test,
    fit_summary_model,
)
from .stats import bonferroni, weighted_welch_ttest
from .synthetic import DermatologySpec, ScenarioSpec, generate, generate_dermatology_style
from .weighting import (
    PropensityConfig,
    PropensityModel,
    WeightScheme,
    compute_weights,
    fit_propensity,
)
