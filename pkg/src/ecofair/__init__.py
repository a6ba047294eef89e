"""ecofair: fairness of ecosystems of competing classifiers.

Closed-form levels and worst-case bounds, exact joint-distribution models,
empirical audits of prediction tables, derived Equal-Opportunity
post-processing, deterministic learners, and a replicated experiment
harness measuring whether individual fairness adjustment harms ecosystem
fairness.
"""

from .audit import (
    PredictionTable,
    batch_to_table,
    empirical_correlation,
    empirical_fairness,
    table_from_model,
)
from .harness import (
    ExperimentConfig,
    IntervalEstimate,
    ReplicateResult,
    effect_size,
    harm_likelihood,
    run_experiment,
    summarize,
)
from .joint import (
    EcosystemModel,
    JointConditionalPMF,
    SampleBatch,
    build_model,
    exact_sample_counts,
    extremal_pmf,
    monoculture_pmf,
    overlap_group_pmf,
    overlap_pmf,
    pair_pmf_from_correlation,
    pmf_fairness_levels,
    product_pmf,
    sample,
)
from .learners import Dataset, FittedModel, LearnerConfig, predict, train
from .levels import (
    CorrelationPair,
    ErrorProfile,
    FairnessLevels,
    OverlapRow,
    UtilityKind,
    correlation_feasible_range,
    dpc_correlation_level,
    dpc_correlation_worst_case,
    dpc_overlap_level,
    dpc_overlap_worst_case,
    edc_lower_bound,
    eoc_correlation_level,
    eoc_correlation_worst_case,
    eoc_overlap_level,
    eoc_overlap_worst_case,
    eoc_worst_case_n,
    veoc_correlation_level,
    veoc_worst_case,
)
from .postprocess import (
    DerivedPolicy,
    PolicyFitReport,
    RatePoint,
    apply_policies_to_model,
    apply_policy,
    fit_eo_policy,
    fit_eo_policy_from_masses,
    equalizing_candidates,
    policy_loss,
    stratum_masses,
)
from .scenarios import Scenario, get_scenario
from .synth import CsvSchema, SyntheticSpec, generate_synthetic, load_csv

__version__ = "0.1.0"
