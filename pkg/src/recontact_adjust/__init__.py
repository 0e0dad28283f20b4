"""Survey non-participation adjustment toolkit.

Health examination surveys lose people in two ways: invitees who skip
the exam entirely, and participants who leave items blank.  When a
mailed re-contact questionnaire reaches some of the non-participants,
their answers support imputation models in which missingness may
depend on the missing values themselves.  This package generates
register-linked synthetic cohorts, runs three multiple-imputation
strategies over them, checks the identifying assumptions against
hospitalization records, and reports pooled prevalence and rate
estimates.
"""

__version__ = "0.1.0"

from .assumptions import (
    AssumptionReport,
    CoefficientInterval,
    PerThousand,
    evaluate_assumptions,
    fit_hospitalization_model,
    predicted_per_1000,
)
from .cohort import (
    CohortTable,
    Provenance,
    classify_group,
    classify_heavy_alcohol,
    load_cohort,
    summarize_cohort,
    write_cohort,
)
from .errors import (
    CohortSchemaError,
    CohortValueError,
    CollinearityError,
    ConfigError,
    ConvergenceError,
    DataError,
    DonorPoolError,
    NumericError,
    RecontactAdjustError,
    SeparationError,
    TruthUnavailableError,
)
from .glm import (
    DesignMatrix,
    GlmFit,
    ZinbFit,
    draw_coefficients,
    fit_logistic,
    fit_negbin,
    fit_zinb,
    loglik_zinb,
    predict_expected_count,
)
from .mi import (
    STRATEGIES,
    ImputationModelSpec,
    MultipleImputations,
    PooledEstimate,
    complete_case_prevalence,
    estimate_prevalence,
    fcs_impute,
    pool,
)
from .synth import (
    SynthConfig,
    expected_per_1000,
    expected_prevalence,
    generate_cohort,
    load_config,
    make_assumption3_config,
    make_five_year_config,
    make_full_history_config,
    make_rate_calibrated_config,
    save_config,
    scale_config,
    truth_prevalence,
    write_truth,
)

__all__ = [name for name in dir() if not name.startswith("_")]
