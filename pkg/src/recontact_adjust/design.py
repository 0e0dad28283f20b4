"""Fixed-order design matrices for the model layer.

Column orders are part of the on-disk contract (serialized fits name
their columns), so every builder here returns the same layout for the
same inputs.  Age enters in decades; the hospitalization models split
it by sex into two columns because rates climb differently for men and
women.  Reference levels: male, North Karelia, non-participant, Low
education, Married.
"""

import numpy as np

from .cohort import GROUPS, REGIONS, SEXES
from .glm import DesignMatrix

HORIZONS = ("full", "5y", "1y")
HORIZON_COLUMNS = {"full": "hosp_full", "5y": "hosp_5y", "1y": "hosp_1y"}

BACKGROUND_NAMES = (
    "intercept", "age_dec", "female",
    "region_NorthernSavonia", "region_TurkuLoimaa",
    "region_HelsinkiVantaa", "region_Oulu",
)

# dummy expansion of the modeled questionnaire fields
FIELD_DUMMIES = {
    "daily_smoker": ("daily_smoker",),
    "heavy_alcohol": ("heavy_alcohol",),
    "education": ("education_Mid", "education_High"),
    "civil_status": ("civil_Cohabiting", "civil_Single", "civil_Divorced", "civil_Widow"),
    "hypertension": ("hypertension",),
    "high_chol": ("high_chol",),
    "bp_recent": ("bp_recent",),
    "chol_recent": ("chol_recent",),
}


def horizon_column(horizon):
    if horizon not in HORIZON_COLUMNS:
        raise ValueError(f"unknown horizon {horizon!r}; expected one of {HORIZONS}")
    return HORIZON_COLUMNS[horizon]


def _region_dummies(region):
    return [(region == k).astype(np.float64) for k in range(1, len(REGIONS))]


def _background_block(columns):
    n = columns["age"].shape[0]
    age_dec = columns["age"] / 10.0
    female = (columns["sex"] == SEXES.index("Female")).astype(np.float64)
    cols = [np.ones(n), age_dec, female, *_region_dummies(columns["region"])]
    return cols, list(BACKGROUND_NAMES)


def _field_block(columns, field):
    """Dummy columns for one modeled field from completed (NaN-free) data."""
    v = columns[field]
    if field == "education":
        return [(v == 1).astype(np.float64), (v == 2).astype(np.float64)]
    if field == "civil_status":
        return [(v == k).astype(np.float64) for k in range(1, 5)]
    return [v.astype(np.float64)]


def imputation_design(columns, target):
    """Design for the conditional model of ``target`` given everything else.

    ``columns`` must hold completed working arrays (no NaN in predictor
    fields).  Predictors: background block plus every modeled field
    except the target itself.
    """
    cols, names = _background_block(columns)
    for field, dummy_names in FIELD_DUMMIES.items():
        if field == target:
            continue
        cols.extend(_field_block(columns, field))
        names.extend(dummy_names)
    return DesignMatrix(np.column_stack(cols), names)


def _sex_split_age(columns):
    age_dec = columns["age"] / 10.0
    female = (columns["sex"] == SEXES.index("Female")).astype(np.float64)
    return age_dec * (1.0 - female), age_dec * female, female


def hospitalization_design(columns):
    """Count and zero designs for the assumption-checking model.

    Count: intercept, age by sex (decades), female, four region dummies,
    participant, re-contact.  Zero: same without the regions.
    Non-participant is the reference group.
    """
    n = columns["age"].shape[0]
    age_m, age_w, female = _sex_split_age(columns)
    participant = (columns["group"] == GROUPS.index("Participant")).astype(np.float64)
    recontact = (columns["group"] == GROUPS.index("RecontactRespondent")).astype(np.float64)
    count = DesignMatrix(
        np.column_stack([np.ones(n), age_m, age_w, female,
                         *_region_dummies(columns["region"]), participant, recontact]),
        ["intercept", "age_men_dec", "age_women_dec", "female",
         "region_NorthernSavonia", "region_TurkuLoimaa",
         "region_HelsinkiVantaa", "region_Oulu", "participant", "recontact"],
    )
    zero = DesignMatrix(
        np.column_stack([np.ones(n), age_m, age_w, female, participant, recontact]),
        ["intercept", "age_men_dec", "age_women_dec", "female", "participant", "recontact"],
    )
    return count, zero


def prediction_design(columns, with_participant):
    """Designs for the per-1000 prediction model on completed data.

    Count: background, age split by sex, smoking and heavy-drinking
    indicators; zero: demographic terms only.  ``with_participant``
    adds the participant indicator to both parts (used by the strategy
    that treats re-contact respondents as stand-ins for
    non-participants, so predictions for the unexamined use the
    re-contact level).
    """
    n = columns["age"].shape[0]
    age_m, age_w, female = _sex_split_age(columns)
    count_cols = [np.ones(n), age_m, age_w, female,
                  *_region_dummies(columns["region"]),
                  columns["daily_smoker"].astype(np.float64),
                  columns["heavy_alcohol"].astype(np.float64)]
    count_names = ["intercept", "age_men_dec", "age_women_dec", "female",
                   "region_NorthernSavonia", "region_TurkuLoimaa",
                   "region_HelsinkiVantaa", "region_Oulu",
                   "daily_smoker", "heavy_alcohol"]
    zero_cols = [np.ones(n), age_m, age_w, female]
    zero_names = ["intercept", "age_men_dec", "age_women_dec", "female"]
    if with_participant:
        participant = (columns["group"] == GROUPS.index("Participant")).astype(np.float64)
        count_cols.append(participant)
        count_names.append("participant")
        zero_cols.append(participant)
        zero_names.append("participant")
    return (DesignMatrix(np.column_stack(count_cols), count_names),
            DesignMatrix(np.column_stack(zero_cols), zero_names))
