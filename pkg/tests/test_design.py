"""Design-matrix layout contracts."""

import numpy as np
import pytest

from recontact_adjust.design import (
    FIELD_DUMMIES,
    horizon_column,
    hospitalization_design,
    imputation_design,
    prediction_design,
)


@pytest.fixture
def completed_columns():
    rng = np.random.default_rng(7)
    n = 40
    return {
        "age": rng.integers(25, 75, size=n).astype(np.int64),
        "sex": rng.integers(0, 2, size=n),
        "region": rng.integers(0, 5, size=n),
        "group": rng.integers(0, 3, size=n),
        "daily_smoker": rng.integers(0, 2, size=n).astype(float),
        "heavy_alcohol": rng.integers(0, 2, size=n).astype(float),
        "education": rng.integers(0, 3, size=n).astype(float),
        "civil_status": rng.integers(0, 5, size=n).astype(float),
        "hypertension": rng.integers(0, 2, size=n).astype(float),
        "high_chol": rng.integers(0, 2, size=n).astype(float),
        "bp_recent": rng.integers(0, 2, size=n).astype(float),
        "chol_recent": rng.integers(0, 2, size=n).astype(float),
    }


def test_horizon_column_mapping():
    assert horizon_column("full") == "hosp_full"
    assert horizon_column("5y") == "hosp_5y"
    assert horizon_column("1y") == "hosp_1y"
    with pytest.raises(ValueError, match="unknown horizon"):
        horizon_column("2y")


def test_imputation_design_excludes_target(completed_columns):
    X = imputation_design(completed_columns, "daily_smoker")
    assert "daily_smoker" not in X.names
    assert X.names[0] == "intercept"
    # background (7) + all other fields' dummies
    expect = 7 + sum(len(v) for f, v in FIELD_DUMMIES.items() if f != "daily_smoker")
    assert X.matrix.shape == (40, expect)
    assert list(X.names).index("heavy_alcohol") == 7


def test_imputation_design_dummy_coding(completed_columns):
    X = imputation_design(completed_columns, "heavy_alcohol")
    mid = X.matrix[:, list(X.names).index("education_Mid")]
    high = X.matrix[:, list(X.names).index("education_High")]
    np.testing.assert_array_equal(mid, completed_columns["education"] == 1)
    np.testing.assert_array_equal(high, completed_columns["education"] == 2)
    # reference level rows have both dummies zero
    low = completed_columns["education"] == 0
    assert np.all(mid[low] == 0) and np.all(high[low] == 0)
    widow = X.matrix[:, list(X.names).index("civil_Widow")]
    np.testing.assert_array_equal(widow, completed_columns["civil_status"] == 4)


def test_imputation_design_same_layout_for_any_target(completed_columns):
    for target in FIELD_DUMMIES:
        X = imputation_design(completed_columns, target)
        assert list(X.names[:7]) == [
            "intercept", "age_dec", "female", "region_NorthernSavonia",
            "region_TurkuLoimaa", "region_HelsinkiVantaa", "region_Oulu"]
        for name in FIELD_DUMMIES[target]:
            assert name not in X.names


def test_age_enters_in_decades(completed_columns):
    X = imputation_design(completed_columns, "daily_smoker")
    np.testing.assert_allclose(X.matrix[:, 1], completed_columns["age"] / 10.0)


def test_hospitalization_design_layout(completed_columns):
    count, zero = hospitalization_design(completed_columns)
    assert list(count.names) == [
        "intercept", "age_men_dec", "age_women_dec", "female",
        "region_NorthernSavonia", "region_TurkuLoimaa",
        "region_HelsinkiVantaa", "region_Oulu", "participant", "recontact"]
    assert list(zero.names) == [
        "intercept", "age_men_dec", "age_women_dec", "female",
        "participant", "recontact"]
    female = completed_columns["sex"] == 1
    age_m = count.matrix[:, 1]
    age_w = count.matrix[:, 2]
    # split age columns partition the age term by sex
    assert np.all(age_m[female] == 0)
    assert np.all(age_w[~female] == 0)
    np.testing.assert_allclose(age_m + age_w, completed_columns["age"] / 10.0)
    # non-participant is the reference: both group dummies zero
    nonpart = completed_columns["group"] == 2
    assert np.all(count.matrix[nonpart][:, 8:10] == 0)


def test_prediction_design_participant_toggle(completed_columns):
    count, zero = prediction_design(completed_columns, with_participant=False)
    assert "participant" not in count.names
    assert "participant" not in zero.names
    assert list(count.names[-2:]) == ["daily_smoker", "heavy_alcohol"]
    count_p, zero_p = prediction_design(completed_columns, with_participant=True)
    assert count_p.names[-1] == "participant"
    assert zero_p.names[-1] == "participant"
    part = completed_columns["group"] == 0
    np.testing.assert_array_equal(count_p.matrix[:, -1], part.astype(float))
