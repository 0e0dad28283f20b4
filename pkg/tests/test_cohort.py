"""Cohort schema, classification, round-trip and summary tests."""

import csv

import numpy as np
import pytest

from recontact_adjust.cohort import (
    AGE_BANDS,
    CSV_COLUMNS,
    EDUCATION_LEVELS,
    GROUPS,
    HEAVY_PORTIONS_FEMALE,
    HEAVY_PORTIONS_MALE,
    CohortTable,
    HospitalizationCounts,
    Provenance,
    age_band_index,
    age_band_label,
    classify_group,
    classify_heavy_alcohol,
    load_cohort,
    summarize_cohort,
    write_cohort,
)
from recontact_adjust.errors import (
    CohortSchemaError,
    CohortValueError,
    DataError,
)

NAN = float("nan")


def tiny_columns():
    """Eight hand-written rows covering all groups and missing patterns."""
    return {
        "id": [1, 2, 3, 4, 5, 6, 7, 8],
        "sex": [0, 1, 0, 1, 0, 1, 0, 1],
        "age": [30, 44, 55, 62, 70, 25, 74, 51],
        "region": [0, 2, 4, 3, 1, 0, 2, 4],
        "group": [0, 0, 0, 1, 1, 2, 2, 0],
        "daily_smoker": [1, 0, NAN, 1, 0, NAN, NAN, 0],
        "alcohol_portions": [30.0, 16.0, NAN, 18.5, 0.0, NAN, NAN, 2.0],
        "heavy_alcohol": [1, 0, NAN, 1, 0, NAN, NAN, 0],
        "education": [0, 1, 2, 0, 1, NAN, NAN, 1],
        "civil_status": [0, 1, 2, 4, 3, NAN, NAN, 0],
        "hypertension": [0, 0, 1, 0, 1, NAN, NAN, 0],
        "high_chol": [1, 0, 1, 0, 0, NAN, NAN, 0],
        "bp_recent": [1, 1, 0, 1, 0, NAN, NAN, 1],
        "chol_recent": [0, 1, 1, 0, 0, NAN, NAN, 1],
        "hosp_full": [2, 0, 5, 1, 3, 0, 4, 0],
        "hosp_5y": [1, 0, 3, 1, 2, 0, 2, 0],
        "hosp_1y": [0, 0, 1, 1, 2, 0, 1, 0],
    }


def tiny_table():
    return CohortTable(tiny_columns(), Provenance(kind="synthetic"))


# ---------------------------------------------------------------------------
# classifiers


def test_classify_group_covers_the_three_labels():
    assert classify_group(True, False) == "Participant"
    assert classify_group(False, True) == "RecontactRespondent"
    assert classify_group(False, False) == "NonParticipant"


def test_classify_group_rejects_examined_with_questionnaire():
    with pytest.raises(CohortValueError) as err:
        classify_group(True, True, row_id=42)
    assert "row id 42" in str(err.value)


def test_heavy_alcohol_thresholds_are_strict():
    # at the limit is not heavy; strictly above is
    assert classify_heavy_alcohol("Female", HEAVY_PORTIONS_FEMALE) is False
    assert classify_heavy_alcohol("Female", HEAVY_PORTIONS_FEMALE + 0.1) is True
    assert classify_heavy_alcohol("Male", HEAVY_PORTIONS_MALE) is False
    assert classify_heavy_alcohol("Male", HEAVY_PORTIONS_MALE + 0.5) is True
    # women's limit does not apply to men
    assert classify_heavy_alcohol("Male", 20.0) is False


def test_heavy_alcohol_rejects_bad_inputs():
    with pytest.raises(CohortValueError):
        classify_heavy_alcohol("Female", -1.0)
    with pytest.raises(CohortValueError):
        classify_heavy_alcohol("Other", 5.0)


def test_age_bands():
    assert age_band_label(25) == "25-34"
    assert age_band_label(34) == "25-34"
    assert age_band_label(35) == "35-44"
    assert age_band_label(74) == "65-74"
    assert list(age_band_index(np.array([25, 44, 45, 64, 65]))) == [0, 1, 2, 3, 4]


def test_hospitalization_counts_must_nest():
    HospitalizationCounts(3, 2, 1)
    with pytest.raises(CohortValueError):
        HospitalizationCounts(1, 2, 1)
    with pytest.raises(CohortValueError):
        HospitalizationCounts(3, 1, 2)


# ---------------------------------------------------------------------------
# table construction and validation


def test_table_basics():
    t = tiny_table()
    assert len(t) == 8
    assert t.group_counts() == {
        "Participant": 4, "RecontactRespondent": 2, "NonParticipant": 2,
    }
    assert list(np.nonzero(t.group_mask("NonParticipant"))[0]) == [5, 6]


def test_row_view_translates_codes():
    r = tiny_table().row(3)
    assert r.id == 4
    assert r.background.sex == "Female"
    assert r.background.age_group == "55-64"
    assert r.group == "RecontactRespondent"
    assert r.questionnaire.civil_status == "Widow"
    assert r.questionnaire.heavy_alcohol is True
    assert r.hospitalizations.five_year == 1


def test_validation_duplicate_ids():
    cols = tiny_columns()
    cols["id"][1] = 1
    with pytest.raises(CohortValueError, match="duplicate"):
        CohortTable(cols, Provenance(kind="synthetic"))


def test_validation_age_range():
    cols = tiny_columns()
    cols["age"][0] = 24
    with pytest.raises(CohortValueError, match="age out of range"):
        CohortTable(cols, Provenance(kind="synthetic"))


def test_validation_binary_fields():
    cols = tiny_columns()
    cols["hypertension"][0] = 2.0
    with pytest.raises(CohortValueError, match="hypertension"):
        CohortTable(cols, Provenance(kind="synthetic"))


def test_validation_nonparticipant_questionnaire_must_be_missing():
    cols = tiny_columns()
    cols["daily_smoker"][5] = 1.0
    with pytest.raises(CohortValueError, match="non-participant"):
        CohortTable(cols, Provenance(kind="synthetic"))


def test_completed_tables_may_fill_nonparticipants():
    cols = tiny_columns()
    cols["daily_smoker"][5] = 1.0
    t = CohortTable(cols, Provenance(kind="completed"))
    assert t.columns["daily_smoker"][5] == 1.0


def test_validation_heavy_flag_must_match_portions():
    cols = tiny_columns()
    cols["heavy_alcohol"][0] = 0.0  # portions 30 on a man is heavy
    with pytest.raises(CohortValueError, match="portions classifier"):
        CohortTable(cols, Provenance(kind="synthetic"))


def test_validation_horizon_nesting():
    cols = tiny_columns()
    cols["hosp_1y"][0] = 9
    with pytest.raises(CohortValueError, match="nest"):
        CohortTable(cols, Provenance(kind="synthetic"))


def test_empty_cohort_rejected():
    cols = {k: [] for k in tiny_columns()}
    with pytest.raises(DataError, match="no rows"):
        CohortTable(cols, Provenance(kind="synthetic"))


def test_replace_columns_leaves_original_untouched():
    t = tiny_table()
    smoker = t.columns["daily_smoker"].copy()
    smoker[2] = 1.0
    t2 = t.replace_columns(provenance=Provenance(kind="completed"),
                           daily_smoker=smoker)
    assert np.isnan(t.columns["daily_smoker"][2])
    assert t2.columns["daily_smoker"][2] == 1.0


# ---------------------------------------------------------------------------
# CSV round trip


def test_write_load_round_trip(tmp_path):
    t = tiny_table()
    path = tmp_path / "cohort.csv"
    write_cohort(t, path)
    back = load_cohort(path)
    assert back.provenance.kind == "ingested"
    for name in CohortTable.INT_COLUMNS:
        assert np.array_equal(t.columns[name], back.columns[name]), name
    for name in CohortTable.FLOAT_COLUMNS:
        a, b = t.columns[name], back.columns[name]
        assert np.array_equal(np.isnan(a), np.isnan(b)), name
        assert np.array_equal(a[~np.isnan(a)], b[~np.isnan(b)]), name


def test_round_trip_is_byte_stable(tmp_path):
    t = tiny_table()
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_cohort(t, p1)
    write_cohort(load_cohort(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_csv_invariants_hold_in_raw_text(tmp_path):
    """Re-check table invariants from the serialized file itself."""
    path = tmp_path / "cohort.csv"
    write_cohort(tiny_table(), path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len({r["id"] for r in rows}) == len(rows)
    for r in rows:
        assert int(r["hosp_1y"]) <= int(r["hosp_5y"]) <= int(r["hosp_full"])
        if r["group"] == "NonParticipant":
            assert all(r[c] == "" for c in CSV_COLUMNS[5:13])
        if r["alcohol_portions"] != "":
            limit = (HEAVY_PORTIONS_FEMALE if r["sex"] == "Female"
                     else HEAVY_PORTIONS_MALE)
            heavy = float(r["alcohol_portions"]) > limit
            # flag is derivable on load, so smoker/portions rows never
            # contradict the classifier
            assert classify_heavy_alcohol(r["sex"], float(r["alcohol_portions"])) == heavy


def test_extra_columns_are_appended_and_not_reloadable(tmp_path):
    t = tiny_table()
    path = tmp_path / "completed.csv"
    write_cohort(t, path, extra_columns={"heavy_alcohol": t.columns["heavy_alcohol"]})
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    assert header == list(CSV_COLUMNS) + ["heavy_alcohol"]
    with pytest.raises(CohortSchemaError, match="header mismatch"):
        load_cohort(path)


# ---------------------------------------------------------------------------
# load error reporting


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _valid_row():
    return ["1", "Male", "30", "NorthKarelia", "Participant",
            "1", "30.0", "Low", "Married", "0", "1", "1", "0",
            "2", "1", "0"]


def test_load_empty_file(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("")
    with pytest.raises(CohortSchemaError, match="empty file"):
        load_cohort(path)


def test_load_header_mismatch(tmp_path):
    path = tmp_path / "x.csv"
    _write_rows(path, ["id", "sex"], [])
    with pytest.raises(CohortSchemaError, match="header mismatch"):
        load_cohort(path)


def test_load_no_data_rows(tmp_path):
    path = tmp_path / "x.csv"
    _write_rows(path, CSV_COLUMNS, [])
    with pytest.raises(CohortSchemaError, match="no data rows"):
        load_cohort(path)


def test_load_short_record_names_line(tmp_path):
    path = tmp_path / "x.csv"
    _write_rows(path, CSV_COLUMNS, [_valid_row(), ["7", "oops"]])
    with pytest.raises(CohortSchemaError, match="line 3: 2 fields"):
        load_cohort(path)


@pytest.mark.parametrize(
    "column,value,message",
    [
        ("sex", "Unknown", "not in"),
        ("age", "sixty", "expected integer"),
        ("age", "90", "outside"),
        ("daily_smoker", "yes", "expected 0/1/empty"),
        ("alcohol_portions", "-3", "negative"),
        ("education", "PhD", "not in"),
        ("hosp_full", "-1", "must be >= 0"),
    ],
)
def test_load_value_errors_name_line_and_column(tmp_path, column, value, message):
    row = _valid_row()
    row[CSV_COLUMNS.index(column)] = value
    path = tmp_path / "x.csv"
    _write_rows(path, CSV_COLUMNS, [row])
    with pytest.raises(CohortValueError) as err:
        load_cohort(path)
    text = str(err.value)
    assert "line 2" in text
    assert repr(column) in text
    assert message in text


def test_load_duplicate_id_names_second_line(tmp_path):
    r1, r2 = _valid_row(), _valid_row()
    path = tmp_path / "x.csv"
    _write_rows(path, CSV_COLUMNS, [r1, r2])
    with pytest.raises(CohortValueError, match="line 3.*duplicate id 1"):
        load_cohort(path)


def test_load_nonparticipant_with_data_rejected(tmp_path):
    row = _valid_row()
    row[CSV_COLUMNS.index("group")] = "NonParticipant"
    path = tmp_path / "x.csv"
    _write_rows(path, CSV_COLUMNS, [row])
    with pytest.raises(CohortValueError, match="non-participant row"):
        load_cohort(path)


def test_load_rederives_heavy_flag(tmp_path):
    path = tmp_path / "x.csv"
    _write_rows(path, CSV_COLUMNS, [_valid_row()])
    t = load_cohort(path)
    assert t.columns["heavy_alcohol"][0] == 1.0  # 30 portions on a man


# ---------------------------------------------------------------------------
# summary


def test_summarize_counts_and_wald_cells():
    s = summarize_cohort(tiny_table())
    assert s["n_total"] == 8
    part = s["groups"]["Participant"]
    assert part["n"] == 4
    # 2 women of 4
    assert part["women"]["pct"] == pytest.approx(50.0)
    half = 1.96 * np.sqrt(0.5 * 0.5 / 4)
    assert part["women"]["ci"][1] == pytest.approx(100 * (0.5 + half))
    # participant men: ids 1 (smoker) and 3 (missing) -> 1 of 1 observed
    assert part["daily_smoker"]["male"]["all"]["pct"] == pytest.approx(100.0)
    assert part["daily_smoker"]["male"]["all"]["n"] == 1
    ages = np.array([30, 44, 55, 51])
    assert part["age_mean"]["mean"] == pytest.approx(ages.mean())


def test_summarize_marks_empty_cells_unavailable():
    cols = tiny_columns()
    cols["group"] = [0, 0, 0, 1, 1, 0, 0, 0]  # no non-participants
    s = summarize_cohort(CohortTable(cols, Provenance(kind="completed")))
    assert s["groups"]["NonParticipant"] == {"n": 0, "available": False}
    # no recontact rows in the 65-74 band
    rec = s["groups"]["RecontactRespondent"]
    assert rec["daily_smoker"]["male"]["25-34"] is None


def test_summarize_age_band_shares_sum_to_one():
    s = summarize_cohort(tiny_table())
    for g in GROUPS:
        entry = s["groups"][g]
        total = sum(cell["pct"] for cell in entry["age_bands"].values()
                    if cell is not None)
        assert total == pytest.approx(100.0)


def test_summarize_education_uses_observed_denominator():
    s = summarize_cohort(tiny_table())
    part = s["groups"]["Participant"]
    # all four participants have education observed: Low 1, Mid 2, High 1
    assert part["education"]["Mid"]["pct"] == pytest.approx(50.0)
    assert part["education"]["Mid"]["n"] == 4
    assert [part["education"][lev]["pct"] for lev in EDUCATION_LEVELS] == [
        pytest.approx(25.0), pytest.approx(50.0), pytest.approx(25.0)]
