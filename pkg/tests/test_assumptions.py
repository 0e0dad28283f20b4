"""Assumption checks: ZINB group-indicator verdicts and per-1000 rates."""

from types import SimpleNamespace

import numpy as np
import pytest

from recontact_adjust import assumptions, design, mi, synth
from recontact_adjust.assumptions import (
    CoefficientInterval,
    coefficient_interval,
    evaluate_assumptions,
    predicted_per_1000,
)
from recontact_adjust.errors import DataError


@pytest.fixture(scope="module")
def checked():
    """Calibrated 10000-invitee cohort with all three horizons fitted."""
    table = synth.generate_cohort(synth.make_five_year_config(), seed=1)
    return table, evaluate_assumptions(table)


def test_calibrated_cohort_reproduces_expected_verdicts(checked):
    _, report = checked
    assert report.complete
    for horizon in ("5y", "1y"):
        check = report.horizon(horizon)
        assert check.assumption2_supported is False
        assert check.assumption3_supported is True


def test_verdicts_are_recomputable_from_the_fit(checked):
    _, report = checked
    for check in report.horizons.values():
        assert check.fitted
        part = coefficient_interval(check.fit, "count", "participant")
        rec = coefficient_interval(check.fit, "count", "recontact")
        assert part.contains_zero() == check.assumption2_supported
        assert rec.contains_zero() == check.assumption3_supported
        assert part.estimate == check.count_participant.estimate
        assert rec.ci_low == check.count_recontact.ci_low


def test_zero_model_intervals_reported_but_not_used(checked):
    _, report = checked
    check = report.horizon("5y")
    for interval in (check.zero_participant, check.zero_recontact):
        assert np.isfinite(interval.estimate)
        assert interval.ci_low < interval.estimate < interval.ci_high
    d = check.to_dict()
    for key in ("count_participant", "count_recontact",
                "zero_participant", "zero_recontact"):
        assert set(d[key]) == {"estimate", "ci_low", "ci_high"}
    assert d["assumption2_supported"] is False


def test_report_serializes(checked):
    table, report = checked
    d = report.to_dict()
    assert d["complete"] is True
    assert d["n_rows"] == len(table)
    assert d["group_counts"] == table.group_counts()
    assert set(d["horizons"]) == set(design.HORIZONS)
    assert d["horizons"]["full"]["fitted"] is True


def test_text_report_layout(checked):
    _, report = checked
    text = report.to_text()
    assert "Horizon: five years" in text
    assert "Count model (log rate)" in text
    assert "Excess-zero model (log odds)" in text
    assert "dispersion" in text
    assert "assumption (2): violated" in text
    assert "assumption (3): supported" in text
    assert "(1) data are missing completely at random" in text
    assert "re-contact respondents represent non-participants" in text
    assert "warning" not in text  # 10000 rows is not a small sample


def test_small_sample_report_warns():
    config = synth.scale_config(synth.make_five_year_config(), 0.005)
    table = synth.generate_cohort(config, seed=0)
    report = evaluate_assumptions(table)
    text = report.to_text()
    assert f"warning: only {len(table)} rows" in text
    # failed horizons must be reported in place, not dropped
    for horizon, check in report.horizons.items():
        if not check.fitted:
            assert f"fit failed: {check.error}" in text
            assert check.assumption2_supported is None


def test_coefficient_interval_rejects_unknown_names(checked):
    _, report = checked
    fit = report.horizon("full").fit
    with pytest.raises(DataError, match="unknown model part"):
        coefficient_interval(fit, "dispersion", "intercept")
    with pytest.raises(DataError, match="no coefficient named"):
        coefficient_interval(fit, "zero", "region_Oulu")


def test_contains_zero_logic():
    assert CoefficientInterval(0.1, -0.05, 0.25).contains_zero()
    assert CoefficientInterval(0.0, 0.0, 0.0).contains_zero()
    assert not CoefficientInterval(0.3, 0.1, 0.5).contains_zero()
    assert not CoefficientInterval(-0.3, -0.5, -0.1).contains_zero()


def test_per_1000_constant_counts():
    config = synth.scale_config(synth.make_five_year_config(), 0.05)
    table = synth.generate_cohort(config, seed=2)
    n = len(table)
    assert n == 500
    table.columns["hosp_5y"] = np.full(n, 2.0)
    res = predicted_per_1000(table, "5y")
    assert res.value == 2000.0
    assert res.ci_low == 2000.0 and res.ci_high == 2000.0
    assert res.n_rows == n
    table.columns["hosp_5y"] = np.zeros(n)
    res = predicted_per_1000(table, "5y")
    assert res.value == 0.0 and res.ci_high == 0.0


def test_per_1000_group_weighted_average_identity(checked):
    table, _ = checked
    whole = predicted_per_1000(table, "5y")
    parts = [predicted_per_1000(table, "5y", group=g)
             for g in ("Participant", "RecontactRespondent", "NonParticipant")]
    total = sum(p.n_rows for p in parts)
    assert total == whole.n_rows
    weighted = sum(p.value * p.n_rows for p in parts) / total
    assert abs(weighted - whole.value) < 1e-9


def test_per_1000_masks_and_errors(checked):
    table, _ = checked
    men = predicted_per_1000(table, "5y", group="Participant", subgroup="men")
    women = predicted_per_1000(table, "5y", group="Participant", subgroup="women")
    both = predicted_per_1000(table, "5y", group="Participant")
    assert men.n_rows + women.n_rows == both.n_rows
    assert men.source == "observed:Participant:men"
    with pytest.raises(DataError, match="unknown group"):
        predicted_per_1000(table, "5y", group="Examined")
    with pytest.raises(DataError, match="unknown subgroup"):
        predicted_per_1000(table, "5y", subgroup="all")


def test_per_1000_empty_stratum_is_unavailable():
    data = synth.scale_config(synth.make_five_year_config(), 0.05).to_dict()
    data["participation_model"]["intercept"] = 50.0
    table = synth.generate_cohort(synth.SynthConfig.from_dict(data), seed=0)
    res = predicted_per_1000(table, "5y", group="RecontactRespondent")
    assert res.available is False
    assert np.isnan(res.value)


def test_per_1000_method_pools_across_imputations():
    config = synth.scale_config(synth.make_five_year_config(), 0.05)
    table = synth.generate_cohort(config, seed=3)
    spec = mi.ImputationModelSpec(m=2, cycles=2, ridge=0.05)
    imp = mi.fcs_impute(table, spec=spec, strategy="MiMar", seed=0)
    res = predicted_per_1000(imp, "5y", subgroup="men")
    assert res.source == "method:MiMar:men"
    assert res.available
    assert res.n_rows == int((table.columns["sex"] == 0).sum())
    assert res.ci_low < res.value < res.ci_high
    with pytest.raises(DataError, match="unknown strategy"):
        predicted_per_1000(SimpleNamespace(strategy="Bogus", tables=[]), "5y")


@pytest.mark.slow
def test_permuted_group_labels_leave_assumptions_open():
    """With group labels shuffled, both indicators are null effects, so
    the 95% intervals should cover zero in nearly every replication.

    The re-contact group is only ~6% of rows; its Wald interval needs
    the full 10000-invitee scale to reach nominal coverage.
    """
    config = synth.make_five_year_config()
    rng = np.random.default_rng(11)
    both_cover = 0
    a2_supported = 0
    a3_supported = 0
    for rep in range(100):
        table = synth.generate_cohort(config, seed=500 + rep)
        cols = dict(table.columns)
        cols["group"] = rng.permutation(table.columns["group"])
        check = assumptions.check_horizon(SimpleNamespace(columns=cols), "full")
        assert check.fitted, check.error
        if check.assumption2_supported and check.assumption3_supported:
            both_cover += 1
        a2_supported += check.assumption2_supported
        a3_supported += check.assumption3_supported
    assert both_cover >= 90
    assert a2_supported >= 92
    assert a3_supported >= 92


@pytest.mark.slow
def test_forced_recontact_effect_is_detected():
    data = synth.make_five_year_config(n_invitees=100000).to_dict()
    data["hosp_model"]["count"]["recontact"] = 0.5
    table = synth.generate_cohort(synth.SynthConfig.from_dict(data), seed=5)
    check = assumptions.check_horizon(table, "full")
    assert check.fitted, check.error
    assert check.assumption3_supported is False
    assert check.count_recontact.estimate == pytest.approx(0.5, abs=0.15)
    assert check.count_recontact.ci_low > 0.0


@pytest.mark.slow
def test_longest_horizon_separates_recontact_respondents():
    """The generator's full-history coefficients give re-contact
    respondents a real rate deficit, visible at the 10000-invitee
    scale."""
    table = synth.generate_cohort(synth.make_full_history_config(), seed=6)
    check = assumptions.check_horizon(table, "full")
    assert check.fitted, check.error
    assert check.assumption3_supported is False
    assert check.count_recontact.estimate == pytest.approx(-0.10, abs=0.15)
