"""Generator tests: config validation, calibration, determinism, truth."""

import numpy as np
import pytest

from recontact_adjust import synth
from recontact_adjust.cohort import GROUPS, load_cohort, write_cohort
from recontact_adjust.errors import ConfigError, TruthUnavailableError
from recontact_adjust.glm import DesignMatrix, fit_logistic
from recontact_adjust.synth import (
    DEFAULT_GAPS,
    TARGET_HEAVY_PART,
    TARGET_PARTICIPATION,
    TARGET_RECONTACT_GIVEN_NONEXAM,
    TARGET_SMOKING_PART,
    SynthConfig,
    equal_strata,
    expected_prevalence,
    generate_cohort,
    load_config,
    make_assumption3_config,
    make_five_year_config,
    make_full_history_config,
    save_config,
    scale_config,
    truth_prevalence,
    write_truth,
)


@pytest.fixture(scope="module")
def five_year_config():
    return make_five_year_config()


@pytest.fixture(scope="module")
def small_cohort(five_year_config):
    cfg = scale_config(five_year_config, 0.2)
    return generate_cohort(cfg, seed=3)


def patched(config, **blocks):
    data = config.to_dict()
    data.update(blocks)
    return SynthConfig.from_dict(data)


# ---------------------------------------------------------------------------
# config validation


def test_config_round_trip(tmp_path, five_year_config):
    path = tmp_path / "config.json"
    save_config(five_year_config, path)
    back = load_config(path)
    assert back.to_dict() == five_year_config.to_dict()
    assert back.hash() == five_year_config.hash()


def test_load_config_rejects_bad_json(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(path)


def test_config_rejects_unknown_and_missing_fields(five_year_config):
    data = five_year_config.to_dict()
    data["extra"] = 1
    with pytest.raises(ConfigError, match="unknown config field 'extra'"):
        SynthConfig.from_dict(data)
    data = five_year_config.to_dict()
    del data["smoking_model"]
    with pytest.raises(ConfigError, match="missing config field 'smoking_model'"):
        SynthConfig.from_dict(data)


def test_config_rejects_strata_not_summing(five_year_config):
    data = five_year_config.to_dict()
    data["strata_targets"][0]["count"] += 1
    with pytest.raises(ConfigError, match="strata_targets sum"):
        SynthConfig.from_dict(data)


def test_config_rejects_incomplete_strata(five_year_config):
    data = five_year_config.to_dict()
    dropped = data["strata_targets"].pop()
    data["n_invitees"] -= dropped["count"]
    with pytest.raises(ConfigError, match="every \\(region, sex, band\\) cell"):
        SynthConfig.from_dict(data)


def test_config_rejects_bad_band_probabilities(five_year_config):
    data = five_year_config.to_dict()
    data["education_by_band"]["25-34"] = [0.5, 0.4, 0.2]
    with pytest.raises(ConfigError, match="education_by_band.*sum to 1"):
        SynthConfig.from_dict(data)


def test_config_rejects_unknown_model_key(five_year_config):
    data = five_year_config.to_dict()
    data["smoking_model"]["typo"] = 0.1
    with pytest.raises(ConfigError, match="smoking_model: unknown key 'typo'"):
        SynthConfig.from_dict(data)


def test_config_rejects_bad_hosp_block(five_year_config):
    data = five_year_config.to_dict()
    data["hosp_model"]["theta"] = 0.0
    with pytest.raises(ConfigError, match="theta must be positive"):
        SynthConfig.from_dict(data)
    data = five_year_config.to_dict()
    data["hosp_model"]["thinning"]["one_year"]["Male"] = 0.9
    with pytest.raises(ConfigError, match="one_year <= five_year"):
        SynthConfig.from_dict(data)


def test_config_rejects_bad_item_missing_rate(five_year_config):
    data = five_year_config.to_dict()
    data["item_missing_rate"] = 1.0
    with pytest.raises(ConfigError, match="item_missing_rate"):
        SynthConfig.from_dict(data)


def test_effect_sizes_rejects_unknown_outcome():
    with pytest.raises(ConfigError, match="unknown outcome 'coffee'"):
        make_assumption3_config({"coffee": 3.0})


def test_nonfinite_coefficient_names_the_predictor(five_year_config):
    bad = dict(five_year_config.participation_model)
    bad["intercept"] = float("inf")
    cfg = patched(five_year_config, participation_model=bad)
    with pytest.raises(ConfigError, match="participation linear predictor"):
        generate_cohort(cfg, seed=0)


# ---------------------------------------------------------------------------
# strata helpers


def test_equal_strata_covers_every_cell_exactly():
    rows = equal_strata(10007)
    assert len(rows) == 50
    assert sum(r["count"] for r in rows) == 10007
    assert max(r["count"] for r in rows) - min(r["count"] for r in rows) <= 1


def test_scale_config_preserves_proportions(five_year_config):
    small = scale_config(five_year_config, 0.1)
    assert small.n_invitees == 1000
    assert sum(r["count"] for r in small.strata_targets) == 1000
    for orig, scaled in zip(five_year_config.strata_targets, small.strata_targets):
        assert abs(scaled["count"] - 0.1 * orig["count"]) <= 1.0


def test_scale_config_rejects_nonpositive_factor(five_year_config):
    with pytest.raises(ConfigError, match="positive"):
        scale_config(five_year_config, 0.0)


# ---------------------------------------------------------------------------
# calibration targets (analytic, no simulation)


def test_participant_prevalences_hit_published_targets(five_year_config):
    for sex, target in TARGET_SMOKING_PART.items():
        got = expected_prevalence(five_year_config, "daily_smoker",
                                  sex=sex, group="Participant")
        assert got == pytest.approx(target, abs=1e-6)
    for sex, target in TARGET_HEAVY_PART.items():
        got = expected_prevalence(five_year_config, "heavy_alcohol",
                                  sex=sex, group="Participant")
        assert got == pytest.approx(target, abs=1e-6)


def test_group_structure_hits_published_shares(five_year_config):
    lat = synth._Lattice(five_year_config)
    assert lat.group_share("Participant") == pytest.approx(TARGET_PARTICIPATION, abs=1e-6)
    assert lat.recontact_given_nonexam() == pytest.approx(
        TARGET_RECONTACT_GIVEN_NONEXAM, abs=1e-6)


def test_default_gaps_give_recontact_heavier_smoking(five_year_config):
    # qualitative published pattern: re-contact respondents smoke more
    # than participants, per sex
    for sex in ("Male", "Female"):
        rec = expected_prevalence(five_year_config, "daily_smoker",
                                  sex=sex, group="RecontactRespondent")
        part = expected_prevalence(five_year_config, "daily_smoker",
                                   sex=sex, group="Participant")
        assert rec > part


def test_conditional_gap_is_calibrated_exactly():
    cfg = make_assumption3_config({"daily_smoker": 5.0})
    lat = synth._Lattice(cfg)
    assert 100.0 * lat.conditional_gap("daily_smoker") == pytest.approx(5.0, abs=1e-6)
    # composition differences push the marginal gap above the
    # conditional one
    marginal = (expected_prevalence(cfg, "daily_smoker", group="NonParticipant")
                - expected_prevalence(cfg, "daily_smoker", group="Participant"))
    assert 100.0 * marginal > 5.0


def test_null_effect_sizes_mean_mcar():
    cfg = make_assumption3_config(0)
    for model in (cfg.participation_model, cfg.recontact_model):
        for key, coef in model.items():
            if key != "intercept":
                assert coef == 0.0
    prevs = [expected_prevalence(cfg, "daily_smoker", group=g) for g in GROUPS]
    assert max(prevs) - min(prevs) < 1e-12


def test_full_history_config_uses_published_coefficients_verbatim():
    cfg = make_full_history_config()
    assert cfg.hosp_model["count"] == synth.HOSP_COUNT_FULL
    assert cfg.hosp_model["zero"] == synth.HOSP_ZERO_FULL


# ---------------------------------------------------------------------------
# generation


def test_group_counts_near_published_proportions(five_year_config):
    table = generate_cohort(five_year_config, seed=1)
    counts = table.group_counts()
    for group, expect in (("Participant", 5827), ("RecontactRespondent", 597),
                          ("NonParticipant", 3576)):
        assert abs(counts[group] - expect) <= 0.02 * len(table)


def test_degenerate_participation_yields_participants_only(five_year_config):
    part = {k: 0.0 for k in five_year_config.participation_model}
    part["intercept"] = 50.0
    cfg = patched(scale_config(five_year_config, 0.1), participation_model=part)
    table = generate_cohort(cfg, seed=0)
    counts = table.group_counts()
    assert counts["RecontactRespondent"] == 0
    assert counts["NonParticipant"] == 0


def test_horizons_nest_for_every_row(small_cohort):
    c = small_cohort.columns
    assert np.all(c["hosp_1y"] <= c["hosp_5y"])
    assert np.all(c["hosp_5y"] <= c["hosp_full"])


def test_generation_is_byte_deterministic(tmp_path, five_year_config):
    cfg = scale_config(five_year_config, 0.05)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_cohort(generate_cohort(cfg, seed=11), p1)
    write_cohort(generate_cohort(cfg, seed=11), p2)
    assert p1.read_bytes() == p2.read_bytes()
    p3 = tmp_path / "c.csv"
    write_cohort(generate_cohort(cfg, seed=12), p3)
    assert p1.read_bytes() != p3.read_bytes()


def test_masking_matches_groups(small_cohort):
    c = small_cohort.columns
    nonpart = small_cohort.group_mask("NonParticipant")
    assert np.all(np.isnan(c["daily_smoker"][nonpart]))
    rec = small_cohort.group_mask("RecontactRespondent")
    assert not np.any(np.isnan(c["daily_smoker"][rec]))
    # item missingness touches some participants but only a small share
    part = small_cohort.group_mask("Participant")
    miss = np.mean(np.isnan(c["education"][part]))
    assert 0.0 < miss < 0.1


def test_portions_back_the_heavy_flag(small_cohort):
    # generated portions always classify back to the generated flag
    c = small_cohort.columns
    have = ~np.isnan(c["alcohol_portions"])
    assert np.all(~np.isnan(c["heavy_alcohol"][have]))


# ---------------------------------------------------------------------------
# truth access


def test_truth_prevalence_all_smokers(five_year_config):
    smoking = dict(five_year_config.smoking_model)
    smoking["intercept"] = 50.0
    cfg = patched(scale_config(five_year_config, 0.05), smoking_model=smoking)
    table = generate_cohort(cfg, seed=0)
    assert truth_prevalence(table, "daily_smoker") == 1.0


def test_truth_prevalence_golden_value(five_year_config):
    # pinned from the generator itself at first generation; guards the
    # whole drawing order
    table = generate_cohort(five_year_config, seed=1)
    assert truth_prevalence(table, "daily_smoker", "men") == pytest.approx(
        0.2576, abs=1e-12)


def test_truth_prevalence_requires_synthetic_table(tmp_path, small_cohort):
    path = tmp_path / "cohort.csv"
    write_cohort(small_cohort, path)
    ingested = load_cohort(path)
    with pytest.raises(TruthUnavailableError):
        truth_prevalence(ingested, "daily_smoker")


def test_truth_prevalence_rejects_unknown_requests(small_cohort):
    with pytest.raises(TruthUnavailableError, match="no truth column"):
        truth_prevalence(small_cohort, "coffee")
    with pytest.raises(TruthUnavailableError, match="unknown subgroup"):
        truth_prevalence(small_cohort, "daily_smoker", "children")


def test_empty_subgroup_is_an_error(five_year_config):
    rows = [dict(r) for r in five_year_config.to_dict()["strata_targets"]]
    moved = 0
    for r in rows:
        if r["sex"] == "Male":
            moved += r["count"]
            r["count"] = 0
    for r in rows:
        if r["sex"] == "Female" and moved:
            r["count"] += moved
            moved = 0
    cfg = patched(five_year_config, strata_targets=rows)
    table = generate_cohort(scale_config(cfg, 0.1), seed=0)
    with pytest.raises(TruthUnavailableError, match="no rows"):
        truth_prevalence(table, "daily_smoker", "men")


def test_write_truth_round_trips_header(tmp_path, small_cohort):
    path = tmp_path / "truth.csv"
    write_truth(small_cohort, path)
    header = path.read_text().splitlines()[0]
    assert header.startswith("id,daily_smoker,alcohol_portions")
    assert len(path.read_text().splitlines()) == len(small_cohort) + 1


def test_write_truth_requires_synthetic(tmp_path, small_cohort):
    cohort_path = tmp_path / "cohort.csv"
    write_cohort(small_cohort, cohort_path)
    with pytest.raises(TruthUnavailableError):
        write_truth(load_cohort(cohort_path), tmp_path / "truth.csv")


# ---------------------------------------------------------------------------
# mechanism properties (simulation, fixed seeds)


def test_mcar_null_equalizes_groups_empirically():
    cfg = make_assumption3_config(0, n_invitees=100000)
    table = generate_cohort(cfg, seed=5)
    truth = table.provenance.truth["daily_smoker"]
    grp = table.columns["group"]
    p_part = float(np.mean(truth[grp == 0]))
    p_non = float(np.mean(truth[grp == 2]))
    assert abs(p_part - p_non) < 0.012  # ~4 sigma at this n


def test_selection_raises_nonparticipant_prevalence():
    cfg = make_assumption3_config({"daily_smoker": 5.0}, n_invitees=20000)
    table = generate_cohort(cfg, seed=2)
    truth = table.provenance.truth["daily_smoker"]
    grp = table.columns["group"]
    assert (float(np.mean(truth[grp == 2]))
            > float(np.mean(truth[grp == 0])) + 0.03)


def test_recontact_represents_nonparticipants_given_background():
    """Group indicator adds nothing once background is in the model."""
    cfg = make_five_year_config(n_invitees=100000)
    table = generate_cohort(cfg, seed=9)
    c = table.columns
    keep = c["group"] != GROUPS.index("Participant")
    rec = (c["group"][keep] == GROUPS.index("RecontactRespondent")).astype(float)
    age_dec = c["age"][keep] / 10.0
    female = (c["sex"][keep] == 1).astype(float)
    regions = [(c["region"][keep] == k).astype(float) for k in range(1, 5)]
    X = DesignMatrix(
        np.column_stack([np.ones(rec.size), age_dec, female, *regions, rec]),
        ["intercept", "age_dec", "female", "r1", "r2", "r3", "r4", "recontact"],
    )
    y = table.provenance.truth["daily_smoker"][keep]
    fit = fit_logistic(X, y)
    coef = fit.coefficients[-1]
    se = float(np.sqrt(fit.covariance[-1, -1]))
    assert abs(coef) < 3.0 * se
