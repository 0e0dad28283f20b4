"""Synthetic cohort generation calibrated to published survey margins.

The generator draws a stratified invitee frame, true questionnaire
outcomes for every invitee, then participation and re-contact response
conditional on background and the true outcomes.  Because selection
operates on the outcomes themselves, the questionnaire data are
missing not at random; the re-contact response model deliberately
excludes the outcomes, so re-contact respondents represent
non-participants given background by construction.

Hospitalization counts come from a zero-inflated negative binomial
model with group indicators.  Shorter horizons are binomial thinnings
of the full history, which keeps the per-row nesting that a hospital
register guarantees; the thinned horizons are again negative binomial
with the same dispersion, so the shape is exact at every horizon.

All calibration (model intercepts hitting published prevalence and
participation targets) happens at config-construction time by exact
enumeration over the covariate lattice, never by simulation.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import fsolve
from scipy.special import expit

from .cohort import (
    AGE_BANDS, AGE_MIN, CIVIL_LEVELS, EDUCATION_LEVELS, GROUPS,
    HEAVY_PORTIONS_FEMALE, HEAVY_PORTIONS_MALE, REGIONS, SEXES,
    CohortTable, Provenance, config_hash,
)
from .errors import ConfigError, TruthUnavailableError

SCHEMA_VERSION = 1

# exact key sets per model block; from_dict rejects anything else
SELECTION_KEYS = ("intercept", "age_dec", "female", "education_Mid",
                  "education_High", "married", "daily_smoker", "heavy_alcohol")
SMOKING_KEYS = ("intercept", "age_dec", "female", "education_Mid", "education_High")
ALCOHOL_KEYS = ("intercept", "age_dec", "female", "daily_smoker")
RISK_KEYS = ("intercept", "age_dec", "female")
RISK_FIELDS = ("hypertension", "high_chol", "bp_recent", "chol_recent")
PORTIONS_KEYS = ("zero_share", "light_shape", "heavy_scale")

HOSP_COUNT_KEYS = (
    "intercept", "age_men_dec", "age_women_dec", "female",
    "region_NorthernSavonia", "region_TurkuLoimaa",
    "region_HelsinkiVantaa", "region_Oulu", "participant", "recontact",
)
HOSP_COUNT_OPTIONAL = ("daily_smoker", "heavy_alcohol")
HOSP_ZERO_KEYS = ("intercept", "age_men_dec", "age_women_dec", "female",
                  "participant", "recontact")

# published zero-inflated negative binomial estimates for the number of
# hospital visits (count part then zero part), by history length
HOSP_COUNT_FULL = {
    "intercept": 0.84, "age_men_dec": 0.18, "age_women_dec": 0.33,
    "female": -0.51, "region_NorthernSavonia": 0.00,
    "region_TurkuLoimaa": -0.16, "region_HelsinkiVantaa": -0.30,
    "region_Oulu": 0.03, "participant": -0.25, "recontact": -0.10,
}
HOSP_ZERO_FULL = {
    "intercept": 22.19, "age_men_dec": -9.23, "age_women_dec": -1.46,
    "female": -19.44, "participant": -0.56, "recontact": -0.59,
}
HOSP_COUNT_5Y = {
    "intercept": -0.88, "age_men_dec": 0.26, "age_women_dec": 0.22,
    "female": 0.32, "region_NorthernSavonia": -0.03,
    "region_TurkuLoimaa": -0.26, "region_HelsinkiVantaa": -0.45,
    "region_Oulu": -0.09, "participant": -0.60, "recontact": 0.02,
}
HOSP_ZERO_5Y = {
    "intercept": 1.40, "age_men_dec": -0.56, "age_women_dec": -0.44,
    "female": -0.46, "participant": -1.59, "recontact": 0.05,
}

# per-1000 observed full-cohort counts by horizon and sex; the ratios
# set the thinning probabilities so every horizon's mean matches
PER_1000_FULL = {"Male": 4305.0, "Female": 5445.0}
PER_1000_5Y = {"Male": 773.0, "Female": 852.0}
PER_1000_1Y = {"Male": 182.0, "Female": 180.0}

# calibration targets: prevalences among participants, thousand-scale
# hospitalization rows, participation structure of the 10000 invitees
TARGET_SMOKING_PART = {"Male": 0.232, "Female": 0.165}
TARGET_HEAVY_PART = {"Male": 0.068, "Female": 0.030}
TARGET_PARTICIPATION = 0.5827
TARGET_RECONTACT_GIVEN_NONEXAM = 597.0 / 4173.0

DEFAULT_GAPS = {"daily_smoker": 4.25, "heavy_alcohol": 1.0}

_EDUCATION_BY_BAND = {
    "25-34": [0.17, 0.36, 0.47], "35-44": [0.21, 0.35, 0.44],
    "45-54": [0.27, 0.33, 0.40], "55-64": [0.40, 0.28, 0.32],
    "65-74": [0.52, 0.26, 0.22],
}
_CIVIL_BY_BAND = {
    "25-34": [0.36, 0.27, 0.33, 0.03, 0.01],
    "35-44": [0.52, 0.22, 0.17, 0.08, 0.01],
    "45-54": [0.57, 0.17, 0.12, 0.12, 0.02],
    "55-64": [0.58, 0.14, 0.09, 0.15, 0.04],
    "65-74": [0.57, 0.12, 0.08, 0.15, 0.08],
}
_RISK_MODELS = {
    "hypertension": {"intercept": -3.2, "age_dec": 0.45, "female": 0.10},
    "high_chol": {"intercept": -2.8, "age_dec": 0.42, "female": 0.0},
    "bp_recent": {"intercept": 0.2, "age_dec": 0.18, "female": 0.0},
    "chol_recent": {"intercept": -0.5, "age_dec": 0.22, "female": 0.0},
}


@dataclass
class SynthConfig:
    n_invitees: int
    strata_targets: list  # [{"region","sex","age_band","count"}] covering all 50 cells
    education_by_band: dict
    civil_by_band: dict
    risk_models: dict
    smoking_model: dict
    alcohol_model: dict
    portions_model: dict
    participation_model: dict
    recontact_model: dict
    item_missing_rate: float
    hosp_model: dict
    seed: int
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
        if self.n_invitees <= 0:
            raise ConfigError("n_invitees must be positive")
        seen = set()
        total = 0
        for row in self.strata_targets:
            key = (row["region"], row["sex"], row["age_band"])
            if row["region"] not in REGIONS or row["sex"] not in SEXES \
                    or row["age_band"] not in AGE_BANDS:
                raise ConfigError(f"strata_targets: unknown stratum {key}")
            if key in seen:
                raise ConfigError(f"strata_targets: duplicate stratum {key}")
            if row["count"] < 0:
                raise ConfigError(f"strata_targets: negative count in {key}")
            seen.add(key)
            total += row["count"]
        if len(seen) != len(REGIONS) * len(SEXES) * len(AGE_BANDS):
            raise ConfigError("strata_targets must cover every (region, sex, band) cell")
        if total != self.n_invitees:
            raise ConfigError(
                f"strata_targets sum to {total}, n_invitees is {self.n_invitees}"
            )
        for band in AGE_BANDS:
            for name, table, k in (("education_by_band", self.education_by_band, 3),
                                   ("civil_by_band", self.civil_by_band, 5)):
                probs = table.get(band)
                if probs is None or len(probs) != k:
                    raise ConfigError(f"{name}: band {band} needs {k} probabilities")
                if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
                    raise ConfigError(f"{name}: band {band} probabilities must sum to 1")
        _require_keys("smoking_model", self.smoking_model, SMOKING_KEYS)
        _require_keys("alcohol_model", self.alcohol_model, ALCOHOL_KEYS)
        _require_keys("participation_model", self.participation_model, SELECTION_KEYS)
        _require_keys("recontact_model", self.recontact_model, SELECTION_KEYS)
        _require_keys("portions_model", self.portions_model, PORTIONS_KEYS)
        if set(self.risk_models) != set(RISK_FIELDS):
            raise ConfigError(f"risk_models must define exactly {RISK_FIELDS}")
        for name, model in self.risk_models.items():
            _require_keys(f"risk_models.{name}", model, RISK_KEYS)
        if not 0.0 <= self.item_missing_rate < 1.0:
            raise ConfigError("item_missing_rate must lie in [0, 1)")
        hm = self.hosp_model
        _require_keys("hosp_model", hm, ("count", "zero", "theta", "thinning"))
        extra = set(hm["count"]) - set(HOSP_COUNT_KEYS) - set(HOSP_COUNT_OPTIONAL)
        if extra:
            raise ConfigError(f"hosp_model.count: unknown terms {sorted(extra)}")
        missing = set(HOSP_COUNT_KEYS) - set(hm["count"])
        if missing:
            raise ConfigError(f"hosp_model.count: missing terms {sorted(missing)}")
        _require_keys("hosp_model.zero", hm["zero"], HOSP_ZERO_KEYS)
        if hm["theta"] <= 0:
            raise ConfigError("hosp_model.theta must be positive")
        _require_keys("hosp_model.thinning", hm["thinning"], ("five_year", "one_year"))
        for sex in SEXES:
            p5 = hm["thinning"]["five_year"].get(sex)
            p1 = hm["thinning"]["one_year"].get(sex)
            if p5 is None or p1 is None:
                raise ConfigError(f"hosp_model.thinning: missing sex {sex}")
            if not 0.0 < p1 <= p5 <= 1.0:
                raise ConfigError(
                    f"hosp_model.thinning ({sex}): need 0 < one_year <= five_year <= 1"
                )

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "n_invitees": self.n_invitees,
            "seed": self.seed,
            "strata_targets": [dict(r) for r in self.strata_targets],
            "education_by_band": {k: list(v) for k, v in self.education_by_band.items()},
            "civil_by_band": {k: list(v) for k, v in self.civil_by_band.items()},
            "risk_models": {k: dict(v) for k, v in self.risk_models.items()},
            "smoking_model": dict(self.smoking_model),
            "alcohol_model": dict(self.alcohol_model),
            "portions_model": dict(self.portions_model),
            "participation_model": dict(self.participation_model),
            "recontact_model": dict(self.recontact_model),
            "item_missing_rate": self.item_missing_rate,
            "hosp_model": {
                "count": dict(self.hosp_model["count"]),
                "zero": dict(self.hosp_model["zero"]),
                "theta": self.hosp_model["theta"],
                "thinning": {k: dict(v) for k, v in self.hosp_model["thinning"].items()},
            },
        }

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        fields = {
            "schema_version", "n_invitees", "seed", "strata_targets",
            "education_by_band", "civil_by_band", "risk_models",
            "smoking_model", "alcohol_model", "portions_model",
            "participation_model", "recontact_model", "item_missing_rate",
            "hosp_model",
        }
        unknown = set(data) - fields
        if unknown:
            raise ConfigError(f"unknown config field {sorted(unknown)[0]!r}")
        missing = fields - set(data)
        if missing:
            raise ConfigError(f"missing config field {sorted(missing)[0]!r}")
        kwargs = {k: data[k] for k in fields}
        return cls(**kwargs)

    def hash(self):
        return config_hash(self.to_dict())


def _require_keys(name, mapping, keys):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{name} must be an object")
    extra = set(mapping) - set(keys)
    if extra:
        raise ConfigError(f"{name}: unknown key {sorted(extra)[0]!r}")
    missing = set(keys) - set(mapping)
    if missing:
        raise ConfigError(f"{name}: missing key {sorted(missing)[0]!r}")


def save_config(config, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return SynthConfig.from_dict(data)


def equal_strata(n_invitees):
    """Equal allocation over the 50 (region, sex, band) cells."""
    cells = [(r, s, b) for r in REGIONS for s in SEXES for b in AGE_BANDS]
    base, rem = divmod(n_invitees, len(cells))
    rows = []
    for i, (r, s, b) in enumerate(cells):
        rows.append({"region": r, "sex": s, "age_band": b,
                     "count": base + (1 if i < rem else 0)})
    return rows


def scale_config(config, factor):
    """Shrink or grow the invitee frame, preserving strata proportions.

    Largest-remainder rounding keeps the per-cell counts summing to the
    scaled total exactly.
    """
    if factor <= 0:
        raise ConfigError("scale factor must be positive")
    raw = np.array([r["count"] for r in config.strata_targets], dtype=float) * factor
    floors = np.floor(raw).astype(int)
    target = int(round(config.n_invitees * factor))
    short = target - int(floors.sum())
    if short < 0:
        raise ConfigError("scale factor produces an empty frame")
    order = np.argsort(-(raw - floors), kind="stable")
    floors[order[:short]] += 1
    data = config.to_dict()
    data["strata_targets"] = [
        dict(r, count=int(c)) for r, c in zip(data["strata_targets"], floors)
    ]
    data["n_invitees"] = int(floors.sum())
    return SynthConfig.from_dict(data)


# ---------------------------------------------------------------------------
# exact enumeration over the covariate lattice

class _Lattice:
    """Joint distribution of (age, sex, education, civil, smoker, heavy)
    under a config, with participation and group probabilities.

    Region never interacts with the rest given (band, sex), so it is
    folded in as a multiplicative factor only where the hospitalization
    region terms need it.
    """

    def __init__(self, config):
        ages = np.arange(AGE_MIN, AGE_MIN + 50)
        grids = np.meshgrid(ages, np.arange(2), np.arange(3), np.arange(5),
                            np.arange(2), np.arange(2), indexing="ij")
        self.age = grids[0].ravel().astype(float)
        self.sex = grids[1].ravel()
        self.edu = grids[2].ravel()
        self.civil = grids[3].ravel()
        self.smoke = grids[4].ravel().astype(float)
        self.heavy = grids[5].ravel().astype(float)
        self._shape = grids[0].shape
        self.age_dec = self.age / 10.0
        self.female = (self.sex == 1).astype(float)
        self.band = ((self.age - AGE_MIN) // 10).astype(int)

        counts = np.zeros((len(REGIONS), 2, 5))
        for row in config.strata_targets:
            counts[REGIONS.index(row["region"]), SEXES.index(row["sex"]),
                   AGE_BANDS.index(row["age_band"])] = row["count"]
        p_band_sex = counts.sum(axis=0) / config.n_invitees  # (sex, band)
        self.p_region_given = counts / np.maximum(counts.sum(axis=0, keepdims=True), 1e-300)

        p_edu = np.array([config.education_by_band[b] for b in AGE_BANDS])  # (band, 3)
        p_civ = np.array([config.civil_by_band[b] for b in AGE_BANDS])  # (band, 5)
        p_smoke = expit(self._eta(config.smoking_model))
        p_heavy = expit(self._eta(config.alcohol_model))

        w = (p_band_sex[self.sex, self.band] / 10.0
             * p_edu[self.band, self.edu]
             * p_civ[self.band, self.civil]
             * np.where(self.smoke == 1, p_smoke, 1.0 - p_smoke)
             * np.where(self.heavy == 1, p_heavy, 1.0 - p_heavy))
        self.weight = w

        p_part = expit(self._eta(config.participation_model))
        p_rec = expit(self._eta(config.recontact_model))
        self.p_group = np.stack([
            p_part,
            (1.0 - p_part) * p_rec,
            (1.0 - p_part) * (1.0 - p_rec),
        ])  # (group, cell)
        self.config = config

    def _eta(self, model):
        features = {
            "intercept": 1.0, "age_dec": self.age_dec, "female": self.female,
            "education_Mid": (self.edu == 1).astype(float),
            "education_High": (self.edu == 2).astype(float),
            "married": (self.civil == 0).astype(float),
            "daily_smoker": self.smoke, "heavy_alcohol": self.heavy,
        }
        eta = np.zeros_like(self.age_dec)
        for name, coef in model.items():
            if coef != 0.0:
                eta = eta + coef * features[name]
        return eta

    def prevalence(self, indicator, sex=None, group=None):
        value = {"daily_smoker": self.smoke, "heavy_alcohol": self.heavy}[indicator]
        w = self.weight.copy()
        if sex is not None:
            w = w * (self.sex == SEXES.index(sex))
        if group is None:
            return float(np.sum(w * value) / np.sum(w))
        pg = self.p_group[GROUPS.index(group)]
        return float(np.sum(w * pg * value) / np.sum(w * pg))

    def conditional_gap(self, indicator):
        """Background-standardized prevalence difference, non-participant
        minus participant.

        Averages the per-cell conditional prevalence difference over the
        population background distribution, so composition differences
        between the groups do not count toward the gap; what remains is
        the departure of the outcome model itself.
        """
        axis = {"daily_smoker": 4, "heavy_alcohol": 5}[indicator]
        other = 9 - axis
        w = self.weight.reshape(self._shape)
        p_bg = w.sum(axis=(4, 5))
        p_bg = p_bg / p_bg.sum()
        conditionals = []
        for g in ("NonParticipant", "Participant"):
            joint = (self.weight * self.p_group[GROUPS.index(g)]).reshape(self._shape)
            marg = joint.sum(axis=other)
            den = marg.sum(axis=-1)
            conditionals.append(
                np.where(den > 0, marg[..., 1] / np.where(den > 0, den, 1.0), 0.0))
        return float(np.sum(p_bg * (conditionals[0] - conditionals[1])))

    def group_share(self, group):
        pg = self.p_group[GROUPS.index(group)]
        return float(np.sum(self.weight * pg) / np.sum(self.weight))

    def recontact_given_nonexam(self):
        p_part = self.p_group[0]
        nonexam = self.weight * (1.0 - p_part)
        rec = self.weight * self.p_group[1]
        return float(np.sum(rec) / np.sum(nonexam))

    def _region_factor(self, count_model):
        beta = np.zeros(len(REGIONS))
        for k, r in enumerate(REGIONS[1:], start=1):
            beta[k] = count_model.get(f"region_{r}", 0.0)
        # (sex, band) expectation of exp(region effect)
        factor = np.einsum("rsb,r->sb", self.p_region_given, np.exp(beta))
        return factor[self.sex, self.band]

    def expected_count(self, count_model, zero_model, horizon_scale, sex=None, group=None):
        """Mean hospitalizations per person at a horizon.

        ``horizon_scale`` multiplies the count mean (thinning); the zero
        part is horizon-invariant because excess membership is drawn
        once per row.
        """
        age_m = self.age_dec * (1.0 - self.female)
        age_w = self.age_dec * self.female
        features = {
            "intercept": 1.0, "age_men_dec": age_m, "age_women_dec": age_w,
            "female": self.female, "daily_smoker": self.smoke,
            "heavy_alcohol": self.heavy,
        }
        out_w = 0.0
        out_y = 0.0
        scale = (horizon_scale if np.isscalar(horizon_scale)
                 else np.asarray([horizon_scale[s] for s in SEXES])[self.sex])
        region = self._region_factor(count_model)
        groups = GROUPS if group is None else (group,)
        for g in groups:
            gi = GROUPS.index(g)
            ind = {"participant": 1.0 if gi == 0 else 0.0,
                   "recontact": 1.0 if gi == 1 else 0.0}
            eta_c = np.zeros_like(self.age_dec)
            for name, coef in count_model.items():
                if name.startswith("region_") or coef == 0.0:
                    continue
                eta_c = eta_c + coef * (ind[name] if name in ind else features[name])
            eta_z = np.zeros_like(self.age_dec)
            for name, coef in zero_model.items():
                if coef == 0.0:
                    continue
                eta_z = eta_z + coef * (ind[name] if name in ind else features[name])
            mu = np.exp(eta_c) * region * scale
            pi = expit(eta_z)
            w = self.weight * self.p_group[gi]
            if sex is not None:
                w = w * (self.sex == SEXES.index(sex))
            out_w += np.sum(w)
            out_y += np.sum(w * (1.0 - pi) * mu)
        return float(out_y / out_w)


def expected_prevalence(config, indicator, sex=None, group=None):
    """Exact population prevalence implied by a config (no simulation)."""
    return _Lattice(config).prevalence(indicator, sex=sex, group=group)


def expected_per_1000(config, horizon, sex=None, group=None):
    """Exact per-1000 hospitalization mean implied by a config."""
    lat = _Lattice(config)
    hm = config.hosp_model
    if horizon == "full":
        scale = 1.0
    elif horizon == "5y":
        scale = hm["thinning"]["five_year"]
    elif horizon == "1y":
        scale = hm["thinning"]["one_year"]
    else:
        raise ConfigError(f"unknown horizon {horizon!r}")
    return 1000.0 * lat.expected_count(hm["count"], hm["zero"], scale,
                                       sex=sex, group=group)


# ---------------------------------------------------------------------------
# config construction and calibration

def _base_config_dict(n_invitees, seed):
    return {
        "schema_version": SCHEMA_VERSION,
        "n_invitees": n_invitees,
        "seed": seed,
        "strata_targets": equal_strata(n_invitees),
        "education_by_band": {k: list(v) for k, v in _EDUCATION_BY_BAND.items()},
        "civil_by_band": {k: list(v) for k, v in _CIVIL_BY_BAND.items()},
        "risk_models": {k: dict(v) for k, v in _RISK_MODELS.items()},
        "smoking_model": {"intercept": -1.0, "age_dec": -0.15, "female": -0.45,
                          "education_Mid": -0.30, "education_High": -0.70},
        "alcohol_model": {"intercept": -3.3, "age_dec": -0.05, "female": -0.85,
                          "daily_smoker": 1.37},
        "portions_model": {"zero_share": 0.17, "light_shape": 1.4, "heavy_scale": 0.6},
        "participation_model": {"intercept": -1.1, "age_dec": 0.22, "female": 0.26,
                                "education_Mid": 0.18, "education_High": 0.34,
                                "married": 0.15, "daily_smoker": 0.0,
                                "heavy_alcohol": 0.0},
        "recontact_model": {"intercept": -2.9, "age_dec": 0.20, "female": 0.25,
                            "education_Mid": 0.0, "education_High": 0.0,
                            "married": 0.0, "daily_smoker": 0.0, "heavy_alcohol": 0.0},
        "item_missing_rate": 0.02,
        "hosp_model": _five_year_hosp_block(),
    }


def _thinning_block():
    return {
        "five_year": {s: PER_1000_5Y[s] / PER_1000_FULL[s] for s in SEXES},
        "one_year": {s: PER_1000_1Y[s] / PER_1000_FULL[s] for s in SEXES},
    }


def _five_year_hosp_block():
    """Full-history model whose five-year thinning is the published
    five-year fit exactly.

    Thinning a negative binomial mean by p divides the mean by nothing
    but exp(log p), so lifting the intercept (and the female term, for
    the sex-specific probabilities) by -log p makes the five-year
    marginal coincide with the published coefficients; the zero part is
    unaffected by thinning.
    """
    thin = _thinning_block()
    count = dict(HOSP_COUNT_5Y)
    count["intercept"] -= float(np.log(thin["five_year"]["Male"]))
    count["female"] += float(np.log(thin["five_year"]["Male"]
                                    / thin["five_year"]["Female"]))
    return {"count": count, "zero": dict(HOSP_ZERO_5Y), "theta": 1.0,
            "thinning": thin}


def _full_history_hosp_block():
    return {"count": dict(HOSP_COUNT_FULL), "zero": dict(HOSP_ZERO_FULL),
            "theta": 1.0, "thinning": _thinning_block()}


def _calibrate_outcomes(data, gaps):
    """Solve intercepts and selection coefficients against the targets.

    Unknowns: smoking intercept and female term, heavy intercept and
    female term, participation and re-contact intercepts, plus one
    selection coefficient per outcome when its conditional-gap target
    is nonzero.  Solved exactly on the enumeration lattice.

    With every gap at zero the response models are flattened to bare
    intercepts, so missingness depends on nothing at all and the three
    groups are plain random subsamples.
    """
    gap_s = gaps.get("daily_smoker", 0.0) / 100.0
    gap_h = gaps.get("heavy_alcohol", 0.0) / 100.0
    mnar = bool(gap_s or gap_h)

    def unpack(x):
        d = dict(data)
        d["smoking_model"] = dict(data["smoking_model"],
                                  intercept=x[0], female=x[1])
        d["alcohol_model"] = dict(data["alcohol_model"],
                                  intercept=x[2], female=x[3])
        part = dict(data["participation_model"], intercept=x[4],
                    daily_smoker=x[6] if gap_s else 0.0,
                    heavy_alcohol=x[7] if gap_h else 0.0)
        rec = dict(data["recontact_model"], intercept=x[5])
        if not mnar:
            part = {k: v if k == "intercept" else 0.0 for k, v in part.items()}
            rec = {k: v if k == "intercept" else 0.0 for k, v in rec.items()}
        d["participation_model"] = part
        d["recontact_model"] = rec
        return SynthConfig.from_dict(d)

    def residuals(x):
        lat = _Lattice(unpack(x))
        res = [
            lat.prevalence("daily_smoker", sex="Male", group="Participant")
            - TARGET_SMOKING_PART["Male"],
            lat.prevalence("daily_smoker", sex="Female", group="Participant")
            - TARGET_SMOKING_PART["Female"],
            lat.prevalence("heavy_alcohol", sex="Male", group="Participant")
            - TARGET_HEAVY_PART["Male"],
            lat.prevalence("heavy_alcohol", sex="Female", group="Participant")
            - TARGET_HEAVY_PART["Female"],
            lat.group_share("Participant") - TARGET_PARTICIPATION,
            lat.recontact_given_nonexam() - TARGET_RECONTACT_GIVEN_NONEXAM,
        ]
        if gap_s:
            res.append(lat.conditional_gap("daily_smoker") - gap_s)
        else:
            res.append(x[6])
        if gap_h:
            res.append(lat.conditional_gap("heavy_alcohol") - gap_h)
        else:
            res.append(x[7])
        return res

    x0 = np.array([data["smoking_model"]["intercept"],
                   data["smoking_model"]["female"],
                   data["alcohol_model"]["intercept"],
                   data["alcohol_model"]["female"],
                   data["participation_model"]["intercept"],
                   data["recontact_model"]["intercept"],
                   -0.3 if gap_s else 0.0,
                   -0.4 if gap_h else 0.0])
    solution, _, ok, msg = fsolve(residuals, x0, full_output=True, xtol=1e-12)
    if ok != 1 or np.max(np.abs(residuals(solution))) > 1e-8:
        raise ConfigError(f"outcome calibration failed to converge: {msg}")
    return unpack(solution)


def make_assumption3_config(effect_sizes=None, n_invitees=10000, seed=0):
    """Config in which re-contact respondents represent non-participants.

    Selection into the exam depends on the true outcomes (data MNAR),
    but the re-contact response among non-examined depends on background
    only, so the re-contact and non-participant questionnaire
    distributions agree given background by construction.

    ``effect_sizes`` maps outcome name to the target percentage-point
    departure of the non-participant outcome distribution from the
    participants', standardized to the population background mix (the
    marginal gap is larger, since selective participation also tilts
    the backgrounds).  0 removes the selection coefficients and
    flattens both response models, so the groups become simple random
    subsamples and every strategy is unbiased by construction.
    """
    gaps = dict(DEFAULT_GAPS)
    if effect_sizes is not None:
        if isinstance(effect_sizes, (int, float)):
            if effect_sizes == 0:
                gaps = {k: 0.0 for k in gaps}
            else:
                gaps = {"daily_smoker": float(effect_sizes),
                        "heavy_alcohol": float(effect_sizes) / 4.0}
        else:
            unknown = set(effect_sizes) - set(DEFAULT_GAPS)
            if unknown:
                raise ConfigError(f"effect_sizes: unknown outcome {sorted(unknown)[0]!r}")
            gaps.update({k: float(v) for k, v in effect_sizes.items()})
    return _calibrate_outcomes(_base_config_dict(n_invitees, seed), gaps)


def make_five_year_config(n_invitees=10000, seed=0):
    """Config whose five-year horizon reproduces the published
    five-year hospitalization fit exactly."""
    return make_assumption3_config(None, n_invitees, seed)


def make_full_history_config(n_invitees=10000, seed=0):
    """Variant generating full-history counts from the published
    full-history coefficients verbatim (recovery benchmarks)."""
    config = make_assumption3_config(None, n_invitees, seed)
    data = config.to_dict()
    data["hosp_model"] = _full_history_hosp_block()
    return SynthConfig.from_dict(data)


def make_rate_calibrated_config(n_invitees=30000, seed=0):
    """Variant calibrated to the published per-1000 hospitalization rates.

    Adds smoking and heavy-drinking terms to the count model (so
    imputed covariates genuinely move predictions), removes the direct
    re-contact rate difference (the representativeness assumption holds
    exactly), and solves the intercept, female and participant terms so
    the five-year full-cohort rates per sex and the participants-only
    rate match the published table.
    """
    config = make_assumption3_config(None, n_invitees, seed)
    data = config.to_dict()
    base = _five_year_hosp_block()
    base["count"]["recontact"] = 0.0
    base["zero"]["recontact"] = 0.0
    base["count"]["daily_smoker"] = 0.35
    base["count"]["heavy_alcohol"] = 0.25
    thin5 = base["thinning"]["five_year"]
    lat = _Lattice(config)

    def residuals(x):
        count = dict(base["count"])
        count["intercept"] += x[0]
        count["female"] += x[1]
        count["participant"] += x[2]
        return [
            1000.0 * lat.expected_count(count, base["zero"], thin5, sex="Male")
            - PER_1000_5Y["Male"],
            1000.0 * lat.expected_count(count, base["zero"], thin5, sex="Female")
            - PER_1000_5Y["Female"],
            1000.0 * lat.expected_count(count, base["zero"], thin5,
                                        group="Participant") - 723.0,
        ]

    solution, _, ok, msg = fsolve(residuals, np.zeros(3), full_output=True,
                                  xtol=1e-12)
    if ok != 1 or np.max(np.abs(residuals(solution))) > 1e-6:
        raise ConfigError(f"hospitalization calibration failed: {msg}")
    base["count"]["intercept"] += float(solution[0])
    base["count"]["female"] += float(solution[1])
    base["count"]["participant"] += float(solution[2])
    data["hosp_model"] = base
    return SynthConfig.from_dict(data)


# ---------------------------------------------------------------------------
# generation

def _eta_or_fail(model, features, what):
    eta = np.zeros_like(features["female"])
    for name, coef in model.items():
        if coef != 0.0:
            eta = eta + coef * features[name]
    if not np.all(np.isfinite(eta)):
        raise ConfigError(f"{what} linear predictor is not finite")
    return eta


def generate_cohort(config, seed=None):
    """Draw one cohort; returns the masked table with truth attached.

    Deterministic in (config, seed): a single generator stream drawn in
    fixed order, so equal seeds give byte-identical CSV output.
    """
    rng = np.random.default_rng(np.random.SeedSequence(
        config.seed if seed is None else seed))
    n = config.n_invitees

    region = np.empty(n, dtype=np.int64)
    sex = np.empty(n, dtype=np.int64)
    band = np.empty(n, dtype=np.int64)
    pos = 0
    for row in config.strata_targets:
        k = row["count"]
        region[pos:pos + k] = REGIONS.index(row["region"])
        sex[pos:pos + k] = SEXES.index(row["sex"])
        band[pos:pos + k] = AGE_BANDS.index(row["age_band"])
        pos += k
    age = AGE_MIN + 10 * band + rng.integers(0, 10, size=n)
    age_dec = age / 10.0
    female = (sex == 1).astype(float)

    p_edu = np.array([config.education_by_band[b] for b in AGE_BANDS])
    edu = _draw_categorical(rng, p_edu[band])
    p_civ = np.array([config.civil_by_band[b] for b in AGE_BANDS])
    civil = _draw_categorical(rng, p_civ[band])

    features = {
        "intercept": 1.0, "age_dec": age_dec, "female": female,
        "education_Mid": (edu == 1).astype(float),
        "education_High": (edu == 2).astype(float),
        "married": (civil == 0).astype(float),
    }
    risks = {}
    for name in RISK_FIELDS:
        eta = _eta_or_fail(config.risk_models[name], features, name)
        risks[name] = (rng.random(n) < expit(eta)).astype(float)

    smoke = (rng.random(n) < expit(
        _eta_or_fail(config.smoking_model, features, "smoking"))).astype(float)
    features["daily_smoker"] = smoke
    heavy = (rng.random(n) < expit(
        _eta_or_fail(config.alcohol_model, features, "alcohol"))).astype(float)
    features["heavy_alcohol"] = heavy

    pm = config.portions_model
    limit = np.where(sex == 1, HEAVY_PORTIONS_FEMALE, HEAVY_PORTIONS_MALE)
    zero_mask = rng.random(n) < pm["zero_share"]
    light = limit * rng.random(n) ** pm["light_shape"]
    heavy_extra = rng.exponential(pm["heavy_scale"], size=n) * limit
    portions = np.where(heavy == 1.0, limit + 0.1 + heavy_extra,
                        np.where(zero_mask, 0.0, light))
    portions = np.round(portions, 1)

    p_part = expit(_eta_or_fail(config.participation_model, features, "participation"))
    participant = rng.random(n) < p_part
    p_rec = expit(_eta_or_fail(config.recontact_model, features, "re-contact"))
    recontact = (~participant) & (rng.random(n) < p_rec)
    group = np.where(participant, 0, np.where(recontact, 1, 2)).astype(np.int64)

    hm = config.hosp_model
    hosp_features = {
        "intercept": 1.0,
        "age_men_dec": age_dec * (1.0 - female),
        "age_women_dec": age_dec * female,
        "female": female,
        "region_NorthernSavonia": (region == 1).astype(float),
        "region_TurkuLoimaa": (region == 2).astype(float),
        "region_HelsinkiVantaa": (region == 3).astype(float),
        "region_Oulu": (region == 4).astype(float),
        "participant": (group == 0).astype(float),
        "recontact": (group == 1).astype(float),
        "daily_smoker": smoke, "heavy_alcohol": heavy,
    }
    eta_count = _eta_or_fail(hm["count"], hosp_features, "hospitalization count")
    eta_zero = _eta_or_fail(hm["zero"], hosp_features, "hospitalization zero")
    mu = np.exp(np.minimum(eta_count, 30.0))
    theta = hm["theta"]
    excess = rng.random(n) < expit(eta_zero)
    counts = rng.negative_binomial(theta, theta / (theta + mu))
    hosp_full = np.where(excess, 0, counts).astype(np.int64)
    p5 = np.array([hm["thinning"]["five_year"][s] for s in SEXES])[sex]
    p1 = np.array([hm["thinning"]["one_year"][s] for s in SEXES])[sex]
    hosp_5y = rng.binomial(hosp_full, p5)
    hosp_1y = rng.binomial(hosp_5y, p1 / p5)

    truth = {
        "daily_smoker": smoke.copy(), "alcohol_portions": portions.copy(),
        "heavy_alcohol": heavy.copy(),
        "education": edu.astype(float), "civil_status": civil.astype(float),
        **{k: v.copy() for k, v in risks.items()},
    }

    observed = {
        "daily_smoker": smoke.copy(), "alcohol_portions": portions.copy(),
        "heavy_alcohol": heavy.copy(),
        "education": edu.astype(float), "civil_status": civil.astype(float),
        **{k: v.copy() for k, v in risks.items()},
    }
    nonpart = group == 2
    for arr in observed.values():
        arr[nonpart] = np.nan
    rate = config.item_missing_rate
    item_units = (["daily_smoker", "alcohol"]
                  + ["education", "civil_status"] + list(RISK_FIELDS))
    for unit in item_units:
        drop = (group == 0) & (rng.random(n) < rate)
        if unit == "alcohol":
            observed["alcohol_portions"][drop] = np.nan
            observed["heavy_alcohol"][drop] = np.nan
        else:
            observed[unit][drop] = np.nan

    columns = {
        "id": np.arange(1, n + 1, dtype=np.int64),
        "sex": sex, "age": age.astype(np.int64), "region": region, "group": group,
        "hosp_full": hosp_full, "hosp_5y": hosp_5y.astype(np.int64),
        "hosp_1y": hosp_1y.astype(np.int64),
        **observed,
    }
    prov = Provenance(kind="synthetic",
                      seed=int(config.seed if seed is None else seed),
                      config_hash=config.hash(), truth=truth)
    return CohortTable(columns, prov)


def _draw_categorical(rng, probs):
    """Row-wise categorical draw from an (n, k) probability matrix."""
    u = rng.random(probs.shape[0])
    cum = np.cumsum(probs, axis=1)
    return np.minimum((u[:, None] > cum).sum(axis=1), probs.shape[1] - 1).astype(np.int64)


def write_truth(table, path):
    """Parallel CSV with the unmasked questionnaire columns."""
    truth = table.provenance.truth
    if table.provenance.kind != "synthetic" or truth is None:
        raise TruthUnavailableError("cohort carries no generation truth")
    import csv as _csv
    ids = table.columns["id"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "daily_smoker", "alcohol_portions", "heavy_alcohol",
                         "education", "civil_status", "hypertension", "high_chol",
                         "bp_recent", "chol_recent"])
        for i in range(len(table)):
            writer.writerow([
                str(int(ids[i])),
                str(int(truth["daily_smoker"][i])),
                str(float(truth["alcohol_portions"][i])),
                str(int(truth["heavy_alcohol"][i])),
                EDUCATION_LEVELS[int(truth["education"][i])],
                CIVIL_LEVELS[int(truth["civil_status"][i])],
                str(int(truth["hypertension"][i])),
                str(int(truth["high_chol"][i])),
                str(int(truth["bp_recent"][i])),
                str(int(truth["chol_recent"][i])),
            ])


def truth_prevalence(table, indicator, subgroup="both"):
    """Exact prevalence over the retained, unmasked truth."""
    truth = getattr(table.provenance, "truth", None)
    if table.provenance.kind != "synthetic" or truth is None:
        raise TruthUnavailableError("cohort carries no generation truth")
    if indicator not in truth:
        raise TruthUnavailableError(f"no truth column {indicator!r}")
    if subgroup == "both":
        mask = np.ones(len(table), dtype=bool)
    elif subgroup == "men":
        mask = table.columns["sex"] == SEXES.index("Male")
    elif subgroup == "women":
        mask = table.columns["sex"] == SEXES.index("Female")
    else:
        raise TruthUnavailableError(f"unknown subgroup {subgroup!r}")
    if not np.any(mask):
        raise TruthUnavailableError(f"subgroup {subgroup!r} has no rows")
    return float(np.mean(truth[indicator][mask]))
