"""Cohort schema, group classification and CSV round-tripping.

A cohort holds one row per survey invitee: background variables that
are known for everyone (sex, age, region), the participation group,
questionnaire outcomes that may be missing, and register-linked
hospitalization counts at three nested horizons.

Storage is columnar (one NumPy array per column) because the imputation
engine sweeps columns millions of times; ``row()`` materializes the
record view when object access is more convenient.  Missing values in
questionnaire columns are NaN in memory and empty cells on disk, never
sentinel numbers.
"""

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CohortSchemaError, CohortValueError, DataError

SEXES = ("Male", "Female")
REGIONS = ("NorthKarelia", "NorthernSavonia", "TurkuLoimaa", "HelsinkiVantaa", "Oulu")
GROUPS = ("Participant", "RecontactRespondent", "NonParticipant")
EDUCATION_LEVELS = ("Low", "Mid", "High")
CIVIL_LEVELS = ("Married", "Cohabiting", "Single", "Divorced", "Widow")
AGE_MIN, AGE_MAX = 25, 74
AGE_BANDS = ("25-34", "35-44", "45-54", "55-64", "65-74")

# heavy drinking thresholds, portions per week (1 portion = 12 g alcohol)
HEAVY_PORTIONS_MALE = 24.0
HEAVY_PORTIONS_FEMALE = 16.0

CSV_COLUMNS = (
    "id", "sex", "age", "region", "group",
    "daily_smoker", "alcohol_portions", "education", "civil_status",
    "hypertension", "high_chol", "bp_recent", "chol_recent",
    "hosp_full", "hosp_5y", "hosp_1y",
)

# questionnaire columns; all of them must be empty for non-participants
QUESTIONNAIRE_COLUMNS = CSV_COLUMNS[5:13]

# binary/categorical fields handled by the imputation engine
MODELED_FIELDS = (
    "daily_smoker", "heavy_alcohol", "education", "civil_status",
    "hypertension", "high_chol", "bp_recent", "chol_recent",
)

BINARY_FIELDS = (
    "daily_smoker", "heavy_alcohol", "hypertension", "high_chol",
    "bp_recent", "chol_recent",
)

CATEGORICAL_LEVELS = {"education": EDUCATION_LEVELS, "civil_status": CIVIL_LEVELS}


def age_band_index(age):
    """Decade band index for an age (vectorized)."""
    return (np.asarray(age) - AGE_MIN) // 10


def age_band_label(age):
    return AGE_BANDS[int(age_band_index(age))]


def classify_group(completed_exam, returned_recontact_questionnaire, row_id=None):
    """Three-way participation label from the two response indicators.

    The re-contact questionnaire was sent only to exam non-participants,
    so both flags set at once is an invalid record.
    """
    if completed_exam and returned_recontact_questionnaire:
        tag = "" if row_id is None else f" (row id {row_id})"
        raise CohortValueError(
            f"invalid record{tag}: examined invitees receive no re-contact questionnaire"
        )
    if completed_exam:
        return "Participant"
    if returned_recontact_questionnaire:
        return "RecontactRespondent"
    return "NonParticipant"


def classify_heavy_alcohol(sex, portions_per_week):
    """Heavy use: strictly more than 16 (women) / 24 (men) portions per week."""
    if portions_per_week < 0:
        raise CohortValueError(f"negative alcohol portions: {portions_per_week}")
    if sex not in SEXES:
        raise CohortValueError(f"unknown sex {sex!r}")
    limit = HEAVY_PORTIONS_FEMALE if sex == "Female" else HEAVY_PORTIONS_MALE
    return portions_per_week > limit


@dataclass(frozen=True)
class Background:
    sex: str
    age: int
    region: str

    @property
    def age_group(self):
        return age_band_label(self.age)


@dataclass(frozen=True)
class Questionnaire:
    daily_smoker: object = None
    alcohol_portions_per_week: object = None
    heavy_alcohol: object = None
    education: object = None
    civil_status: object = None
    hypertension: object = None
    high_chol: object = None
    bp_recent: object = None
    chol_recent: object = None


@dataclass(frozen=True)
class HospitalizationCounts:
    full_history: int
    five_year: int
    one_year: int

    def __post_init__(self):
        if not 0 <= self.one_year <= self.five_year <= self.full_history:
            raise CohortValueError(
                "hospitalization horizons must nest: "
                f"{self.one_year} <= {self.five_year} <= {self.full_history} violated"
            )


@dataclass(frozen=True)
class Row:
    id: int
    background: Background
    group: str
    questionnaire: Questionnaire
    hospitalizations: HospitalizationCounts


@dataclass
class Provenance:
    kind: str  # "synthetic" | "ingested"
    path: str = None
    seed: int = None
    config_hash: str = None
    truth: dict = None  # synthetic only: unmasked questionnaire columns


_FLOAT_COLUMNS = MODELED_FIELDS + ("alcohol_portions",)


class CohortTable:
    """Columnar cohort with validation on construction.

    Columns: id (int), sex/region/group (int codes into SEXES, REGIONS,
    GROUPS), age (int), hosp_full/hosp_5y/hosp_1y (int), and float
    columns with NaN for missing: daily_smoker, alcohol_portions,
    heavy_alcohol, education, civil_status, hypertension, high_chol,
    bp_recent, chol_recent.
    """

    INT_COLUMNS = ("id", "sex", "age", "region", "group", "hosp_full", "hosp_5y", "hosp_1y")
    FLOAT_COLUMNS = _FLOAT_COLUMNS

    def __init__(self, columns, provenance):
        self.provenance = provenance
        cols = {}
        n = None
        for name in self.INT_COLUMNS:
            arr = np.asarray(columns[name], dtype=np.int64)
            if n is None:
                n = arr.shape[0]
            cols[name] = arr
        for name in self.FLOAT_COLUMNS:
            cols[name] = np.asarray(columns[name], dtype=np.float64)
        for name, arr in cols.items():
            if arr.shape != (n,):
                raise DataError(f"column {name!r} has wrong length")
        self.columns = cols
        self._validate()

    def _validate(self):
        c = self.columns
        n = len(self)
        if n == 0:
            raise DataError("cohort has no rows")
        if len(np.unique(c["id"])) != n:
            raise CohortValueError("duplicate ids in cohort")
        if np.any((c["age"] < AGE_MIN) | (c["age"] > AGE_MAX)):
            bad = int(np.argmax((c["age"] < AGE_MIN) | (c["age"] > AGE_MAX)))
            raise CohortValueError(f"age out of range [25, 74] at id {c['id'][bad]}")
        for name, levels in (("sex", SEXES), ("region", REGIONS), ("group", GROUPS)):
            if np.any((c[name] < 0) | (c[name] >= len(levels))):
                raise CohortValueError(f"{name} code outside declared levels")
        for name in BINARY_FIELDS:
            v = c[name]
            ok = np.isnan(v) | (v == 0.0) | (v == 1.0)
            if not np.all(ok):
                raise CohortValueError(f"{name} must be 0/1 or missing")
        for name, levels in CATEGORICAL_LEVELS.items():
            v = c[name]
            ok = np.isnan(v) | ((v >= 0) & (v < len(levels)) & (v == np.floor(v)))
            if not np.all(ok):
                raise CohortValueError(f"{name} outside declared levels")
        if np.any(c["alcohol_portions"] < 0):
            raise CohortValueError("negative alcohol portions")
        if np.any(
            (c["hosp_1y"] > c["hosp_5y"])
            | (c["hosp_5y"] > c["hosp_full"])
            | (c["hosp_1y"] < 0)
        ):
            raise CohortValueError("hospitalization horizons must nest")
        # non-participants never have questionnaire data; imputation
        # outputs (kind "completed") are the sanctioned exception
        if getattr(self.provenance, "kind", None) != "completed":
            np_mask = c["group"] == GROUPS.index("NonParticipant")
            for name in self.FLOAT_COLUMNS:
                if np.any(~np.isnan(c[name][np_mask])):
                    raise CohortValueError(
                        f"non-participant rows must have {name} missing"
                    )
        # derived flag agrees with the classifier wherever portions exist
        have = ~np.isnan(c["alcohol_portions"])
        if np.any(have):
            limit = np.where(c["sex"] == SEXES.index("Female"),
                             HEAVY_PORTIONS_FEMALE, HEAVY_PORTIONS_MALE)
            expect = (c["alcohol_portions"][have] > limit[have]).astype(float)
            got = c["heavy_alcohol"][have]
            if np.any(np.isnan(got)) or np.any(got != expect):
                raise CohortValueError(
                    "heavy_alcohol disagrees with the portions classifier"
                )

    def __len__(self):
        return self.columns["id"].shape[0]

    def group_mask(self, group):
        return self.columns["group"] == GROUPS.index(group)

    def group_counts(self):
        return {g: int(np.sum(self.group_mask(g))) for g in GROUPS}

    def row(self, i):
        c = self.columns

        def opt(name):
            v = c[name][i]
            return None if np.isnan(v) else v

        def opt_bool(name):
            v = opt(name)
            return None if v is None else bool(v)

        q = Questionnaire(
            daily_smoker=opt_bool("daily_smoker"),
            alcohol_portions_per_week=opt("alcohol_portions"),
            heavy_alcohol=opt_bool("heavy_alcohol"),
            education=None if opt("education") is None else EDUCATION_LEVELS[int(c["education"][i])],
            civil_status=None if opt("civil_status") is None else CIVIL_LEVELS[int(c["civil_status"][i])],
            hypertension=opt_bool("hypertension"),
            high_chol=opt_bool("high_chol"),
            bp_recent=opt_bool("bp_recent"),
            chol_recent=opt_bool("chol_recent"),
        )
        return Row(
            id=int(c["id"][i]),
            background=Background(
                sex=SEXES[c["sex"][i]], age=int(c["age"][i]), region=REGIONS[c["region"][i]]
            ),
            group=GROUPS[c["group"][i]],
            questionnaire=q,
            hospitalizations=HospitalizationCounts(
                int(c["hosp_full"][i]), int(c["hosp_5y"][i]), int(c["hosp_1y"][i])
            ),
        )

    def replace_columns(self, provenance=None, **updates):
        """New table with some columns swapped out (originals untouched)."""
        cols = {k: v.copy() for k, v in self.columns.items()}
        cols.update(updates)
        return CohortTable(cols, provenance or self.provenance)


def _format_cell(value, is_float):
    if value is None:
        return ""
    if is_float:
        return str(float(value))
    return str(int(value))


def write_cohort(table, path, extra_columns=None):
    """Write the canonical CSV (UTF-8, header, 0/1 booleans, empty missing).

    ``extra_columns`` appends named float columns after the schema; the
    imputation engine uses this for completed datasets where the derived
    heavy_alcohol flag has no portions column to back it out of.
    """
    c = table.columns
    extra = extra_columns or {}
    header = list(CSV_COLUMNS) + list(extra)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(len(table)):
            row = [
                str(int(c["id"][i])),
                SEXES[c["sex"][i]],
                str(int(c["age"][i])),
                REGIONS[c["region"][i]],
                GROUPS[c["group"][i]],
            ]
            for name in ("daily_smoker",):
                v = c[name][i]
                row.append("" if np.isnan(v) else str(int(v)))
            v = c["alcohol_portions"][i]
            row.append("" if np.isnan(v) else str(float(v)))
            for name, levels in (("education", EDUCATION_LEVELS), ("civil_status", CIVIL_LEVELS)):
                v = c[name][i]
                row.append("" if np.isnan(v) else levels[int(v)])
            for name in ("hypertension", "high_chol", "bp_recent", "chol_recent"):
                v = c[name][i]
                row.append("" if np.isnan(v) else str(int(v)))
            row.extend(str(int(c[h][i])) for h in ("hosp_full", "hosp_5y", "hosp_1y"))
            for name, arr in extra.items():
                v = arr[i]
                row.append("" if np.isnan(v) else str(int(v)) if float(v).is_integer() else str(float(v)))
            writer.writerow(row)


def _parse_bool(text, line, column):
    if text == "":
        return np.nan
    if text == "0":
        return 0.0
    if text == "1":
        return 1.0
    raise CohortValueError(f"line {line}, column {column!r}: expected 0/1/empty, got {text!r}")


def _parse_level(text, levels, line, column):
    if text == "":
        return np.nan
    try:
        return float(levels.index(text))
    except ValueError:
        raise CohortValueError(
            f"line {line}, column {column!r}: {text!r} not in {levels}"
        ) from None


def load_cohort(path):
    """Read and validate a cohort CSV; errors name the line and column."""
    cols = {name: [] for name in CSV_COLUMNS}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CohortSchemaError(f"{path}: empty file") from None
        if tuple(header) != CSV_COLUMNS:
            raise CohortSchemaError(
                f"{path}: header mismatch; expected {','.join(CSV_COLUMNS)}"
            )
        line = 1
        for rec in reader:
            line += 1
            if len(rec) != len(CSV_COLUMNS):
                raise CohortSchemaError(
                    f"{path} line {line}: {len(rec)} fields, expected {len(CSV_COLUMNS)}"
                )
            for name, text in zip(CSV_COLUMNS, rec):
                cols[name].append(text)
    n = len(cols["id"])
    if n == 0:
        raise CohortSchemaError(f"{path}: no data rows")

    out = {}
    lines = np.arange(2, n + 2)

    def fail(idx, column, message):
        raise CohortValueError(f"{path} line {lines[idx]}, column {column!r}: {message}")

    def parse_int(name, lo=None):
        vals = np.empty(n, dtype=np.int64)
        for i, text in enumerate(cols[name]):
            try:
                vals[i] = int(text)
            except ValueError:
                fail(i, name, f"expected integer, got {text!r}")
            if lo is not None and vals[i] < lo:
                fail(i, name, f"must be >= {lo}, got {vals[i]}")
        return vals

    out["id"] = parse_int("id")
    out["age"] = parse_int("age")
    bad = np.nonzero((out["age"] < AGE_MIN) | (out["age"] > AGE_MAX))[0]
    if bad.size:
        fail(bad[0], "age", f"outside [25, 74]: {out['age'][bad[0]]}")
    for name, levels in (("sex", SEXES), ("region", REGIONS), ("group", GROUPS)):
        codes = np.empty(n, dtype=np.int64)
        for i, text in enumerate(cols[name]):
            try:
                codes[i] = levels.index(text)
            except ValueError:
                fail(i, name, f"{text!r} not in {levels}")
        out[name] = codes
    for name in ("daily_smoker", "hypertension", "high_chol", "bp_recent", "chol_recent"):
        out[name] = np.array(
            [_parse_bool(t, lines[i], name) for i, t in enumerate(cols[name])]
        )
    portions = np.empty(n)
    for i, text in enumerate(cols["alcohol_portions"]):
        if text == "":
            portions[i] = np.nan
            continue
        try:
            portions[i] = float(text)
        except ValueError:
            fail(i, "alcohol_portions", f"expected number, got {text!r}")
        if portions[i] < 0:
            fail(i, "alcohol_portions", "negative portions")
    out["alcohol_portions"] = portions
    out["education"] = np.array(
        [_parse_level(t, EDUCATION_LEVELS, lines[i], "education") for i, t in enumerate(cols["education"])]
    )
    out["civil_status"] = np.array(
        [_parse_level(t, CIVIL_LEVELS, lines[i], "civil_status") for i, t in enumerate(cols["civil_status"])]
    )
    for name in ("hosp_full", "hosp_5y", "hosp_1y"):
        out[name] = parse_int(name, lo=0)
    bad = np.nonzero(
        (out["hosp_1y"] > out["hosp_5y"]) | (out["hosp_5y"] > out["hosp_full"])
    )[0]
    if bad.size:
        fail(bad[0], "hosp_1y", "hospitalization horizons do not nest")

    dup_ids, counts = np.unique(out["id"], return_counts=True)
    if np.any(counts > 1):
        first_dup = dup_ids[np.argmax(counts > 1)]
        idx = np.nonzero(out["id"] == first_dup)[0][1]
        fail(idx, "id", f"duplicate id {first_dup}")

    np_mask = out["group"] == GROUPS.index("NonParticipant")
    for name in ("daily_smoker", "alcohol_portions", "education", "civil_status",
                 "hypertension", "high_chol", "bp_recent", "chol_recent"):
        bad = np.nonzero(np_mask & ~np.isnan(out[name]))[0]
        if bad.size:
            fail(bad[0], name, "non-participant row with questionnaire data")

    # derive the heavy-use flag from portions
    limit = np.where(out["sex"] == SEXES.index("Female"),
                     HEAVY_PORTIONS_FEMALE, HEAVY_PORTIONS_MALE)
    heavy = np.where(np.isnan(portions), np.nan, (portions > limit).astype(float))
    out["heavy_alcohol"] = heavy

    return CohortTable(out, Provenance(kind="ingested", path=str(path)))


def config_hash(config_dict):
    """Stable short hash of a JSON-serializable config."""
    blob = json.dumps(config_dict, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _wald_pct(k, n):
    """Percentage with a Wald 95% interval, or None when undefined."""
    if n == 0:
        return None
    p = k / n
    half = 1.96 * float(np.sqrt(p * (1.0 - p) / n))
    return {
        "pct": 100.0 * p,
        "ci": [100.0 * max(p - half, 0.0), 100.0 * min(p + half, 1.0)],
        "n": int(n),
    }


def summarize_cohort(table):
    """Per-group summary: sizes, composition, and indicator prevalences.

    Mirrors the usual survey table: N, % women, mean age, age-band,
    education and civil-status shares, then daily smoking and heavy
    drinking by sex and
    age band.  Proportions carry Wald 95% intervals; groups or cells
    with no data are marked unavailable instead of NaN.
    """
    c = table.columns
    out = {"n_total": len(table), "groups": {}}
    for g in GROUPS:
        mask = table.group_mask(g)
        n = int(mask.sum())
        if n == 0:
            out["groups"][g] = {"n": 0, "available": False}
            continue
        entry = {"n": n, "available": True}
        female = c["sex"][mask] == SEXES.index("Female")
        entry["women"] = _wald_pct(int(female.sum()), n)
        ages = c["age"][mask]
        half = 1.96 * ages.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
        entry["age_mean"] = {"mean": float(ages.mean()),
                             "ci": [float(ages.mean() - half), float(ages.mean() + half)]}
        bands = age_band_index(ages)
        entry["age_bands"] = {
            AGE_BANDS[b]: _wald_pct(int(np.sum(bands == b)), n) for b in range(5)
        }
        for name, levels in (("education", EDUCATION_LEVELS), ("civil_status", CIVIL_LEVELS)):
            vals = c[name][mask]
            got = ~np.isnan(vals)
            n_obs = int(got.sum())
            entry[name] = {
                lev: _wald_pct(int(np.sum(vals[got] == k)), n_obs)
                for k, lev in enumerate(levels)
            }
        for name in ("daily_smoker", "heavy_alcohol"):
            by_sex = {}
            for s, sex_name in enumerate(SEXES):
                sub = mask & (c["sex"] == s)
                vals = c[name][sub]
                got = ~np.isnan(vals)
                cells = {"all": _wald_pct(int(np.nansum(vals)), int(got.sum()))}
                sub_bands = age_band_index(c["age"][sub])
                for b, band in enumerate(AGE_BANDS):
                    in_band = sub_bands == b
                    vb = vals[in_band]
                    gb = ~np.isnan(vb)
                    cells[band] = _wald_pct(int(np.nansum(vb)), int(gb.sum()))
                by_sex[sex_name.lower()] = cells
            entry[name] = by_sex
        out["groups"][g] = entry
    return out
