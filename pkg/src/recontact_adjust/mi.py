"""Multiple imputation by fully conditional specification.

Three strategies differ only in which rows a conditional model may
learn from and which rows it imputes:

* MiMnar: parameters differ by group.  A re-contact-respondent fit
  imputes re-contact respondents' holes and all non-participants; a
  participants-only fit imputes participants' item-missing cells.
* MiMar: one shared fit per variable on every row where the variable
  was originally observed.
* MiMarNr: re-contact questionnaire data are discarded up front, so the
  shared fit learns from participants only.

Each of the m chains owns a private substream spawned from the run
seed, initializes holes by resampling the donor pool's observed
values, then sweeps the variables in a fixed order for the configured
number of cycles: fit, draw coefficients from the asymptotic normal,
draw values.  Education and civil status decompose into nested
dichotomies so the one logistic fitter serves everything.

Pooling follows the standard combining rules; see ``pool``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from scipy.stats import norm, t as student_t

from .cohort import GROUPS, MODELED_FIELDS, SEXES, Provenance
from .design import imputation_design
from .errors import DataError, DonorPoolError, NumericError
from .glm import draw_coefficients, fit_logistic

STRATEGIES = ("MiMnar", "MiMar", "MiMarNr")

_CLI_NAMES = {"mi-mnar": "MiMnar", "mi-mar": "MiMar", "mi-mar-nr": "MiMarNr"}


def normalize_strategy(name):
    if name in STRATEGIES:
        return name
    if name in _CLI_NAMES:
        return _CLI_NAMES[name]
    raise DataError(f"unknown strategy {name!r}; expected one of {sorted(_CLI_NAMES)}")


@dataclass
class ImputationModelSpec:
    """Which variables get imputed, how often, and how many times."""

    targets: tuple = MODELED_FIELDS
    m: int = 20
    cycles: int = 20
    ridge: float = 0.0

    def __post_init__(self):
        unknown = set(self.targets) - set(MODELED_FIELDS)
        if unknown:
            raise DataError(f"cannot impute {sorted(unknown)[0]!r}")
        if self.m < 1:
            raise DataError("m must be at least 1")
        if self.cycles < 1:
            raise DataError("cycles must be at least 1")
        if self.ridge < 0:
            raise DataError("ridge must be non-negative")

    def covariates_for(self, target):
        """Predictor fields of one conditional model (for manifests)."""
        others = [f for f in self.targets if f != target]
        return ["sex", "age", "region"] + others

    def to_dict(self):
        return {"targets": list(self.targets), "m": self.m,
                "cycles": self.cycles, "ridge": self.ridge,
                "models": {t: {"family": "nested-logistic" if t in ("education", "civil_status") else "logistic",
                               "covariates": self.covariates_for(t)}
                           for t in self.targets}}


@dataclass
class MultipleImputations:
    strategy: str
    seed: int
    spec: ImputationModelSpec
    tables: list
    traces: dict  # field -> (m, cycles) imputed-cell means by cycle

    @property
    def m(self):
        return len(self.tables)


@dataclass
class PooledEstimate:
    point: float
    within_var: float
    between_var: float
    total_var: float
    df: float
    ci95: tuple

    def to_dict(self):
        return {"point": self.point, "within_var": self.within_var,
                "between_var": self.between_var, "total_var": self.total_var,
                "df": self.df, "ci95": list(self.ci95)}

    @property
    def ci_width(self):
        return self.ci95[1] - self.ci95[0]


def pool(estimates):
    """Combine m (point, variance) pairs.

    Q̄ = mean point; W̄ = mean variance; B = sample variance of points;
    T = W̄ + (1 + 1/m)B; df = (m−1)(1 + W̄/((1+1/m)B))².  B = 0 falls
    back to normal quantiles (infinite df).
    """
    pts = np.array([e[0] for e in estimates], dtype=float)
    wvs = np.array([e[1] for e in estimates], dtype=float)
    m = pts.shape[0]
    if m < 2:
        raise DataError("pooling needs at least two imputations")
    if np.any(wvs < 0):
        raise DataError("negative within-imputation variance")
    qbar = float(np.mean(pts))
    wbar = float(np.mean(wvs))
    # equal points must land in the B=0 branch despite summation noise
    b = 0.0 if np.all(pts == pts[0]) else float(np.var(pts, ddof=1))
    total = wbar + (1.0 + 1.0 / m) * b
    ratio = wbar / ((1.0 + 1.0 / m) * b) if b > 0.0 else float("inf")
    # ratio beyond float range squares to overflow; that regime is the
    # B=0 limit anyway
    if np.isfinite(ratio) and ratio < 1e150:
        df = (m - 1) * (1.0 + ratio) ** 2
        q = float(student_t.ppf(0.975, df))
    else:
        df = float("inf")
        q = float(norm.ppf(0.975))
    half = q * float(np.sqrt(total))
    return PooledEstimate(point=qbar, within_var=wbar, between_var=b,
                          total_var=total, df=df, ci95=(qbar - half, qbar + half))


# ---------------------------------------------------------------------------
# FCS machinery

MAIN_FIELDS = ("daily_smoker", "heavy_alcohol")


def _strategy_blocks(strategy, group, target):
    """Fit/impute row partition per strategy and target variable.

    Returns a list of (label, fit_rows, impute_rows) boolean masks; the
    variable-specific observed/missing masks intersect these later.

    Only the main outcome models carry the group-specific assumption,
    so under MiMnar the covariate models pool participants with the
    re-contact respondents; fitting them on the small re-contact
    stratum would buy nothing but coefficient-draw noise.
    """
    part = group == GROUPS.index("Participant")
    rec = group == GROUPS.index("RecontactRespondent")
    nonpart = group == GROUPS.index("NonParticipant")
    if strategy == "MiMnar":
        if target in MAIN_FIELDS:
            donor = ("re-contact respondents", rec)
        else:
            donor = ("participants and re-contact respondents", part | rec)
        return [(donor[0], donor[1], rec | nonpart),
                ("participants", part, part)]
    if strategy == "MiMar":
        return [("participants and re-contact respondents", part | rec,
                 np.ones_like(part))]
    if strategy == "MiMarNr":
        return [("participants", part, np.ones_like(part))]
    raise DataError(f"unknown strategy {strategy!r}")


def _fit_and_draw(X, y, fit_rows, predict_rows, rng, ridge, context):
    """One proper-imputation step: fit, perturb coefficients, predict."""
    n_fit = int(fit_rows.sum())
    if ridge == 0.0 and n_fit < X.n_cols + 10:
        raise DonorPoolError(
            f"{context}: only {n_fit} donor rows for {X.n_cols} model columns; "
            "re-run with a positive ridge to allow small-stratum fits"
        )
    if n_fit < 2:
        raise DonorPoolError(f"{context}: donor pool is empty")
    try:
        fit = fit_logistic(X.matrix[fit_rows], y[fit_rows], ridge=ridge)
        beta = draw_coefficients(fit, rng)
    except DonorPoolError:
        raise
    except (NumericError, DataError) as exc:
        raise NumericError(f"{context}: {exc}") from exc
    p = expit(X.matrix[predict_rows] @ beta)
    return rng.random(p.shape[0]) < p


def _sweep_field(work, columns, target, blocks, observed, missing, rng, ridge, context):
    """Impute one variable across all blocks for one cycle."""
    X = imputation_design({**columns, **work}, target)
    v = work[target]
    for label, fit_base, impute_base in blocks:
        impute_rows = missing & impute_base
        if not impute_rows.any():
            continue
        fit_rows = observed & fit_base
        ctx = f"{context} {target!r} fit on {label}"
        if target == "education":
            draw = _fit_and_draw(X, (v > 0).astype(float), fit_rows, impute_rows,
                                 rng, ridge, ctx)
            v[impute_rows] = np.where(draw, 1.0, 0.0)
            upper = impute_rows.copy()
            upper[impute_rows] = draw
            if upper.any():
                draw2 = _fit_and_draw(X, (v == 2).astype(float),
                                      fit_rows & (v > 0), upper, rng, ridge, ctx)
                v[upper] = np.where(draw2, 2.0, 1.0)
        elif target == "civil_status":
            remaining = impute_rows.copy()
            fit_pool = fit_rows.copy()
            for level, rest in ((0.0, None), (1.0, None), (2.0, None), (3.0, 4.0)):
                if not remaining.any():
                    break
                draw = _fit_and_draw(X, (v == level).astype(float), fit_pool,
                                     remaining, rng, ridge, ctx)
                hit = remaining.copy()
                hit[remaining] = draw
                v[hit] = level
                remaining = remaining & ~hit
                if rest is not None:
                    v[remaining] = rest
                else:
                    fit_pool = fit_pool & (v > level)
        else:
            draw = _fit_and_draw(X, v, fit_rows, impute_rows, rng, ridge, ctx)
            v[impute_rows] = draw.astype(float)


def fcs_impute(table, spec=None, strategy="MiMnar", seed=0):
    """Run the chained-equations imputation; returns all m completed tables.

    Deterministic in (table, spec, strategy, seed); chain k draws from
    the k-th spawn of the seed, so results do not depend on execution
    order.
    """
    spec = spec or ImputationModelSpec()
    strategy = normalize_strategy(strategy)
    group = table.columns["group"]
    blocks_by_field = {f: _strategy_blocks(strategy, group, f)
                       for f in spec.targets}

    base = {f: table.columns[f].copy() for f in spec.targets}
    extra = {}
    if strategy == "MiMarNr":
        # the whole re-contact questionnaire is set aside, portions included,
        # otherwise a freshly imputed heavy-use flag could contradict an
        # observed portions value
        rec = group == GROUPS.index("RecontactRespondent")
        for arr in base.values():
            arr[rec] = np.nan
        portions = table.columns["alcohol_portions"].copy()
        portions[rec] = np.nan
        extra["alcohol_portions"] = portions
    observed = {f: ~np.isnan(base[f]) for f in spec.targets}
    missing = {f: np.isnan(base[f]) for f in spec.targets}
    any_missing = [f for f in spec.targets if missing[f].any()]

    fixed = {k: table.columns[k] for k in ("sex", "age", "region")}
    tables = []
    traces = {f: np.full((spec.m, spec.cycles), np.nan) for f in any_missing}
    children = np.random.SeedSequence(seed).spawn(spec.m)
    for chain, child in enumerate(children):
        rng = np.random.default_rng(child)
        work = {f: base[f].copy() for f in spec.targets}
        # marginal-resampling start per block's donor pool
        for f in any_missing:
            for label, fit_base, impute_base in blocks_by_field[f]:
                holes = missing[f] & impute_base
                if not holes.any():
                    continue
                donors = work[f][observed[f] & fit_base]
                if donors.size == 0:
                    raise DonorPoolError(
                        f"{f!r}: no observed donor values among {label}"
                    )
                work[f][holes] = donors[rng.integers(0, donors.size, int(holes.sum()))]
        for cycle in range(spec.cycles):
            for f in any_missing:
                _sweep_field(work, fixed, f, blocks_by_field[f], observed[f],
                             missing[f], rng, spec.ridge, f"cycle {cycle + 1},")
                traces[f][chain, cycle] = float(np.mean(work[f][missing[f]]))
        prov = Provenance(kind="completed", seed=int(seed),
                          config_hash=getattr(table.provenance, "config_hash", None),
                          truth=getattr(table.provenance, "truth", None))
        updates = {f: work[f] for f in spec.targets}
        updates.update({k: v.copy() for k, v in extra.items()})
        tables.append(table.replace_columns(provenance=prov, **updates))
    return MultipleImputations(strategy=strategy, seed=int(seed), spec=spec,
                               tables=tables, traces=traces)


# ---------------------------------------------------------------------------
# estimates

def _subgroup_mask(table, subgroup):
    if subgroup == "both":
        return np.ones(len(table), dtype=bool)
    if subgroup == "men":
        return table.columns["sex"] == SEXES.index("Male")
    if subgroup == "women":
        return table.columns["sex"] == SEXES.index("Female")
    raise DataError(f"unknown subgroup {subgroup!r}")


def estimate_prevalence(imputations, indicator, subgroup="both"):
    """Pooled prevalence of a completed binary indicator."""
    pairs = []
    for completed in imputations.tables:
        mask = _subgroup_mask(completed, subgroup)
        n = int(mask.sum())
        if n == 0:
            raise DataError(f"subgroup {subgroup!r} has no rows")
        vals = completed.columns[indicator][mask]
        if np.any(np.isnan(vals)):
            raise DataError(f"{indicator!r} still has missing values")
        p = float(np.mean(vals))
        pairs.append((p, p * (1.0 - p) / n))
    return pool(pairs)


def complete_case_prevalence(table, indicator, subgroup="both"):
    """Participants-only observed prevalence, as a degenerate pooled value."""
    mask = _subgroup_mask(table, subgroup)
    mask &= table.columns["group"] == GROUPS.index("Participant")
    vals = table.columns[indicator][mask]
    vals = vals[~np.isnan(vals)]
    if vals.size == 0:
        raise DataError(f"no observed {indicator!r} values among participants "
                        f"in subgroup {subgroup!r}")
    p = float(np.mean(vals))
    w = p * (1.0 - p) / vals.size
    half = float(norm.ppf(0.975)) * float(np.sqrt(w))
    return PooledEstimate(point=p, within_var=w, between_var=0.0, total_var=w,
                          df=float("inf"), ci95=(p - half, p + half))
