"""Register-based checks of the missing-data assumptions.

Hospitalization counts are known for every invitee regardless of
survey participation, so regressing them on background plus group
indicators tells us whether non-participants differ from the groups we
can observe.  A significant participant effect means the examined
sample is not exchangeable with the rest given background alone; a
null re-contact effect means re-contact respondents can stand in for
non-participants.
"""

from dataclasses import dataclass, field

import numpy as np

from . import design
from .cohort import GROUPS, SEXES
from .errors import DataError, RecontactAdjustError
from .glm import fit_zinb, predict_expected_count

Z95 = 1.959963984540054  # two-sided 95% normal quantile


def fit_hospitalization_model(table, horizon):
    """ZINB fit of a horizon's visit counts on background and group.

    Count part: intercept, age by sex in decades, sex, region dummies,
    participant and re-contact indicators (non-participant reference).
    Zero part drops the regions.
    """
    y = table.columns[design.horizon_column(horizon)]
    count_dm, zero_dm = design.hospitalization_design(table.columns)
    # short horizons sit near the excess-zero boundary and need a long
    # Newton leash to reach the optimum
    return fit_zinb(count_dm, zero_dm, y.astype(np.float64),
                    em_max=2000, newton_max=400)


@dataclass
class CoefficientInterval:
    estimate: float
    ci_low: float
    ci_high: float

    def contains_zero(self):
        return self.ci_low <= 0.0 <= self.ci_high

    def to_dict(self):
        return {
            "estimate": self.estimate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
        }


def coefficient_interval(fit, part, name):
    """95% Wald interval for a named coefficient of a ZINB fit.

    ``part`` selects the count or zero block; the covariance is laid
    out as (count, zero, log dispersion).
    """
    if part == "count":
        offset, names, coefs = 0, fit.count_names, fit.count_coefficients
    elif part == "zero":
        offset = len(fit.count_names)
        names, coefs = fit.zero_names, fit.zero_coefficients
    else:
        raise DataError(f"unknown model part {part!r}")
    try:
        j = list(names).index(name)
    except ValueError:
        raise DataError(f"no coefficient named {name!r} in the {part} model")
    est = float(coefs[j])
    var = float(fit.covariance[offset + j, offset + j])
    if var < 0:
        var = 0.0
    half = Z95 * var ** 0.5
    return CoefficientInterval(est, est - half, est + half)


@dataclass
class HorizonCheck:
    """One horizon's fit plus the group-indicator summaries."""

    horizon: str
    fit: object = None
    error: str = None
    count_participant: CoefficientInterval = None
    count_recontact: CoefficientInterval = None
    zero_participant: CoefficientInterval = None
    zero_recontact: CoefficientInterval = None
    assumption2_supported: bool = None
    assumption3_supported: bool = None

    @property
    def fitted(self):
        return self.fit is not None

    def to_dict(self):
        out = {"horizon": self.horizon, "fitted": self.fitted}
        if self.error is not None:
            out["error"] = self.error
        if self.fitted:
            out["fit"] = self.fit.to_dict()
            for key in ("count_participant", "count_recontact",
                        "zero_participant", "zero_recontact"):
                out[key] = getattr(self, key).to_dict()
            out["assumption2_supported"] = self.assumption2_supported
            out["assumption3_supported"] = self.assumption3_supported
        return out


def check_horizon(table, horizon):
    """Fit one horizon and derive the verdicts from the count model."""
    check = HorizonCheck(horizon=horizon)
    try:
        fit = fit_hospitalization_model(table, horizon)
    except RecontactAdjustError as exc:
        check.error = str(exc)
        return check
    check.fit = fit
    check.count_participant = coefficient_interval(fit, "count", "participant")
    check.count_recontact = coefficient_interval(fit, "count", "recontact")
    check.zero_participant = coefficient_interval(fit, "zero", "participant")
    check.zero_recontact = coefficient_interval(fit, "zero", "recontact")
    # verdicts use the count model only; the zero-model rows are shown
    # for completeness but do not move them
    check.assumption2_supported = check.count_participant.contains_zero()
    check.assumption3_supported = check.count_recontact.contains_zero()
    return check


SMALL_SAMPLE_ROWS = 500


@dataclass
class AssumptionReport:
    horizons: dict = field(default_factory=dict)
    n_rows: int = 0
    group_counts: dict = field(default_factory=dict)

    def horizon(self, name):
        return self.horizons[name]

    @property
    def complete(self):
        return all(h.fitted for h in self.horizons.values())

    def to_dict(self):
        return {
            "complete": self.complete,
            "n_rows": self.n_rows,
            "group_counts": dict(self.group_counts),
            "horizons": {k: v.to_dict() for k, v in self.horizons.items()},
        }

    def to_text(self):
        return render_assumption_report(self)


def evaluate_assumptions(table, threads=1):
    """Fit every horizon and collect verdicts.

    A horizon whose fit fails is reported with the error message and
    null verdicts instead of aborting the others.  The horizon fits are
    independent; ``threads`` > 1 runs them in a small pool.
    """
    report = AssumptionReport(n_rows=len(table), group_counts=table.group_counts())
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=min(threads, len(design.HORIZONS))) as pool:
            checks = list(pool.map(lambda h: check_horizon(table, h), design.HORIZONS))
        for horizon, check in zip(design.HORIZONS, checks):
            report.horizons[horizon] = check
    else:
        for horizon in design.HORIZONS:
            report.horizons[horizon] = check_horizon(table, horizon)
    return report


_HORIZON_TITLES = {
    "full": "full history",
    "5y": "five years",
    "1y": "one year",
}


def _fmt(value, width=7):
    return f"{value:{width}.2f}"


def _coef_rows(names, coefs, cov, offset):
    rows = []
    for j, name in enumerate(names):
        est = float(coefs[j])
        var = max(float(cov[offset + j, offset + j]), 0.0)
        half = Z95 * var ** 0.5
        rows.append(f"    {name:<24}{_fmt(est)}  ({_fmt(est - half)},{_fmt(est + half)})")
    return rows


ASSUMPTION_LEGEND = (
    "Assumption legend:",
    "  (1) data are missing completely at random",
    "  (2) data are missing at random given the background variables",
    "  (3) re-contact respondents represent non-participants given background",
    "Verdict rule: an assumption is supported when the matching group",
    "indicator's 95% CI in the count model contains zero; (2) is tested by",
    "the participant indicator, (3) by the re-contact indicator.",
)


def render_assumption_report(report):
    """Human-readable coefficient tables, count block then zero block."""
    counts = ", ".join(f"{g} {report.group_counts.get(g, 0)}" for g in GROUPS)
    lines = [
        "Hospitalization-rate comparison by group (reference: non-participants)",
        f"rows: {report.n_rows} ({counts})",
    ]
    if 0 < report.n_rows < SMALL_SAMPLE_ROWS:
        lines.append(f"warning: only {report.n_rows} rows; intervals are wide "
                     "and the fits may sit on a boundary")
    for horizon in design.HORIZONS:
        check = report.horizons.get(horizon)
        if check is None:
            continue
        lines.append("")
        lines.append(f"Horizon: {_HORIZON_TITLES[horizon]}")
        if not check.fitted:
            lines.append(f"  fit failed: {check.error}")
            continue
        fit = check.fit
        lines.append("  Count model (log rate)")
        lines.extend(_coef_rows(fit.count_names, fit.count_coefficients,
                                fit.covariance, 0))
        lines.append("  Excess-zero model (log odds)")
        lines.extend(_coef_rows(fit.zero_names, fit.zero_coefficients,
                                fit.covariance, len(fit.count_names)))
        lines.append(f"    {'dispersion':<24}{_fmt(fit.dispersion)}")
        a2 = "supported" if check.assumption2_supported else "violated"
        a3 = "supported" if check.assumption3_supported else "violated"
        lines.append(f"  assumption (2): {a2}")
        lines.append(f"  assumption (3): {a3}")
    lines.append("")
    lines.extend(ASSUMPTION_LEGEND)
    return "\n".join(lines) + "\n"


@dataclass
class PerThousand:
    """Visit count per 1000 individuals with a 95% interval."""

    source: str
    horizon: str
    value: float = float("nan")
    ci_low: float = float("nan")
    ci_high: float = float("nan")
    n_rows: int = 0
    available: bool = True

    def to_dict(self):
        return {
            "source": self.source,
            "horizon": self.horizon,
            "value": self.value,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_rows": self.n_rows,
            "available": self.available,
        }


def _row_mask(columns, group, subgroup):
    mask = np.ones(columns["sex"].shape[0], dtype=bool)
    if group != "all":
        if group not in GROUPS:
            raise DataError(f"unknown group {group!r}")
        mask &= columns["group"] == GROUPS.index(group)
    if subgroup == "men":
        mask &= columns["sex"] == SEXES.index("Male")
    elif subgroup == "women":
        mask &= columns["sex"] == SEXES.index("Female")
    elif subgroup != "both":
        raise DataError(f"unknown subgroup {subgroup!r}")
    return mask


# strategy -> (fit on participants only?, include participant indicator?)
_PREDICTION_PLANS = {
    "MiMnar": (False, True),
    "MiMar": (False, False),
    "MiMarNr": (True, False),
}


def _prediction_variance(fit, count_dm, zero_dm, rows):
    """Delta-method variance of the mean predicted count over ``rows``.

    The gradient stacks the count and zero blocks; the dispersion does
    not enter E[y], so its entry is zero.
    """
    Xc = count_dm.matrix[rows]
    Xz = zero_dm.matrix[rows]
    pred = np.atleast_1d(np.asarray(
        predict_expected_count(fit, Xc, Xz), dtype=np.float64))
    pi = 1.0 / (1.0 + np.exp(-(Xz @ fit.zero_coefficients)))
    n = Xc.shape[0]
    g_count = (pred[:, None] * Xc).mean(axis=0)
    g_zero = (-(pi * pred)[:, None] * Xz).mean(axis=0)
    grad = np.concatenate([g_count, g_zero, [0.0]])
    var = float(grad @ np.asarray(fit.covariance) @ grad)
    return float(pred.mean()), max(var, 0.0), n


def _observed_per_1000(table, horizon, group, subgroup):
    counts = table.columns[design.horizon_column(horizon)]
    mask = _row_mask(table.columns, group, subgroup)
    label = f"observed:{group}" if subgroup == "both" else f"observed:{group}:{subgroup}"
    n = int(mask.sum())
    if n == 0:
        return PerThousand(source=label, horizon=horizon, available=False)
    vals = counts[mask].astype(np.float64)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / n ** 0.5) if n > 1 else 0.0
    return PerThousand(
        source=label,
        horizon=horizon,
        value=1000.0 * mean,
        ci_low=1000.0 * (mean - Z95 * se),
        ci_high=1000.0 * (mean + Z95 * se),
        n_rows=n,
    )


def _method_per_1000(imputations, horizon, group, subgroup):
    from .mi import pool  # local import keeps the module load order simple

    plan = _PREDICTION_PLANS.get(imputations.strategy)
    if plan is None:
        raise DataError(f"unknown strategy {imputations.strategy!r}")
    participants_only, with_participant = plan
    label = f"method:{imputations.strategy}"
    if subgroup != "both":
        label = f"{label}:{subgroup}"
    estimates = []
    n_rows = 0
    for completed in imputations.tables:
        cols = completed.columns
        y = cols[design.horizon_column(horizon)].astype(np.float64)
        count_dm, zero_dm = design.prediction_design(cols, with_participant)
        fit_mask = cols["group"] == GROUPS.index("Participant")
        if not participants_only:
            fit_mask |= cols["group"] == GROUPS.index("RecontactRespondent")
        fit = fit_zinb(count_dm.matrix[fit_mask], zero_dm.matrix[fit_mask],
                       y[fit_mask])
        rows = _row_mask(cols, group, subgroup)
        if not rows.any():
            return PerThousand(source=label, horizon=horizon, available=False)
        mean, var, n_rows = _prediction_variance(fit, count_dm, zero_dm, rows)
        estimates.append((1000.0 * mean, 1.0e6 * var))
    pooled = pool(estimates)
    return PerThousand(
        source=label,
        horizon=horizon,
        value=pooled.point,
        ci_low=pooled.ci95[0],
        ci_high=pooled.ci95[1],
        n_rows=n_rows,
    )


def predicted_per_1000(source, horizon, group="all", subgroup="both"):
    """Visit counts per 1000 individuals for one horizon.

    ``source`` is either a cohort table, giving the empirical mean of
    an observed group (``group`` picks it, ``"all"`` for everyone), or
    a set of multiple imputations, giving the model-predicted expected
    count averaged over the selected rows of each completed dataset and
    pooled across imputations.  Empty strata come back unavailable
    rather than raising.
    """
    if hasattr(source, "tables"):
        return _method_per_1000(source, horizon, group, subgroup)
    return _observed_per_1000(source, horizon, group, subgroup)
