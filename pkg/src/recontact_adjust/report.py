"""Run artifacts: manifests, estimate tables, and the combined report.

Every writer here is deterministic: fixed key order, fixed float
formatting, newline-terminated, no timestamps.  Two runs with the same
inputs and seed produce byte-identical files.
"""

import csv
import hashlib
import json
import os

from . import assumptions, design
from .cohort import GROUPS, summarize_cohort
from .errors import DataError
from .mi import STRATEGIES, complete_case_prevalence, estimate_prevalence

INDICATORS = ("daily_smoker", "heavy_alcohol")
SUBGROUPS = ("men", "women", "both")

INDICATOR_TITLES = {
    "daily_smoker": "daily smoking",
    "heavy_alcohol": "heavy alcohol use",
}
METHOD_TITLES = {
    "complete-case": "participants only",
    "MiMnar": "MI-MNAR",
    "MiMar": "MI-MAR",
    "MiMarNr": "MI-MAR-NR",
}
GROUP_TITLES = {
    "all": "full cohort",
    "Participant": "participants",
    "RecontactRespondent": "re-contact respondents",
    "NonParticipant": "non-participants",
}

SYNTH_MANIFEST = "manifest_synth.json"
IMPUTE_MANIFEST = "manifest_impute.json"
CHECK_MANIFEST = "manifest_check.json"
REPORT_MANIFEST = "manifest_report.json"


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def write_manifest(path, command, seed, inputs, outputs, extra=None):
    """Record what a command read and wrote, with content hashes."""
    from . import __version__

    payload = {
        "tool": "recontact-adjust",
        "version": __version__,
        "command": command,
        "seed": seed,
        "inputs": {name: {"path": p, "sha256": file_sha256(p)}
                   for name, p in inputs.items()},
        "outputs": {name: {"path": os.path.basename(p), "sha256": file_sha256(p)}
                    for name, p in outputs.items()},
    }
    if extra:
        payload.update(extra)
    write_json(path, payload)
    return payload


def _fnum(value):
    return f"{value:.6f}"


def prevalence_rows(table, imputations_by_strategy):
    """Percent-scale prevalence estimates, complete case first."""
    rows = []
    for indicator in INDICATORS:
        for subgroup in SUBGROUPS:
            est = complete_case_prevalence(table, indicator, subgroup)
            rows.append({
                "indicator": indicator, "subgroup": subgroup,
                "method": "complete-case",
                "estimate": 100.0 * est.point,
                "ci_low": 100.0 * est.ci95[0],
                "ci_high": 100.0 * est.ci95[1],
            })
        for strategy in STRATEGIES:
            imp = imputations_by_strategy.get(strategy)
            if imp is None:
                continue
            for subgroup in SUBGROUPS:
                est = estimate_prevalence(imp, indicator, subgroup)
                rows.append({
                    "indicator": indicator, "subgroup": subgroup,
                    "method": strategy,
                    "estimate": 100.0 * est.point,
                    "ci_low": 100.0 * est.ci95[0],
                    "ci_high": 100.0 * est.ci95[1],
                })
    return rows


def rates_rows(table, imputations_by_strategy, horizons=design.HORIZONS):
    """Per-1000 hospitalization rows: observed groups, then methods."""
    rows = []
    for horizon in horizons:
        for subgroup in SUBGROUPS:
            for group in ("all",) + tuple(GROUPS):
                res = assumptions.predicted_per_1000(
                    table, horizon, group=group, subgroup=subgroup)
                rows.append(_rate_row(res, f"observed:{group}", horizon, subgroup))
            for strategy in STRATEGIES:
                imp = imputations_by_strategy.get(strategy)
                if imp is None:
                    continue
                res = assumptions.predicted_per_1000(
                    imp, horizon, subgroup=subgroup)
                rows.append(_rate_row(res, f"method:{strategy}", horizon, subgroup))
    return rows


def _rate_row(res, source, horizon, subgroup):
    return {
        "horizon": horizon, "subgroup": subgroup, "source": source,
        "value": res.value, "ci_low": res.ci_low, "ci_high": res.ci_high,
        "n_rows": res.n_rows, "available": res.available,
    }


ESTIMATE_FIELDS = ("indicator", "subgroup", "method", "estimate", "ci_low", "ci_high")
RATE_FIELDS = ("horizon", "subgroup", "source", "value", "ci_low", "ci_high",
               "n_rows", "available")


def _write_csv(path, fields, rows, float_fields):
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(fields)
        for row in rows:
            out = []
            for name in fields:
                v = row[name]
                if name in float_fields:
                    out.append("" if v != v else _fnum(v))  # NaN -> empty
                else:
                    out.append(str(v))
            w.writerow(out)


def write_estimates_csv(path, rows):
    _write_csv(path, ESTIMATE_FIELDS, rows, {"estimate", "ci_low", "ci_high"})


def write_rates_csv(path, rows):
    _write_csv(path, RATE_FIELDS, rows, {"value", "ci_low", "ci_high"})


def read_csv_rows(path):
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def _interval(value, lo, hi, digits=0):
    if value == "" or value is None:
        return "-"
    fmt = f"{{:.{digits}f}}"
    return f"{fmt.format(float(value))} ({fmt.format(float(lo))},{fmt.format(float(hi))})"


def render_summary_section(table):
    """Cohort description by group: sizes, age, smoking and drinking."""
    summary = summarize_cohort(table)
    lines = ["Cohort summary", ""]
    lines.append(f"  invitees: {summary['n_total']}")
    for group in GROUPS:
        s = summary["groups"][group]
        if not s.get("available", True):
            lines.append(f"  {GROUP_TITLES[group]}: none")
            continue
        parts = [f"n={s['n']}",
                 f"women {s['women']['pct']:.1f}%",
                 f"mean age {s['age_mean']['mean']:.1f}"]
        for name, title in (("daily_smoker", "smoking"),
                            ("heavy_alcohol", "heavy alcohol")):
            cells = [s[name][sex]["all"] for sex in ("male", "female")]
            if all(c is not None and c["n"] > 0 for c in cells):
                parts.append(f"{title} m/w "
                             f"{cells[0]['pct']:.1f}/{cells[1]['pct']:.1f}%")
        lines.append(f"  {GROUP_TITLES[group]}: " + ", ".join(parts))
    return "\n".join(lines) + "\n"


_HORIZON_TITLES = {"full": "full history", "5y": "five years", "1y": "one year"}


def render_rates_section(rate_rows):
    """Per-1000 comparison, groups then methods, by sex then both."""
    by_key = {}
    sources = []
    for row in rate_rows:
        by_key[(row["subgroup"], row["source"], row["horizon"])] = row
        if row["source"] not in sources:
            sources.append(row["source"])
    horizons = [h for h in design.HORIZONS
                if any(k[2] == h for k in by_key)]
    lines = ["Hospitalizations per 1000 individuals", ""]
    header = f"    {'':28}" + "".join(f"{_HORIZON_TITLES[h]:>22}" for h in horizons)
    for subgroup in SUBGROUPS:
        if not any(k[0] == subgroup for k in by_key):
            continue
        lines.append(f"  {subgroup}")
        lines.append(header)
        for source in sources:
            cells = []
            for h in horizons:
                row = by_key.get((subgroup, source, h))
                if row is None or row.get("available") in (False, "False"):
                    cells.append("-")
                else:
                    cells.append(_interval(row["value"], row["ci_low"], row["ci_high"]))
            kind, _, name = source.partition(":")
            title = (GROUP_TITLES.get(name, name) if kind == "observed"
                     else METHOD_TITLES.get(name, name))
            label = f"{kind}: {title}"
            lines.append(f"    {label:<28}" + "".join(f"{c:>22}" for c in cells))
        lines.append("")
    return "\n".join(lines)


def render_prevalence_section(estimate_rows):
    """Prevalence comparison by indicator and method, percent scale."""
    by_key = {}
    methods = []
    for row in estimate_rows:
        by_key[(row["indicator"], row["method"], row["subgroup"])] = row
        if row["method"] not in methods:
            methods.append(row["method"])
    lines = ["Prevalence estimates, percent (95% CI)", ""]
    header = f"    {'':20}" + "".join(f"{s:>22}" for s in SUBGROUPS)
    for indicator in INDICATORS:
        if not any(k[0] == indicator for k in by_key):
            continue
        lines.append(f"  {INDICATOR_TITLES[indicator]}")
        lines.append(header)
        for method in methods:
            cells = []
            for subgroup in SUBGROUPS:
                row = by_key.get((indicator, method, subgroup))
                cells.append("-" if row is None else
                             _interval(row["estimate"], row["ci_low"],
                                       row["ci_high"], digits=1))
            title = METHOD_TITLES.get(method, method)
            lines.append(f"    {title:<20}" + "".join(f"{c:>22}" for c in cells))
        lines.append("")
    return "\n".join(lines)


def build_report(run_dir):
    """Assemble the combined report from a run directory.

    Returns (text, csv_rows, missing) where ``missing`` lists absent
    upstream artifacts.  At least one of the impute or check artifact
    sets must be present; otherwise DataError.
    """
    paths = {
        "estimates": os.path.join(run_dir, "estimates.csv"),
        "rates": os.path.join(run_dir, "rates.csv"),
        "assumptions_json": os.path.join(run_dir, "assumptions.json"),
        "assumptions_text": os.path.join(run_dir, "assumptions.txt"),
        "cohort": os.path.join(run_dir, "cohort.csv"),
    }
    have = {k: os.path.exists(p) for k, p in paths.items()}
    missing = [os.path.basename(paths[k]) for k in
               ("estimates", "rates", "assumptions_json", "cohort")
               if not have[k]]
    if not (have["estimates"] or have["assumptions_json"]):
        raise DataError(
            "run directory has neither imputation nor assumption-check "
            "artifacts; missing: " + ", ".join(missing))

    sections = []
    csv_rows = []
    if have["cohort"]:
        from .cohort import load_cohort

        sections.append(render_summary_section(load_cohort(paths["cohort"])))
    else:
        sections.append("Cohort summary\n\n  not available (no cohort.csv)\n")

    if have["rates"]:
        rows = read_csv_rows(paths["rates"])
        sections.append(render_rates_section(rows))
        for r in rows:
            csv_rows.append({
                "section": "hospitalizations_per_1000",
                "key": r["horizon"], "subgroup": r["subgroup"],
                "source": r["source"], "value": r["value"],
                "ci_low": r["ci_low"], "ci_high": r["ci_high"],
            })
    else:
        sections.append("Hospitalizations per 1000 individuals\n\n"
                        "  not available (no rates.csv)\n")

    if have["estimates"]:
        rows = read_csv_rows(paths["estimates"])
        sections.append(render_prevalence_section(rows))
        for r in rows:
            csv_rows.append({
                "section": "prevalence_percent",
                "key": r["indicator"], "subgroup": r["subgroup"],
                "source": r["method"], "value": r["estimate"],
                "ci_low": r["ci_low"], "ci_high": r["ci_high"],
            })
    else:
        sections.append("Prevalence estimates\n\n  not available (no estimates.csv)\n")

    if have["assumptions_text"]:
        with open(paths["assumptions_text"], "r", encoding="utf-8") as f:
            sections.append(f.read())
    else:
        sections.append("Assumption checks\n\n  not available (no assumptions.txt)\n"
                        + "\n".join(assumptions.ASSUMPTION_LEGEND) + "\n")

    text = "\n".join(sections)
    return text, csv_rows, missing


REPORT_CSV_FIELDS = ("section", "key", "subgroup", "source",
                     "value", "ci_low", "ci_high")


def write_report(run_dir):
    """Write report.txt and report.csv into the run directory."""
    text, csv_rows, missing = build_report(run_dir)
    text_path = os.path.join(run_dir, "report.txt")
    with open(text_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    csv_path = os.path.join(run_dir, "report.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(REPORT_CSV_FIELDS)
        for row in csv_rows:
            w.writerow([str(row[k]) for k in REPORT_CSV_FIELDS])
    return text_path, csv_path, missing
