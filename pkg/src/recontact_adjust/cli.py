"""Command-line front end: synth, impute, check, report.

Exit codes are a stable scripting contract: 0 success, 2 input or
config error, 3 imputation (donor-pool) failure, 4 model-fit failure.
Seeds are mandatory wherever randomness enters; nothing is ever
auto-seeded.
"""

import argparse
import os
import sys

from . import report as report_mod
from . import synth
from .assumptions import evaluate_assumptions
from .cohort import load_cohort, write_cohort
from .errors import DataError, DonorPoolError, NumericError
from .mi import STRATEGIES, ImputationModelSpec, fcs_impute, normalize_strategy
from .report import write_json, write_manifest

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IMPUTE = 3
EXIT_FIT = 4


def _out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def cmd_synth(args):
    if args.config is not None:
        config = synth.load_config(args.config)
    else:
        config = synth.make_assumption3_config()
    if args.scale is not None:
        config = synth.scale_config(config, args.scale)
    table = synth.generate_cohort(config, seed=args.seed)
    out = _out_dir(args.out)
    cohort_path = os.path.join(out, "cohort.csv")
    truth_path = os.path.join(out, "truth.csv")
    config_path = os.path.join(out, "config_used.json")
    write_cohort(table, cohort_path)
    synth.write_truth(table, truth_path)
    synth.save_config(config, config_path)
    inputs = {"config": args.config} if args.config else {}
    write_manifest(
        os.path.join(out, report_mod.SYNTH_MANIFEST), "synth", args.seed,
        inputs,
        {"cohort": cohort_path, "truth": truth_path, "config_used": config_path},
        extra={"config_hash": config.hash(), "n_invitees": config.n_invitees,
               "scale": args.scale},
    )
    return EXIT_OK


def _strategy_list(raw):
    if raw == "all":
        return list(STRATEGIES)
    return [normalize_strategy(raw)]


def _horizon_list(raw):
    from .design import HORIZONS

    return list(HORIZONS) if raw == "all" else [raw]


def cmd_impute(args):
    table = load_cohort(args.infile)
    strategies = _strategy_list(args.strategy)
    spec = ImputationModelSpec(m=args.m, cycles=args.cycles, ridge=args.ridge)
    out = _out_dir(args.out)
    imputations = {}
    seeds = {}
    for i, strategy in enumerate(strategies):
        # one stream per strategy; offsets keep them distinct while the
        # run stays a pure function of --seed
        seeds[strategy] = args.seed + i
        imputations[strategy] = fcs_impute(
            table, spec=spec, strategy=strategy, seed=seeds[strategy])
    estimates = report_mod.prevalence_rows(table, imputations)
    rates = report_mod.rates_rows(table, imputations,
                                  horizons=_horizon_list(args.horizon))
    estimates_path = os.path.join(out, "estimates.csv")
    rates_path = os.path.join(out, "rates.csv")
    report_mod.write_estimates_csv(estimates_path, estimates)
    report_mod.write_rates_csv(rates_path, rates)
    outputs = {"estimates": estimates_path, "rates": rates_path}
    if args.keep_completed:
        for strategy, imp in imputations.items():
            for k, completed in enumerate(imp.tables):
                path = os.path.join(out, f"completed_{strategy}_{k}.csv")
                # imputed heavy flags have no portions to back them out of
                extra = {"heavy_alcohol": completed.columns["heavy_alcohol"]}
                write_cohort(completed, path, extra_columns=extra)
                outputs[f"completed_{strategy}_{k}"] = path
    write_manifest(
        os.path.join(out, report_mod.IMPUTE_MANIFEST), "impute", args.seed,
        {"cohort": args.infile}, outputs,
        extra={"strategies": strategies, "strategy_seeds": seeds,
               "m": args.m, "cycles": args.cycles, "ridge": args.ridge,
               "horizons": _horizon_list(args.horizon),
               "threads": args.threads},
    )
    return EXIT_OK


def cmd_check(args):
    table = load_cohort(args.infile)
    report = evaluate_assumptions(table, threads=args.threads)
    out = _out_dir(args.out)
    json_path = os.path.join(out, "assumptions.json")
    text_path = os.path.join(out, "assumptions.txt")
    write_json(json_path, report.to_dict())
    with open(text_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(report.to_text())
    write_manifest(
        os.path.join(out, report_mod.CHECK_MANIFEST), "check", None,
        {"cohort": args.infile},
        {"assumptions_json": json_path, "assumptions_text": text_path},
        extra={"complete": report.complete, "threads": args.threads},
    )
    if not report.complete:
        failed = [h for h, c in report.horizons.items() if not c.fitted]
        print(f"error: model fit failed for horizon(s) {', '.join(failed)}; "
              "partial report written", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def cmd_report(args):
    run_dir = args.infile
    text_path, csv_path, missing = report_mod.write_report(run_dir)
    write_manifest(
        os.path.join(run_dir, report_mod.REPORT_MANIFEST), "report", None,
        {}, {"report_text": text_path, "report_csv": csv_path},
        extra={"missing_upstream": missing},
    )
    if missing:
        print("note: missing upstream artifacts: " + ", ".join(missing),
              file=sys.stderr)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="recontact-adjust",
        description="Generate, impute, and check survey cohorts with "
                    "register-linked hospitalization counts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--config", help="SynthConfig JSON (built-in default if omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--scale", type=float,
                   help="scale strata counts by this factor")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("impute", help="multiply impute a cohort")
    p.add_argument("--in", dest="infile", required=True, help="cohort CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--strategy", default="all",
                   choices=["mi-mnar", "mi-mar", "mi-mar-nr", "all"])
    p.add_argument("--m", type=int, default=20, help="imputations per strategy")
    p.add_argument("--cycles", type=int, default=20, help="FCS cycles per chain")
    p.add_argument("--ridge", type=float, default=0.0,
                   help="ridge penalty for small donor pools")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--horizon", default="all", choices=["full", "5y", "1y", "all"],
                   help="hospitalization horizons for the rate table")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--keep-completed", action="store_true",
                   help="also write every completed dataset")
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("check", help="fit the assumption-checking models")
    p.add_argument("--in", dest="infile", required=True, help="cohort CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("report", help="combine run artifacts into a report")
    p.add_argument("--in", dest="infile", required=True, help="run directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DonorPoolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IMPUTE
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
