"""Command-line surface: analytic, simulate, audit, adjust, experiment, verify.

Exit codes: 0 on success, 1 when a verification check fails, 2 on usage or
input errors (argparse uses 2 natively; named input errors are reported as a
JSON object on stderr).  All outputs are deterministic given the arguments;
seeds appear in the output metadata.
"""

import argparse
import json
import math
import sys

from . import levels as levels_mod
from .audit import PredictionTable, batch_to_table, empirical_correlation, empirical_fairness
from .errors import EcofairError
from .harness import ExperimentConfig, results_to_csv, run_experiment, summarize
from .joint import EcosystemModel, pmf_fairness_levels, sample
from .levels import (
    CorrelationPair,
    OverlapRow,
    UtilityKind,
    dpc_correlation_level,
    dpc_correlation_worst_case,
    dpc_overlap_level,
    dpc_overlap_worst_case,
    eoc_correlation_level,
    eoc_correlation_worst_case,
    eoc_overlap_level,
    eoc_overlap_worst_case,
    eoc_worst_case_n,
    veoc_correlation_level,
    veoc_worst_case,
)
from .oracles import run_suite
from .postprocess import apply_policy, fit_eo_policy
from .scenarios import SCENARIOS, get_scenario


def _emit(doc: dict, fmt: str) -> None:
    if fmt == "csv":
        def flatten(prefix, obj, out):
            if isinstance(obj, dict):
                for k in sorted(obj):
                    flatten(f"{prefix}{k}.", obj[k], out)
            elif isinstance(obj, (list, tuple)):
                for i, v in enumerate(obj):
                    flatten(f"{prefix}{i}.", v, out)
            else:
                out.append((prefix.rstrip("."), obj))

        rows = []
        flatten("", doc, rows)
        sys.stdout.write("key,value\n")
        for key, value in rows:
            sys.stdout.write(f"{key},{value}\n")
    else:
        sys.stdout.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _parse_triple(text: str) -> OverlapRow:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise ValueError("overlap rows need three values: gamma1,gamma2,gamma_both")
    return OverlapRow(*parts)


def _cmd_analytic(args) -> dict:
    corr = CorrelationPair(args.rho0, args.rho1) if args.rho0 is not None else None
    if args.which == "eoc-corr":
        return {
            "rule": "correlation-gap",
            "eoc": eoc_correlation_level(args.beta1, args.beta2, corr),
            "worst_case": eoc_correlation_worst_case(args.beta1, args.beta2),
        }
    if args.which == "veoc-corr":
        util = UtilityKind(args.k)
        return {
            "rule": "welfare-correlation-gap",
            "k": args.k,
            "veoc": veoc_correlation_level(util, args.beta1, args.beta2, corr),
            "worst_case": veoc_worst_case(util, args.beta1, args.beta2),
        }
    if args.which == "eoc-n":
        betas = [float(v) for v in args.betas.split(",")]
        return {"rule": "n-lender-worst-case",
                "betas": betas, "worst_case": eoc_worst_case_n(betas)}
    if args.which == "eoc-overlap":
        g0, g1 = _parse_triple(args.overlap_g0), _parse_triple(args.overlap_g1)
        return {
            "rule": "overlap-gap",
            "eoc": eoc_overlap_level(args.beta1, args.beta2, g0, g1),
            "worst_case": eoc_overlap_worst_case(args.beta1, args.beta2),
        }
    if args.which == "dpc-corr":
        return {
            "rule": "approval-correlation-gap",
            "dpc": dpc_correlation_level(args.eta1, args.eta2, corr),
            "worst_case": dpc_correlation_worst_case(args.eta1, args.eta2),
        }
    g0, g1 = _parse_triple(args.overlap_g0), _parse_triple(args.overlap_g1)
    return {
        "rule": "approval-overlap-gap",
        "dpc": dpc_overlap_level(args.eta1, args.eta2, g0, g1),
        "worst_case": dpc_overlap_worst_case(args.eta1, args.eta2),
    }


def _monte_carlo(model: EcosystemModel, total: int, seed: int, k: float) -> dict:
    table = batch_to_table(sample(model, total, seed))
    est = empirical_fairness(table, UtilityKind(k))
    offered = 1.0 - (1.0 - table.probs).prod(axis=1)
    se_terms = []
    for a in (0, 1):
        mask = (table.group == a) & (table.label == 1)
        n_a = int(mask.sum())
        p_a = float(offered[mask].mean()) if n_a else math.nan
        se_terms.append(p_a * (1.0 - p_a) / n_a if n_a else math.nan)
    return {
        "samples": total,
        "seed": seed,
        "levels": est.as_dict(),
        "eoc_se": math.sqrt(se_terms[0] + se_terms[1]),
    }


def _cmd_simulate(args) -> dict:
    if args.model:
        with open(args.model) as fh:
            model = EcosystemModel.from_json(fh.read())
        name = "model-file"
    else:
        scenario = get_scenario(args.scenario, beta=args.beta, n=args.n)
        model = scenario.model if args.phase == "before" else scenario.adjusted()
        name = scenario.name
    util = UtilityKind(args.k)
    doc = {
        "scenario": name,
        "phase": args.phase,
        "exact": pmf_fairness_levels(model, util).as_dict(),
    }
    if args.samples > 0:
        doc["monte_carlo"] = _monte_carlo(model, args.samples, args.seed, args.k)
    return doc


def _cmd_audit(args) -> dict:
    with open(args.table) as fh:
        table = PredictionTable.from_csv(fh.read())
    doc = {"table": args.table,
           "levels": empirical_fairness(table, UtilityKind(args.k)).as_dict()}
    if args.correlations:
        corr = empirical_correlation(table)
        doc["correlations"] = {f"g{a}": corr[a].tolist() for a in (0, 1)}
    return doc


def _cmd_adjust(args) -> dict:
    with open(args.table) as fh:
        table = PredictionTable.from_csv(fh.read())
    report = fit_eo_policy(table, args.lender)
    adjusted = apply_policy(report.policy, table, args.lender)
    if args.policy_out:
        with open(args.policy_out, "w") as fh:
            fh.write(report.policy.to_json())
    if args.table_out:
        with open(args.table_out, "w") as fh:
            fh.write(adjusted.to_csv())
    return {
        "lender": args.lender,
        "policy": report.policy.to_json_dict(),
        "achieved_tpr": report.achieved_tpr,
        "expected_loss": report.expected_loss,
        "candidates_examined": report.candidates_examined,
        "degenerate_groups": list(report.degenerate_groups),
    }


def _cmd_experiment(args) -> dict:
    with open(args.config) as fh:
        cfg = ExperimentConfig.from_json_dict(json.load(fh))
    results = run_experiment(cfg, workers=args.workers)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(results_to_csv(results, cfg.n_lenders))
    summary = summarize(results, cfg)
    if args.summary_out:
        with open(args.summary_out, "w") as fh:
            fh.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return summary


def _cmd_verify(args) -> int:
    checks = run_suite(args.suite, seed=args.seed)
    failed = 0
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        failed += not check.passed
        sys.stdout.write(f"{status} {check.name}: {check.detail}\n")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecofair",
        description="Fairness of ecosystems of competing classifiers.",
    )
    parser.add_argument("--format", choices=("json", "csv"), default="json",
                        help="output format for reports (default json)")
    parser.add_argument("--seed", dest="global_seed", type=int, default=None,
                        help="default seed for subcommands that accept one")
    parser.add_argument("--tolerance", type=float, default=None,
                        help="override the feasibility slack for rho checks")
    sub = parser.add_subparsers(dest="command", required=True)

    analytic = sub.add_parser("analytic", help="closed-form levels and bounds")
    analytic.add_argument("which", choices=(
        "eoc-corr", "veoc-corr", "eoc-n", "eoc-overlap", "dpc-corr", "dpc-overlap"))
    analytic.add_argument("--beta1", type=float)
    analytic.add_argument("--beta2", type=float)
    analytic.add_argument("--eta1", type=float)
    analytic.add_argument("--eta2", type=float)
    analytic.add_argument("--rho0", type=float)
    analytic.add_argument("--rho1", type=float)
    analytic.add_argument("--k", type=float, default=1.0)
    analytic.add_argument("--betas", help="comma-separated rates for eoc-n")
    analytic.add_argument("--overlap-g0", help="gamma1,gamma2,gamma_both")
    analytic.add_argument("--overlap-g1", help="gamma1,gamma2,gamma_both")

    simulate = sub.add_parser("simulate", help="exact and Monte-Carlo scenario levels")
    simulate.add_argument("--scenario", choices=SCENARIOS)
    simulate.add_argument("--model", help="EcosystemModel JSON file")
    simulate.add_argument("--phase", choices=("before", "after"), default="before")
    simulate.add_argument("--beta", type=float, default=None)
    simulate.add_argument("--n", type=int, default=None)
    simulate.add_argument("--samples", type=int, default=0,
                          help="Monte-Carlo sample size (0 = exact only)")
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--k", type=float, default=1.0)

    audit = sub.add_parser("audit", help="empirical levels of a prediction table")
    audit.add_argument("--table", required=True)
    audit.add_argument("--k", type=float, default=1.0)
    audit.add_argument("--correlations", action="store_true")

    adjust = sub.add_parser("adjust", help="fit and apply a derived EO policy")
    adjust.add_argument("--table", required=True)
    adjust.add_argument("--lender", type=int, required=True)
    adjust.add_argument("--policy-out")
    adjust.add_argument("--table-out")

    experiment = sub.add_parser("experiment", help="run a replicated experiment")
    experiment.add_argument("--config", required=True)
    experiment.add_argument("--out", help="per-replicate results CSV")
    experiment.add_argument("--summary-out", help="summary JSON")
    experiment.add_argument("--workers", type=int, default=1)

    verify = sub.add_parser("verify", help="brute-force oracle suite")
    verify.add_argument("--suite", default="all",
                        choices=("all", "frechet", "worst-case", "lp-dominance"))
    verify.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and hasattr(args, "seed"):
        args.seed = args.global_seed if args.global_seed is not None else 0
    old_slack = levels_mod.FEASIBILITY_SLACK
    if args.tolerance is not None:
        levels_mod.FEASIBILITY_SLACK = args.tolerance
    try:
        if args.command == "verify":
            return _cmd_verify(args)
        handler = {
            "analytic": _cmd_analytic,
            "simulate": _cmd_simulate,
            "audit": _cmd_audit,
            "adjust": _cmd_adjust,
            "experiment": _cmd_experiment,
        }[args.command]
        _emit(handler(args), args.format)
        return 0
    except (EcofairError, ValueError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    finally:
        levels_mod.FEASIBILITY_SLACK = old_slack


if __name__ == "__main__":
    sys.exit(main())
