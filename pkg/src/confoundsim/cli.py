"""Command-line front end: scenario runners and DAG identification checks.

Every command is a pure function of its flags: rerunning with identical
flags rewrites byte-identical artifacts (CSV/JSON, no timestamps).  Day
reports across scenarios share one fixed CSV column set, with fields that
do not apply left empty; comparison studies share a second fixed set.

Exit codes: 0 success (or admissible verdict), 1 negative domain verdict,
2 usage or validation error, 3 internal error.  The default output root
is ``--out``, else the ``CONFOUNDSIM_OUT`` environment variable, else
``./runs``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .causal import Dag, backdoor_paths, format_path, parse_dag, unblocked_backdoor_path
from .features import COVARIATE_FACTORS, CategoricalSpec
from .scenarios import (
    DayReport,
    ScenarioConfig,
    default_two_decision_search,
    scenario_ab_test,
    scenario_click_sale,
    scenario_feature_engineering,
    scenario_two_decision,
)

__all__ = ["RunManifest", "main"]

REPORT_COLUMNS = (
    "scenario",
    "regime",
    "arm",
    "day",
    "samples",
    "empirical_ctr",
    "binomial_se",
    "expected_ctr",
    "oracle_ctr",
    "regret",
    "features_used",
    "trained_on",
)

COMPARISON_COLUMNS = ("scenario", "variant", "true_value", "model_value", "detail")


class UsageError(ValueError):
    """Flag combination or value the command line cannot accept."""


@dataclass
class RunManifest:
    """Everything needed to reproduce a command's artifacts byte for byte."""

    scenario: str
    version: str
    seed: int
    config: dict
    artifacts: dict
    ground_truth_fingerprint: str | None = None

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "version": self.version,
            "seed": self.seed,
            "config": self.config,
            "artifacts": self.artifacts,
            "ground_truth_fingerprint": self.ground_truth_fingerprint,
        }


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _subset_text(subset) -> str:
    return "+".join(subset) if subset else "none"


def _trained_text(span) -> str:
    if span is None:
        return ""
    lo, hi = span
    return str(lo) if lo == hi else f"{lo}-{hi}"


def _write_csv(path: Path, columns, rows):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _report_row(scenario: str, regime: str, report: DayReport) -> dict:
    return {
        "scenario": scenario,
        "regime": regime,
        "arm": report.arm,
        "day": report.day,
        "samples": report.samples,
        "empirical_ctr": report.empirical_ctr,
        "binomial_se": report.binomial_se,
        "expected_ctr": report.expected_ctr,
        "oracle_ctr": report.oracle_ctr,
        "regret": report.regret,
        "features_used": "+".join(report.features_used),
        "trained_on": _trained_text(report.model_trained_on),
    }


def _parse_subset(text: str) -> tuple:
    cleaned = text.strip().lower()
    if cleaned in ("", "none"):
        return ()
    names = []
    for token in cleaned.split(","):
        token = token.strip()
        if token not in COVARIATE_FACTORS:
            raise UsageError(
                f"unknown covariate {token!r}; expected a comma-separated subset of "
                f"{', '.join(COVARIATE_FACTORS)} or 'none'"
            )
        if token not in names:
            names.append(token)
    return tuple(sorted(names, key=COVARIATE_FACTORS.index))


def _out_dir(args, name: str) -> Path:
    root = args.out or os.environ.get("CONFOUNDSIM_OUT") or "runs"
    path = Path(root) / name
    path.mkdir(parents=True, exist_ok=True)
    return path


def _scenario_config(args, n_decisions=None) -> ScenarioConfig:
    spec = CategoricalSpec(
        k1=args.k1, k2=args.k2, n_actions=args.actions, n_decisions=n_decisions
    )
    return ScenarioConfig(
        spec=spec,
        samples_per_day=args.samples_per_day,
        epsilon=args.epsilon,
        seed=args.seed,
        min_gap=args.min_gap,
        ab_start_day=getattr(args, "ab_start_day", 2),
        days=args.days,
    )


def _base_config_dict(cfg: ScenarioConfig) -> dict:
    return {
        "k1": cfg.spec.k1,
        "k2": cfg.spec.k2,
        "actions": cfg.spec.n_actions,
        "decisions": cfg.spec.n_decisions,
        "samples_per_day": cfg.samples_per_day,
        "epsilon": cfg.epsilon,
        "min_gap": cfg.min_gap,
        "days": cfg.days,
    }


def _maybe_dump_log(args, out: Path, log, artifacts: dict):
    if getattr(args, "dump_log", False):
        path = out / "log.ndjson"
        with open(path, "w", encoding="utf-8") as fh:
            log.to_ndjson(fh)
        artifacts["log"] = path.name


def cmd_feature_engineering(args) -> int:
    cfg = _scenario_config(args)
    result = scenario_feature_engineering(cfg)
    out = _out_dir(args, "feature_engineering")
    rows = [_report_row("feature_engineering", "", r) for r in result.reports]
    _write_csv(out / "reports.csv", REPORT_COLUMNS, rows)
    rate = {r.day: r.expected_ctr for r in result.reports}
    summary = {
        "scenario": "feature_engineering",
        "confounding_gap": result.gt.gap,
        "expected_ctr_by_day": {str(d): rate[d] for d in sorted(rate)},
        "dip_day3_vs_day1": (rate[1] - rate[3]) if 3 in rate and 1 in rate else None,
        "days": [r.to_dict() for r in result.reports],
    }
    _write_json(out / "summary.json", summary)
    artifacts = {"reports": "reports.csv", "summary": "summary.json"}
    _maybe_dump_log(args, out, result.log, artifacts)
    manifest = RunManifest(
        scenario="feature_engineering",
        version=__version__,
        seed=cfg.seed,
        config=_base_config_dict(cfg),
        artifacts=artifacts,
        ground_truth_fingerprint=result.gt.fingerprint(),
    )
    _write_json(out / "manifest.json", manifest.to_dict())
    for r in result.reports:
        print(
            f"day {r.day}: expected_ctr {r.expected_ctr:.6f} empirical {r.empirical_ctr:.6f}"
            f" features {'+'.join(r.features_used) or '-'}"
        )
    print(f"wrote {out}/reports.csv")
    return 0


def cmd_ab_test(args) -> int:
    cfg = _scenario_config(args)
    if args.both:
        regimes = [True, False]
    elif args.shared_log:
        regimes = [True]
    else:
        regimes = [False]
    out = _out_dir(args, "ab_test")
    rows = []
    summary_regimes = {}
    fingerprint = None
    logs = {}
    for shared in regimes:
        result = scenario_ab_test(cfg, shared_log=shared)
        regime = "shared" if shared else "separate"
        fingerprint = result.gt.fingerprint()
        logs[regime] = result.log
        for r in result.common_reports:
            rows.append(_report_row("ab_test", regime, r))
        for day_pair in zip(result.arm_reports["A"], result.arm_reports["B"]):
            for r in day_pair:
                rows.append(_report_row("ab_test", regime, r))
        summary_regimes[regime] = {
            "common_expected_ctr": [r.expected_ctr for r in result.common_reports],
            "arm_a_expected_ctr": [r.expected_ctr for r in result.arm_reports["A"]],
            "arm_b_expected_ctr": [r.expected_ctr for r in result.arm_reports["B"]],
        }
    _write_csv(out / "reports.csv", REPORT_COLUMNS, rows)
    summary = {
        "scenario": "ab_test",
        "ab_start_day": cfg.ab_start_day,
        "regimes": summary_regimes,
    }
    _write_json(out / "summary.json", summary)
    artifacts = {"reports": "reports.csv", "summary": "summary.json"}
    if args.dump_log and len(regimes) == 1:
        _maybe_dump_log(args, out, logs[next(iter(logs))], artifacts)
    config = _base_config_dict(cfg)
    config["ab_start_day"] = cfg.ab_start_day
    config["regimes"] = sorted(summary_regimes)
    manifest = RunManifest(
        scenario="ab_test",
        version=__version__,
        seed=cfg.seed,
        config=config,
        artifacts=artifacts,
        ground_truth_fingerprint=fingerprint,
    )
    _write_json(out / "manifest.json", manifest.to_dict())
    for regime, series in sorted(summary_regimes.items()):
        arm_a = " ".join(f"{v:.6f}" for v in series["arm_a_expected_ctr"])
        print(f"{regime} arm A expected_ctr by day: {arm_a}")
    print(f"wrote {out}/reports.csv")
    return 0


def _comparison_rows(scenario: str, entries) -> list:
    rows = []
    for e in entries:
        rows.append(
            {
                "scenario": scenario,
                "variant": e.variant,
                "true_value": e.value,
                "model_value": e.model_value,
                "detail": e.detail.replace(",", ";"),
            }
        )
    return rows


def cmd_click_sale(args) -> int:
    cfg = _scenario_config(args)
    x_prime = _parse_subset(args.x_prime)
    x_dprime = _parse_subset(args.x_dprime)
    result = scenario_click_sale(cfg, x_prime=x_prime, x_dprime=x_dprime)
    out = _out_dir(args, "click_sale")
    _write_csv(out / "reports.csv", REPORT_COLUMNS, [_report_row("click_sale", "", result.log_report)])
    _write_csv(out / "comparison.csv", COMPARISON_COLUMNS, _comparison_rows("click_sale", result.entries))
    summary = {
        "scenario": "click_sale",
        "x_prime": _subset_text(result.x_prime),
        "x_dprime": _subset_text(result.x_dprime),
        "values": {e.variant: e.value for e in result.entries},
    }
    _write_json(out / "summary.json", summary)
    artifacts = {"reports": "reports.csv", "comparison": "comparison.csv", "summary": "summary.json"}
    _maybe_dump_log(args, out, result.log, artifacts)
    config = _base_config_dict(cfg)
    config["x_prime"] = _subset_text(result.x_prime)
    config["x_dprime"] = _subset_text(result.x_dprime)
    manifest = RunManifest(
        scenario="click_sale",
        version=__version__,
        seed=cfg.seed,
        config=config,
        artifacts=artifacts,
        ground_truth_fingerprint=result.gt.fingerprint(),
    )
    _write_json(out / "manifest.json", manifest.to_dict())
    for e in result.entries:
        print(f"{e.variant}: post-click sale rate {e.value:.6f} ({e.detail})")
    print(f"wrote {out}/comparison.csv")
    return 0


def cmd_two_decision(args) -> int:
    cfg = _scenario_config(args, n_decisions=args.decisions)
    x_prime = _parse_subset(args.x_prime)
    x_dprime = _parse_subset(args.x_dprime)
    out = _out_dir(args, "two_decision")
    search = default_two_decision_search(
        cfg.seed,
        trace_path=str(out / "trace.csv") if args.trace else None,
    )
    result = scenario_two_decision(cfg, x_prime=x_prime, x_dprime=x_dprime, search=search)
    _write_csv(out / "reports.csv", REPORT_COLUMNS, [_report_row("two_decision", "", result.log_report)])
    _write_csv(out / "comparison.csv", COMPARISON_COLUMNS, _comparison_rows("two_decision", result.entries))
    summary = {
        "scenario": "two_decision",
        "x_prime": _subset_text(result.x_prime),
        "x_dprime": _subset_text(result.x_dprime),
        "true_values": {e.variant: e.value for e in result.entries},
        "model_values": {e.variant: e.model_value for e in result.entries},
        "final_action_logits": result.final_params.action_logits.tolist(),
        "final_decision_logits": result.final_params.decision_logits.tolist(),
    }
    _write_json(out / "summary.json", summary)
    artifacts = {"reports": "reports.csv", "comparison": "comparison.csv", "summary": "summary.json"}
    if args.trace:
        artifacts["trace"] = "trace.csv"
    _maybe_dump_log(args, out, result.log, artifacts)
    config = _base_config_dict(cfg)
    config["x_prime"] = _subset_text(result.x_prime)
    config["x_dprime"] = _subset_text(result.x_dprime)
    manifest = RunManifest(
        scenario="two_decision",
        version=__version__,
        seed=cfg.seed,
        config=config,
        artifacts=artifacts,
        ground_truth_fingerprint=result.gt.fingerprint(),
    )
    _write_json(out / "manifest.json", manifest.to_dict())
    for e in result.entries:
        print(f"{e.variant}: true {e.value:.6f} model {e.model_value:.6f}")
    print(f"wrote {out}/comparison.csv")
    return 0


def _load_graph(text_or_path: str) -> Dag:
    path = Path(text_or_path)
    if path.exists() and path.is_file():
        text = path.read_text(encoding="utf-8")
    else:
        text = text_or_path.replace(";", "\n")
        if "->" not in text:
            raise UsageError(
                f"{text_or_path!r} is neither an existing edge-list file nor an "
                "inline edge list ('a -> b; ...')"
            )
    return parse_dag(text)


def cmd_dag_check(args) -> int:
    g = _load_graph(args.graph)
    treatment, outcome = args.treatment, args.outcome
    zs = tuple(t.strip() for t in args.adjust.split(",") if t.strip()) if args.adjust else ()
    for node in (treatment, outcome, *zs):
        if node not in g.nodes:
            raise UsageError(f"node {node!r} not in graph (nodes: {', '.join(g.nodes)})")
    adjust_text = "{" + ", ".join(zs) + "}" if zs else "{}"
    bad = sorted(set(zs) & g.descendants(treatment))
    if bad:
        print(f"inadmissible: adjustment set {adjust_text} contains descendants of {treatment}: {', '.join(bad)}")
        return 1
    paths = backdoor_paths(g, treatment, outcome)
    open_path = unblocked_backdoor_path(g, treatment, outcome, zs)
    if open_path is not None:
        print(f"inadmissible: adjusting on {adjust_text} leaves a backdoor path open")
        print(f"  open path: {format_path(g, open_path)}")
        return 1
    print(f"admissible: {adjust_text} blocks every backdoor path from {treatment} to {outcome}")
    if paths:
        for p in paths:
            print(f"  blocked path: {format_path(g, p)}")
    else:
        print("  no backdoor paths exist")
    return 0


def _add_common_flags(sub: argparse.ArgumentParser, days_default: int = 6):
    sub.add_argument("--seed", type=int, default=0, help="run seed (default 0)")
    sub.add_argument("--k1", type=int, default=5, help="cardinality of x1 (default 5)")
    sub.add_argument("--k2", type=int, default=5, help="cardinality of x2 (default 5)")
    sub.add_argument("--actions", type=int, default=10, help="number of actions (default 10)")
    sub.add_argument(
        "--samples-per-day", type=int, default=400_000, help="interactions per day (default 400000)"
    )
    sub.add_argument("--epsilon", type=float, default=0.05, help="exploration rate (default 0.05)")
    sub.add_argument(
        "--min-gap", type=float, default=0.02, help="required confounding gap (default 0.02)"
    )
    sub.add_argument("--days", type=int, default=days_default, help=f"days to simulate (default {days_default})")
    sub.add_argument("--out", default=None, help="output root (default $CONFOUNDSIM_OUT or ./runs)")
    sub.add_argument("--dump-log", action="store_true", help="also write the interaction log as NDJSON")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confoundsim",
        description="Deterministic simulator of confounding in logged-feedback recommender loops.",
    )
    parser.add_argument("--version", action="version", version=f"confoundsim {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    fe = subs.add_parser(
        "feature-engineering",
        help="daily retrain loop where one x2-aware day confounds the next covariate-blind refit",
    )
    _add_common_flags(fe)
    fe.set_defaults(func=cmd_feature_engineering)

    ab = subs.add_parser("ab-test", help="A/B test with shared or separate training logs")
    _add_common_flags(ab)
    ab.add_argument("--ab-start-day", type=int, default=2, help="first 50/50 split day (default 2)")
    group = ab.add_mutually_exclusive_group()
    group.add_argument("--shared-log", action="store_true", help="both arms train on the union log")
    group.add_argument(
        "--separate-logs", action="store_true", help="each arm trains on its own log (default)"
    )
    group.add_argument("--both", action="store_true", help="run both regimes")
    ab.set_defaults(func=cmd_ab_test)

    ck = subs.add_parser("click-sale", help="modularised click/sale sub-models with covariate views")
    _add_common_flags(ck)
    ck.add_argument("--x-prime", default="x1", help="sale model covariates (e.g. x1 or x1,x2 or none)")
    ck.add_argument("--x-dprime", default="x2", help="click model covariates")
    ck.set_defaults(func=cmd_click_sale)

    td = subs.add_parser("two-decision", help="joint vs independent vs learned factored policies")
    _add_common_flags(td)
    td.add_argument("--decisions", type=int, default=2, help="cardinality of the second decision (default 2)")
    td.add_argument("--x-prime", default="x1", help="action head covariates")
    td.add_argument("--x-dprime", default="x2", help="decision head covariates")
    td.add_argument("--trace", action="store_true", help="write the optimisation trace CSV")
    td.set_defaults(func=cmd_two_decision)

    dag = subs.add_parser("dag-check", help="backdoor admissibility verdict for an adjustment set")
    dag.add_argument("graph", help="edge-list file, or inline edges like 'x1 -> a; x1 -> c'")
    dag.add_argument("--treatment", required=True)
    dag.add_argument("--outcome", required=True)
    dag.add_argument("--adjust", default="", help="comma-separated adjustment set (default empty)")
    dag.set_defaults(func=cmd_dag_check)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort boundary for exit code 3
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
