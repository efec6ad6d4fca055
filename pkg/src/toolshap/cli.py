"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 agent or backend unavailable.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from toolshap.analysis import analyze
from toolshap.config import RunConfig, load_config
from toolshap.core import ShapleyReport
from toolshap.errors import ConfigError, ServiceError, ToolshapError
from toolshap.experiments import (
    ExperimentConfig,
    ExperimentMetrics,
    PromptSuite,
    canonical_experiment,
    run_experiment,
)
from toolshap.report import read_report, render_table, report_csv, write_atomic, write_report

log = logging.getLogger("toolshap")


def cmd_analyze(cfg: RunConfig) -> ShapleyReport:
    if not cfg.prompt:
        raise ConfigError("analyze needs a prompt (config 'prompt' or --prompt)")
    catalog = cfg.load_catalog()
    agent = cfg.make_agent(catalog)
    report = analyze(
        agent, cfg.prompt, cfg.make_backend(), cfg.estimator, cfg.rho, cfg.seed,
        cfg.make_cache(), cfg.concurrency_limit,
    )
    write_report(report, cfg.output_dir / "report.json")
    write_atomic(cfg.output_dir / "report.csv", report_csv(report))
    print(render_table(report))
    print(f"\nreport written to {cfg.output_dir / 'report.json'}")
    return report


def experiment_config(name: str, cfg: RunConfig) -> ExperimentConfig:
    name = canonical_experiment(name)
    suite = PromptSuite.load(cfg.prompt_suite_path) if cfg.prompt_suite_path else PromptSuite.bundled(name)
    catalog = cfg.load_catalog()
    if suite.tools:
        catalog = catalog.subset(suite.tools)
    kw = {"distractors": suite.distractors} if suite.distractors else {}
    return ExperimentConfig(
        experiment=name,
        prompt_suite=suite.prompts,
        catalog=catalog,
        runs=cfg.runs,
        rho=cfg.rho,
        estimator=cfg.estimator,
        seeds=cfg.run_seeds(),
        agent_mode=cfg.agent_mode,
        concurrency=cfg.concurrency_limit,
        **kw,
    )


def cmd_experiment(name: str, cfg: RunConfig) -> ExperimentMetrics:
    ecfg = experiment_config(name, cfg)
    metrics = run_experiment(ecfg, cfg.make_agent, cfg.make_backend(), cfg.make_cache(), cfg.output_dir)
    summary = {k: v for k, v in metrics.to_dict().items() if k not in ("per_prompt", "run_info", "stability_cosines")}
    print(json.dumps(summary, indent=2))
    print(f"\nmetrics written to {cfg.output_dir / ecfg.experiment / 'metrics.json'}")
    return metrics


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toolshap", description="Shapley attribution of agent tools.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="attribute one prompt's response to the catalog tools")
    a.add_argument("--config", required=True)
    a.add_argument("--prompt")
    a.add_argument("--rho", type=float)
    a.add_argument("--seed", type=int)
    a.add_argument("--estimator", choices=["exact", "permutation", "subset"])
    a.add_argument("--backend", choices=["tf", "embedding"])
    a.add_argument("--out")

    e = sub.add_parser("experiment", help="run an evaluation protocol")
    e.add_argument("name", help="consistency | faithfulness | injection | cross-domain")
    e.add_argument("--config", required=True)
    e.add_argument("--out")

    r = sub.add_parser("report", help="re-render a saved report")
    r.add_argument("path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            try:
                print(render_table(read_report(args.path)))
            except (OSError, ValueError, KeyError) as exc:
                raise ConfigError(f"cannot read report {args.path}: {exc}") from exc
            return 0
        cfg = load_config(args.config)
        out = Path(args.out) if args.out else None
        if args.command == "analyze":
            cfg = cfg.with_overrides(
                prompt=args.prompt, rho=args.rho, seed=args.seed, estimator=args.estimator,
                backend_kind=args.backend, output_dir=out,
            )
            cmd_analyze(cfg)
        else:
            cmd_experiment(args.name, cfg.with_overrides(output_dir=out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ServiceError as exc:
        print(f"unavailable: {exc}", file=sys.stderr)
        return 2
    except ToolshapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
