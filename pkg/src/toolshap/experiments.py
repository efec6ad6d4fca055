"""Evaluation protocols: consistency, faithfulness, injection and cross-domain."""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from toolshap.agents.cache import ResponseCache, cached_respond
from toolshap.analysis import EstimatorChoice, analyze
from toolshap.core import PromptCase, ShapleyReport, ToolCatalog, coalition_from_names
from toolshap.errors import ConfigError, UnknownExperiment, ZeroVector
from toolshap.report import dumps, write_atomic, write_report
from toolshap.similarity import SimilarityBackend

EXPERIMENTS = ("consistency", "faithfulness", "injection", "cross_domain")
DEFAULT_DISTRACTORS = ("AddAlarm", "AddReminder", "PlayMusic", "BookHotel")


def canonical_experiment(name: str) -> str:
    key = name.replace("-", "_")
    if key not in EXPERIMENTS:
        raise UnknownExperiment(
            f"unknown experiment {name!r}; expected one of consistency, faithfulness, injection, cross-domain"
        )
    return key


@dataclass(frozen=True)
class PromptSuite:
    name: str
    tools: tuple[str, ...]
    prompts: tuple[PromptCase, ...]
    distractors: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> PromptSuite:
        prompts = tuple(
            PromptCase(p["id"], p["prompt"], p.get("domain", "other"), p.get("expected_tool"))
            for p in d["prompts"]
        )
        return cls(d.get("name", ""), tuple(d.get("tools", [])), prompts, tuple(d.get("distractors", [])))

    @classmethod
    def load(cls, path: str | Path) -> PromptSuite:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def bundled(cls, experiment: str) -> PromptSuite:
        name = canonical_experiment(experiment)
        text = resources.files("toolshap.data").joinpath("suites", f"{name}.json").read_text("utf-8")
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    prompt_suite: tuple[PromptCase, ...]
    catalog: ToolCatalog
    runs: int = 3
    rho: float = 0.5
    estimator: EstimatorChoice = field(default_factory=EstimatorChoice)
    seeds: tuple[int, ...] = (0, 1, 2)
    agent_mode: str = "scripted"
    distractors: tuple[str, ...] = DEFAULT_DISTRACTORS
    concurrency: int = 1

    def __post_init__(self):
        object.__setattr__(self, "experiment", canonical_experiment(self.experiment))
        if len(self.seeds) != self.runs:
            raise ConfigError(f"need one seed per run: {self.runs} runs, {len(self.seeds)} seeds")
        if not self.prompt_suite:
            raise ConfigError("prompt suite is empty")
        if self.experiment == "consistency" and self.runs < 2:
            raise ConfigError("consistency needs at least 2 runs")
        for case in self.prompt_suite:
            if case.expected_tool is not None:
                self.catalog.index(case.expected_tool)
        if self.experiment == "injection":
            if not self.distractors:
                raise ConfigError("injection needs at least one distractor tool")
            for name in self.distractors:
                self.catalog.index(name)


@dataclass
class ExperimentMetrics:
    experiment: str
    top1_accuracy: float | None = None
    stability_cosines: list[float] = field(default_factory=list)
    mean_stability: float | None = None
    quality_drop_high: float | None = None
    quality_drop_low: float | None = None
    shap_gap: float | None = None
    shap_ratio: float | None = None
    expected_mean_phi: float | None = None
    distractor_mean_phi: float | None = None
    domain_tool_matrix: dict[str, dict[str, float]] | None = None
    per_prompt: list[dict] = field(default_factory=list)
    run_info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def shap_vector_cosine(phi_a: Sequence[float], phi_b: Sequence[float]) -> float:
    a = np.asarray(phi_a, dtype=float)
    b = np.asarray(phi_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroVector("cosine is undefined for an all-zero SHAP vector")
    return float(np.dot(a, b) / (na * nb))


def _top1(reports: dict[tuple[str, int], ShapleyReport], cases: dict[str, PromptCase]) -> float | None:
    judged = [(r.top_tool(), cases[pid].expected_tool) for (pid, _), r in reports.items()
              if cases[pid].expected_tool is not None]
    if not judged:
        return None
    return sum(top == exp for top, exp in judged) / len(judged)


def _argmin(report: ShapleyReport) -> str:
    return report.tools[min(range(len(report.phi)), key=lambda i: (report.phi[i], i))]


class Harness:
    """Runs one experiment against an agent, optionally writing reports under ``out_dir``."""

    def __init__(
        self,
        cfg: ExperimentConfig,
        agent_factory: Callable[[ToolCatalog], object],
        backend: SimilarityBackend | None = None,
        cache: ResponseCache | None = None,
        out_dir: str | Path | None = None,
    ):
        self.cfg = cfg
        self.agent = agent_factory(cfg.catalog)
        self.backend = backend or SimilarityBackend()
        self.cache = cache
        self.out_dir = Path(out_dir) / cfg.experiment if out_dir is not None else None
        self.cases = {c.id: c for c in cfg.prompt_suite}
        if len(self.cases) != len(cfg.prompt_suite):
            raise ConfigError("prompt ids must be unique")

    def reports(self) -> dict[tuple[str, int], ShapleyReport]:
        out = {}
        for case in self.cfg.prompt_suite:
            for k, seed in enumerate(self.cfg.seeds):
                report = analyze(
                    self.agent, case.prompt, self.backend, self.cfg.estimator,
                    self.cfg.rho, seed, self.cache, self.cfg.concurrency,
                )
                out[case.id, k] = report
                if self.out_dir is not None:
                    write_report(report, self.out_dir / case.id / f"run{k}.json")
        return out

    def run(self) -> ExperimentMetrics:
        method = getattr(self, f"_{self.cfg.experiment}")
        metrics = method(self.reports())
        metrics.run_info = {
            "agent_mode": self.cfg.agent_mode,
            "agent_id": self.agent.agent_id,
            "backend": self.backend.kind,
            "estimator": self.cfg.estimator.kind,
            "permutations": self.cfg.estimator.permutations,
            "rho": self.cfg.rho,
            "seeds": list(self.cfg.seeds),
            "tools": self.cfg.catalog.names,
            "catalog_fingerprint": self.cfg.catalog.fingerprint,
            "prompts": len(self.cfg.prompt_suite),
        }
        if self.out_dir is not None:
            write_atomic(self.out_dir / "metrics.json", dumps(metrics.to_dict()))
        return metrics

    def _consistency(self, reports) -> ExperimentMetrics:
        cosines, per_prompt = [], []
        for case in self.cfg.prompt_suite:
            vecs = [reports[case.id, k].phi for k in range(self.cfg.runs)]
            pairs = [shap_vector_cosine(a, b) for a, b in itertools.combinations(vecs, 2)]
            cosines.extend(pairs)
            per_prompt.append({
                "id": case.id,
                "expected_tool": case.expected_tool,
                "top_tools": [reports[case.id, k].top_tool() for k in range(self.cfg.runs)],
                "cosines": pairs,
            })
        return ExperimentMetrics(
            "consistency",
            top1_accuracy=_top1(reports, self.cases),
            stability_cosines=cosines,
            mean_stability=float(np.mean(cosines)),
            per_prompt=per_prompt,
        )

    def _faithfulness(self, reports) -> ExperimentMetrics:
        catalog = self.cfg.catalog
        high, low, per_prompt = [], [], []
        for (pid, k), report in reports.items():
            case = self.cases[pid]
            drops = {}
            for label, tool in (("high", report.top_tool()), ("low", _argmin(report))):
                keep = [t for t in catalog.names if t != tool]
                response = cached_respond(
                    self.cache, self.agent, case.prompt, coalition_from_names(keep, catalog)
                )
                drops[label] = (tool, 1.0 - self.backend(response.text, report.baseline_text))
            high.append(drops["high"][1])
            low.append(drops["low"][1])
            per_prompt.append({
                "id": pid, "run": k,
                "removed_high": drops["high"][0], "quality_drop_high": drops["high"][1],
                "removed_low": drops["low"][0], "quality_drop_low": drops["low"][1],
            })
        return ExperimentMetrics(
            "faithfulness",
            top1_accuracy=_top1(reports, self.cases),
            quality_drop_high=float(np.mean(high)),
            quality_drop_low=float(np.mean(low)),
            per_prompt=per_prompt,
        )

    def _injection(self, reports) -> ExperimentMetrics:
        distractors = self.cfg.distractors
        expected_phi, distractor_phi, per_prompt = [], [], []
        for (pid, k), report in reports.items():
            case = self.cases[pid]
            if case.expected_tool is None:
                continue
            e = report.phi_of(case.expected_tool)
            ds = [report.phi_of(d) for d in distractors]
            expected_phi.append(e)
            distractor_phi.extend(ds)
            per_prompt.append({
                "id": pid, "run": k, "expected_tool": case.expected_tool, "top_tool": report.top_tool(),
                "expected_phi": e, "distractor_phi": dict(zip(distractors, ds)),
                "gap": e - float(np.mean(ds)),
            })
        if not expected_phi:
            raise ConfigError("injection needs prompts with an expected_tool")
        e_mean, d_mean = float(np.mean(expected_phi)), float(np.mean(distractor_phi))
        return ExperimentMetrics(
            "injection",
            top1_accuracy=_top1(reports, self.cases),
            shap_gap=e_mean - d_mean,
            shap_ratio=e_mean / d_mean if d_mean > 0 else None,
            expected_mean_phi=e_mean,
            distractor_mean_phi=d_mean,
            per_prompt=per_prompt,
        )

    def _cross_domain(self, reports) -> ExperimentMetrics:
        names = self.cfg.catalog.names
        by_domain: dict[str, list[tuple[float, ...]]] = {}
        per_prompt = []
        for (pid, k), report in reports.items():
            case = self.cases[pid]
            by_domain.setdefault(case.domain_label, []).append(report.phi)
            per_prompt.append({"id": pid, "run": k, "domain": case.domain_label,
                               "expected_tool": case.expected_tool, "top_tool": report.top_tool()})
        matrix = {
            domain: dict(zip(names, (float(x) for x in np.mean(np.array(rows), axis=0))))
            for domain, rows in by_domain.items()
        }
        return ExperimentMetrics(
            "cross_domain",
            top1_accuracy=_top1(reports, self.cases),
            domain_tool_matrix=matrix,
            per_prompt=per_prompt,
        )


def run_experiment(cfg, agent_factory, backend=None, cache=None, out_dir=None) -> ExperimentMetrics:
    return Harness(cfg, agent_factory, backend, cache, out_dir).run()


def _check(cfg: ExperimentConfig, experiment: str) -> None:
    if cfg.experiment != experiment:
        raise ConfigError(f"config is for {cfg.experiment!r}, not {experiment!r}")


def run_consistency(cfg, agent_factory, backend=None, cache=None, out_dir=None) -> ExperimentMetrics:
    _check(cfg, "consistency")
    return run_experiment(cfg, agent_factory, backend, cache, out_dir)


def run_faithfulness(cfg, agent_factory, backend=None, cache=None, out_dir=None) -> ExperimentMetrics:
    _check(cfg, "faithfulness")
    return run_experiment(cfg, agent_factory, backend, cache, out_dir)


def run_injection(cfg, agent_factory, backend=None, cache=None, out_dir=None) -> ExperimentMetrics:
    _check(cfg, "injection")
    return run_experiment(cfg, agent_factory, backend, cache, out_dir)


def run_cross_domain(cfg, agent_factory, backend=None, cache=None, out_dir=None) -> ExperimentMetrics:
    _check(cfg, "cross_domain")
    return run_experiment(cfg, agent_factory, backend, cache, out_dir)
