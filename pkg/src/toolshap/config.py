"""Run configuration: a single JSON file, relative paths resolved against it.

Secrets are never read from the file; live and embedding backends name the
environment variable that holds the key (``api_key_env``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from toolshap.agents.cache import ResponseCache
from toolshap.agents.live import LiveAgent, LiveAgentConfig
from toolshap.agents.scripted import AgentScript, ScriptedAgent
from toolshap.analysis import EstimatorChoice
from toolshap.core import ToolCatalog
from toolshap.errors import ConfigError, InvalidRho
from toolshap.similarity import EmbeddingConfig, SimilarityBackend

BACKEND_ALIASES = {"tf": "tf_cosine", "embedding": "embedding_cosine"}


class MissingPath(ConfigError):
    def __init__(self, what: str, path: Path):
        super().__init__(f"{what} not found: {path}")
        self.what = what
        self.path = path


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("toolshap.data").joinpath(name)))


@dataclass(frozen=True)
class RunConfig:
    catalog_path: Path
    prompt: str | None = None
    prompt_suite_path: Path | None = None
    agent_mode: str = "scripted"
    script_path: Path | None = None
    live: LiveAgentConfig | None = None
    backend_kind: str = "tf_cosine"
    embedding: EmbeddingConfig | None = None
    estimator: EstimatorChoice = field(default_factory=EstimatorChoice)
    rho: float = 0.5
    seed: int = 0
    runs: int = 3
    seeds: tuple[int, ...] | None = None
    output_dir: Path = Path("toolshap-out")
    concurrency_limit: int = 4
    response_cache_path: Path | None = None

    def __post_init__(self):
        if not (isinstance(self.rho, (int, float)) and not isinstance(self.rho, bool) and 0 < self.rho <= 1):
            raise InvalidRho(self.rho)
        if self.agent_mode not in ("scripted", "live"):
            raise ConfigError(f"agent mode must be 'scripted' or 'live', got {self.agent_mode!r}")
        if self.agent_mode == "live" and self.live is None:
            raise ConfigError("live agent mode needs base_url and model under 'agent'")
        if self.backend_kind not in ("tf_cosine", "embedding_cosine"):
            raise ConfigError(f"unknown backend {self.backend_kind!r}")
        if self.backend_kind == "embedding_cosine" and self.embedding is None:
            raise ConfigError("embedding backend needs base_url and model under 'backend'")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.concurrency_limit < 1:
            raise ConfigError("concurrency_limit must be >= 1")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.seeds is not None and len(self.seeds) != self.runs:
            raise ConfigError(f"need one seed per run: {self.runs} runs, {len(self.seeds)} seeds")
        for what, p in (
            ("catalog", self.catalog_path),
            ("prompt suite", self.prompt_suite_path),
            ("agent script", self.script_path),
        ):
            if p is not None and not p.exists():
                raise MissingPath(what, p)

    def with_overrides(self, **kw) -> RunConfig:
        kw = {k: v for k, v in kw.items() if v is not None}
        if "backend_kind" in kw:
            kw["backend_kind"] = BACKEND_ALIASES.get(kw["backend_kind"], kw["backend_kind"])
        if "estimator" in kw and isinstance(kw["estimator"], str):
            kw["estimator"] = EstimatorChoice(kw["estimator"], self.estimator.permutations)
        return replace(self, **kw)

    def run_seeds(self) -> tuple[int, ...]:
        return self.seeds if self.seeds is not None else tuple(self.seed + k for k in range(self.runs))

    def load_catalog(self) -> ToolCatalog:
        return ToolCatalog.load(self.catalog_path)

    def make_agent(self, catalog: ToolCatalog):
        if self.agent_mode == "live":
            return LiveAgent(catalog, self.live, self.concurrency_limit)
        return ScriptedAgent(catalog, AgentScript.load(self.script_path or bundled_path("script.json")))

    def make_backend(self) -> SimilarityBackend:
        return SimilarityBackend(self.backend_kind, self.embedding)

    def make_cache(self) -> ResponseCache:
        return ResponseCache(self.response_cache_path)


def _path(base: Path, value) -> Path | None:
    if value is None:
        return None
    p = Path(value).expanduser()
    return p if p.is_absolute() else base / p


def _estimator(value) -> EstimatorChoice:
    if value is None:
        return EstimatorChoice()
    if isinstance(value, str):
        return EstimatorChoice(value)
    return EstimatorChoice(value.get("kind", "subset_mc"), int(value.get("permutations", 200)))


def config_from_dict(d: dict, base: Path = Path(".")) -> RunConfig:
    try:
        agent = d.get("agent", {}) or {}
        mode = agent.get("mode", "scripted")
        live = None
        if mode == "live" and "base_url" in agent and "model" in agent:
            live = LiveAgentConfig(
                base_url=agent["base_url"],
                model=agent["model"],
                api_key_env=agent.get("api_key_env", "OPENAI_API_KEY"),
                max_turns=int(agent.get("max_turns", 4)),
                request_timeout=float(agent.get("request_timeout", 60)),
                max_retries=int(agent.get("max_retries", 2)),
                temperature=float(agent.get("temperature", 0.0)),
                system_prompt=agent.get("system_prompt"),
            )
        backend = d.get("backend", {}) or {}
        if isinstance(backend, str):
            backend = {"kind": backend}
        kind = BACKEND_ALIASES.get(backend.get("kind", "tf_cosine"), backend.get("kind", "tf_cosine"))
        embedding = None
        if "base_url" in backend and "model" in backend:
            embedding = EmbeddingConfig(
                base_url=backend["base_url"],
                model=backend["model"],
                api_key_env=backend.get("api_key_env", "OPENAI_API_KEY"),
                cache_path=str(_path(base, backend["cache_path"])) if backend.get("cache_path") else None,
                request_timeout=float(backend.get("request_timeout", 30)),
                max_retries=int(backend.get("max_retries", 2)),
            )
        seeds = d.get("seeds")
        return RunConfig(
            catalog_path=_path(base, d.get("catalog")) or bundled_path("catalog.json"),
            prompt=d.get("prompt"),
            prompt_suite_path=_path(base, d.get("prompt_suite")),
            agent_mode=mode,
            script_path=_path(base, agent.get("script")),
            live=live,
            backend_kind=kind,
            embedding=embedding,
            estimator=_estimator(d.get("estimator")),
            rho=d.get("rho", 0.5),
            seed=int(d.get("seed", 0)),
            runs=int(d.get("runs", len(seeds) if seeds else 3)),
            seeds=tuple(int(s) for s in seeds) if seeds else None,
            output_dir=_path(base, d.get("output_dir", "toolshap-out")),
            concurrency_limit=int(d.get("concurrency_limit", 4)),
            response_cache_path=_path(base, d.get("response_cache")),
        )
    except (TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise MissingPath("config file", path)
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(data, path.resolve().parent)
