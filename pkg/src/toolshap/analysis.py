"""End-to-end attribution for one prompt: baseline, coalitions, estimator, report."""

from __future__ import annotations

from dataclasses import dataclass

from toolshap.agents.cache import ResponseCache
from toolshap.core import ShapleyReport
from toolshap.errors import ConfigError
from toolshap.shapley import (
    Evaluator,
    build_plan,
    exact_shapley,
    normalize_shares,
    permutation_mc_shapley,
    subset_mc_shapley,
)
from toolshap.similarity import SimilarityBackend

ESTIMATORS = ("exact", "permutation_mc", "subset_mc")
# CLI spellings
ESTIMATOR_ALIASES = {"exact": "exact", "permutation": "permutation_mc", "subset": "subset_mc"}


@dataclass(frozen=True)
class EstimatorChoice:
    kind: str = "subset_mc"
    permutations: int = 200

    def __post_init__(self):
        kind = ESTIMATOR_ALIASES.get(self.kind, self.kind)
        if kind not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.kind!r}; expected one of {ESTIMATORS}")
        object.__setattr__(self, "kind", kind)
        if self.permutations < 1:
            raise ConfigError("permutations must be >= 1")


def analyze(
    agent,
    prompt: str,
    backend: SimilarityBackend | None = None,
    estimator: EstimatorChoice | None = None,
    rho: float = 0.5,
    seed: int = 0,
    cache: ResponseCache | None = None,
    concurrency: int = 1,
) -> ShapleyReport:
    """Attribute ``agent``'s answer to ``prompt`` across its catalog.

    ``exact`` evaluates all 2^n coalitions (``rho`` is recorded as 1.0);
    ``permutation_mc`` queries coalitions on demand; ``subset_mc`` evaluates
    the leave-one-out plus random-subset plan.
    """
    backend = backend or SimilarityBackend()
    estimator = estimator or EstimatorChoice()
    n = agent.catalog.n
    plan = build_plan(n, rho, seed)
    ev = Evaluator(agent, prompt, backend, cache, concurrency)

    if estimator.kind == "exact":
        rho = 1.0
        ev.evaluate(build_plan(n, 1.0, seed).masks)
        phi = exact_shapley(ev.table)
    elif estimator.kind == "permutation_mc":
        phi = permutation_mc_shapley(ev.value, n, estimator.permutations, seed)
    else:
        ev.evaluate(plan.masks)
        phi = subset_mc_shapley(ev.table)

    return ShapleyReport(
        tools=tuple(agent.catalog.names),
        phi=tuple(float(x) for x in phi),
        shares=tuple(float(x) for x in normalize_shares(phi)),
        estimator=estimator.kind,
        seed=seed,
        sampling_ratio=float(rho),
        evaluations=tuple(ev.log),
        baseline_text=ev.baseline.text,
        prompt=prompt,
        catalog_fingerprint=agent.catalog.fingerprint,
        backend=backend.kind,
        agent_id=agent.agent_id,
        permutations=estimator.permutations if estimator.kind == "permutation_mc" else None,
    )
