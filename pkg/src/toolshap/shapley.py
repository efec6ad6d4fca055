"""Coalition plans and Shapley estimators.

Coalitions here are plain integer bitmasks over ``n`` players; binding to a
concrete catalog happens in :class:`Evaluator`.
"""

from __future__ import annotations

import itertools
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from toolshap.agents.cache import ResponseCache, cached_respond
from toolshap.core import MAX_TOOLS, AgentResponse, CoalitionEvaluation, member_names
from toolshap.errors import EvaluationFailed, IncompleteTable, InvalidRho, ServiceError
from toolshap.similarity import SimilarityBackend, coalition_value


def full_mask(n: int) -> int:
    return (1 << n) - 1


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def leave_one_out_masks(n: int) -> list[int]:
    full = full_mask(n)
    return [full & ~(1 << i) for i in range(n)]


@dataclass(frozen=True)
class CoalitionPlan:
    n: int
    rho: float
    seed: int
    leave_one_out: tuple[int, ...]
    sampled: tuple[int, ...]

    @property
    def baseline(self) -> int:
        return full_mask(self.n)

    @property
    def masks(self) -> tuple[int, ...]:
        """Every coalition the plan evaluates, baseline first."""
        return (self.baseline, *self.leave_one_out, *self.sampled)

    def __len__(self) -> int:
        return 1 + len(self.leave_one_out) + len(self.sampled)


def sample_count(n: int, rho: float) -> int:
    return math.floor(rho * (2**n - n - 1))


def build_plan(n: int, rho: float, seed: int) -> CoalitionPlan:
    """Leave-one-out coalitions plus ``floor(rho * (2^n - n - 1))`` distinct random ones.

    The random coalitions are drawn uniformly without replacement from every
    subset except the full set and the leave-one-out sets; the empty set is
    eligible.
    """
    if not 1 <= n <= MAX_TOOLS:
        raise ValueError(f"n must be in [1, {MAX_TOOLS}], got {n}")
    if not (isinstance(rho, (int, float)) and 0 < rho <= 1):
        raise InvalidRho(rho)
    loo = leave_one_out_masks(n)
    excluded = sorted([*loo, full_mask(n)])
    pool_size = 2**n - len(excluded)
    m = min(sample_count(n, rho), pool_size)
    rng = random.Random(seed)
    sampled = []
    for k in rng.sample(range(pool_size), m):
        # k-th pool element = k-th integer skipping the excluded masks
        for e in excluded:
            if k >= e:
                k += 1
        sampled.append(k)
    return CoalitionPlan(n, float(rho), seed, tuple(loo), tuple(sampled))


@dataclass
class ValueTable:
    n: int
    values: dict[int, float] = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return len(self.values) == 2**self.n

    def __getitem__(self, mask: int) -> float:
        return self.values[mask]

    def __setitem__(self, mask: int, value: float) -> None:
        if mask < 0 or mask >> self.n:
            raise ValueError(f"mask {mask:#x} out of range for n={self.n}")
        self.values[mask] = float(value)

    def __contains__(self, mask: int) -> bool:
        return mask in self.values

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def from_function(cls, n: int, fn: Callable[[int], float]) -> ValueTable:
        return cls(n, {m: float(fn(m)) for m in range(2**n)})

    @classmethod
    def from_array(cls, values: Sequence[float]) -> ValueTable:
        n = int(math.log2(len(values)))
        if 2**n != len(values):
            raise ValueError("array length must be a power of two")
        return cls(n, {m: float(v) for m, v in enumerate(values)})

    def as_array(self) -> np.ndarray:
        if not self.complete:
            raise IncompleteTable(f"table has {len(self.values)} of {2 ** self.n} entries")
        return np.array([self.values[m] for m in range(2**self.n)], dtype=float)


class Evaluator:
    """Memoized v(S) for one prompt: agent responses scored against the baseline.

    Every first evaluation of a coalition is appended to ``log`` in request
    order, so the log is reproducible whenever requests are.
    """

    def __init__(
        self,
        agent,
        prompt: str,
        backend: SimilarityBackend,
        cache: ResponseCache | None = None,
        concurrency: int = 1,
    ):
        self.agent = agent
        self.catalog = agent.catalog
        self.n = agent.catalog.n
        self.prompt = prompt
        self.backend = backend
        self.cache = cache
        self.concurrency = max(1, concurrency)
        self.table = ValueTable(self.n)
        self.log: list[CoalitionEvaluation] = []
        self._loo = set(leave_one_out_masks(self.n))
        full = self.catalog.full()
        self.baseline = self._respond(full.mask)
        self.table[full.mask] = 1.0
        self.log.append(self._record(full.mask, self.baseline, 1.0))

    def _respond(self, mask: int) -> AgentResponse:
        coalition = self.catalog.coalition(mask)
        try:
            return cached_respond(self.cache, self.agent, self.prompt, coalition)
        except ServiceError as exc:
            raise EvaluationFailed(member_names(coalition, self.catalog), exc) from exc

    def _record(self, mask: int, response: AgentResponse, value: float) -> CoalitionEvaluation:
        if mask == full_mask(self.n):
            phase = "baseline"
        elif mask in self._loo:
            phase = "leave_one_out"
        else:
            phase = "sampled"
        coalition = self.catalog.coalition(mask)
        return CoalitionEvaluation(
            coalition, tuple(member_names(coalition, self.catalog)), response, value, phase
        )

    def _score(self, response: AgentResponse) -> float:
        try:
            return coalition_value(response, self.baseline, self.backend)
        except ServiceError as exc:
            raise EvaluationFailed([], exc) from exc

    def _commit(self, mask: int, response: AgentResponse) -> float:
        value = self._score(response)
        self.table[mask] = value
        self.log.append(self._record(mask, response, value))
        return value

    def value(self, mask: int) -> float:
        if mask not in self.table:
            self._commit(mask, self._respond(mask))
        return self.table[mask]

    __call__ = value

    def evaluate(self, masks: Iterable[int]) -> ValueTable:
        """Evaluate ``masks``; responses may be fetched concurrently but commit in order."""
        todo = list(dict.fromkeys(m for m in masks if m not in self.table))
        if self.concurrency > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.concurrency) as pool:
                responses = list(pool.map(self._respond, todo))
        else:
            responses = [self._respond(m) for m in todo]
        for mask, response in zip(todo, responses):
            self._commit(mask, response)
        return self.table


def evaluate_plan(
    plan: CoalitionPlan,
    agent,
    prompt: str,
    backend: SimilarityBackend,
    cache: ResponseCache | None = None,
    concurrency: int = 1,
) -> tuple[ValueTable, list[CoalitionEvaluation]]:
    if plan.n != agent.catalog.n:
        raise ValueError(f"plan is for {plan.n} tools, agent catalog has {agent.catalog.n}")
    ev = Evaluator(agent, prompt, backend, cache, concurrency)
    ev.evaluate(plan.masks)
    return ev.table, ev.log


def shapley_weights(n: int) -> np.ndarray:
    """``w[s] = s! (n-s-1)! / n!`` for s = 0..n-1, by multiplicative recurrence."""
    w = np.empty(n)
    w[0] = 1.0 / n
    for s in range(n - 1):
        w[s + 1] = w[s] * (s + 1) / (n - s - 1)
    return w


def exact_shapley(table: ValueTable) -> np.ndarray:
    n = table.n
    v = table.as_array()
    masks = np.arange(2**n)
    sizes = np.array([popcount(m) for m in range(2**n)])
    w = shapley_weights(n)
    phi = np.zeros(n)
    for i in range(n):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        phi[i] = np.sum(w[sizes[without]] * (v[without | bit] - v[without]))
    return phi


def permutation_mc_shapley(
    value_oracle: Callable[[int], float],
    n: int,
    permutations: int = 200,
    seed: int = 0,
    exhaustive: bool = True,
) -> np.ndarray:
    """Average marginal contributions over random player orderings.

    With ``exhaustive`` set and ``n! <= permutations`` every ordering is walked
    once instead, which reproduces the exact value.
    """
    if permutations < 1:
        raise ValueError("permutations must be >= 1")
    if exhaustive and math.factorial(n) <= permutations:
        orders: Iterable[Sequence[int]] = itertools.permutations(range(n))
        count = math.factorial(n)
    else:
        rng = np.random.default_rng(seed)
        orders = (rng.permutation(n) for _ in range(permutations))
        count = permutations
    total = np.zeros(n)
    for order in orders:
        prefix = 0
        prev = value_oracle(prefix)
        for i in order:
            prefix |= 1 << int(i)
            cur = value_oracle(prefix)
            total[i] += cur - prev
            prev = cur
    return total / count


def subset_mc_shapley(table: ValueTable) -> np.ndarray:
    """Mean value of evaluated coalitions containing each tool minus the mean of those without."""
    masks = np.array(sorted(table.values), dtype=np.int64)
    vals = np.array([table.values[m] for m in masks.tolist()])
    phi = np.zeros(table.n)
    for i in range(table.n):
        has = (masks >> i & 1).astype(bool)
        if not has.any() or has.all():
            raise IncompleteTable(f"tool {i} needs evaluated coalitions both with and without it")
        phi[i] = vals[has].mean() - vals[~has].mean()
    return phi


def normalize_shares(phi: Sequence[float]) -> np.ndarray:
    pos = np.maximum(np.asarray(phi, dtype=float), 0.0)
    total = pos.sum()
    if total <= 0:
        return np.zeros_like(pos)
    return pos / total
