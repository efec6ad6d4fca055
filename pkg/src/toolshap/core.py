"""Domain types: tools, catalogs, coalitions, responses and reports."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

from toolshap.errors import (
    CatalogError,
    CatalogTooLarge,
    DuplicateName,
    EmptyCatalog,
    FingerprintMismatch,
    UnknownTool,
)

MAX_TOOLS = 30

Phase = Literal["baseline", "leave_one_out", "sampled"]
Source = Literal["scripted", "live", "cache"]
Estimator = Literal["exact", "permutation_mc", "subset_mc"]
DOMAINS = ("math", "finance", "knowledge", "other")


@dataclass(frozen=True)
class Parameter:
    name: str
    type: str = "string"
    required: bool = True
    description: str = ""


@dataclass(frozen=True)
class Tool:
    name: str
    description: str
    parameters: tuple[Parameter, ...] = ()
    executor_id: str = ""

    def __post_init__(self):
        if not self.name:
            raise CatalogError("tool name must be non-empty")
        seen = set()
        for p in self.parameters:
            if p.name in seen:
                raise CatalogError(f"tool {self.name!r}: duplicate parameter {p.name!r}")
            seen.add(p.name)

    def json_schema(self) -> dict:
        """Parameter block in JSON-schema form, as used for function declarations."""
        return {
            "type": "object",
            "properties": {
                p.name: {"type": p.type, "description": p.description} for p in self.parameters
            },
            "required": [p.name for p in self.parameters if p.required],
        }

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "parameters": [
                {"name": p.name, "type": p.type, "required": p.required, "description": p.description}
                for p in self.parameters
            ],
            "executor_id": self.executor_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Tool:
        params = tuple(
            Parameter(
                name=p["name"],
                type=p.get("type", "string"),
                required=bool(p.get("required", True)),
                description=p.get("description", ""),
            )
            for p in d.get("parameters", [])
        )
        return cls(
            name=d["name"],
            description=d.get("description", ""),
            parameters=params,
            executor_id=d.get("executor_id", ""),
        )


@dataclass(frozen=True)
class Coalition:
    """A subset of a catalog encoded as a bitmask over catalog indices."""

    mask: int
    catalog_fingerprint: str

    def __contains__(self, index: int) -> bool:
        return bool(self.mask >> index & 1)

    @property
    def size(self) -> int:
        return bin(self.mask).count("1")


class ToolCatalog:
    """Ordered, immutable tool collection. Order is fixed at construction."""

    def __init__(self, tools: Iterable[Tool]):
        tools = tuple(tools)
        if not tools:
            raise EmptyCatalog("catalog must contain at least one tool")
        if len(tools) > MAX_TOOLS:
            raise CatalogTooLarge(f"catalog has {len(tools)} tools; at most {MAX_TOOLS} are supported")
        index = {}
        for i, t in enumerate(tools):
            if t.name in index:
                raise DuplicateName(t.name)
            index[t.name] = i
        self._tools = tools
        self._index = index
        payload = json.dumps([t.to_dict() for t in tools], sort_keys=True, separators=(",", ":"))
        self._fingerprint = hashlib.sha256(payload.encode()).hexdigest()[:16]

    @classmethod
    def load(cls, path: str | Path) -> ToolCatalog:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if isinstance(data, dict):
            data = data.get("tools", [])
        return cls(Tool.from_dict(d) for d in data)

    @property
    def tools(self) -> tuple[Tool, ...]:
        return self._tools

    @property
    def n(self) -> int:
        return len(self._tools)

    @property
    def names(self) -> list[str]:
        return [t.name for t in self._tools]

    @property
    def fingerprint(self) -> str:
        return self._fingerprint

    def __len__(self) -> int:
        return len(self._tools)

    def __iter__(self):
        return iter(self._tools)

    def __getitem__(self, key: int | str) -> Tool:
        if isinstance(key, str):
            return self._tools[self.index(key)]
        return self._tools[key]

    def __eq__(self, other) -> bool:
        return isinstance(other, ToolCatalog) and other._fingerprint == self._fingerprint

    def __hash__(self) -> int:
        return hash(self._fingerprint)

    def __repr__(self) -> str:
        return f"ToolCatalog({self.names!r})"

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownTool(name) from None

    def subset(self, names: Sequence[str]) -> ToolCatalog:
        """A new catalog holding only ``names``, in the given order."""
        return ToolCatalog(self[name] for name in names)

    def coalition(self, mask: int) -> Coalition:
        if mask < 0 or mask >> self.n:
            raise ValueError(f"mask {mask:#x} uses bits beyond the {self.n} catalog tools")
        return Coalition(mask, self._fingerprint)

    def full(self) -> Coalition:
        return Coalition((1 << self.n) - 1, self._fingerprint)

    def empty(self) -> Coalition:
        return Coalition(0, self._fingerprint)

    def check(self, c: Coalition) -> None:
        if c.catalog_fingerprint != self._fingerprint:
            raise FingerprintMismatch(
                f"coalition bound to catalog {c.catalog_fingerprint}, not {self._fingerprint}"
            )

    def tools_in(self, c: Coalition) -> list[Tool]:
        self.check(c)
        return [t for i, t in enumerate(self._tools) if c.mask >> i & 1]


def coalition_from_names(names: Sequence[str], catalog: ToolCatalog) -> Coalition:
    mask = 0
    for name in names:
        bit = 1 << catalog.index(name)
        if mask & bit:
            raise DuplicateName(name)
        mask |= bit
    return Coalition(mask, catalog.fingerprint)


def member_names(c: Coalition, catalog: ToolCatalog) -> list[str]:
    """Member names in catalog order."""
    return [t.name for t in catalog.tools_in(c)]


def coalition_key(c: Coalition, catalog: ToolCatalog) -> str:
    return "|".join(sorted(member_names(c, catalog)))


@dataclass(frozen=True)
class PromptCase:
    id: str
    prompt: str
    domain_label: str = "other"
    expected_tool: str | None = None

    def __post_init__(self):
        if self.domain_label not in DOMAINS:
            raise ValueError(f"domain_label must be one of {DOMAINS}, got {self.domain_label!r}")


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: str
    result: str


@dataclass(frozen=True)
class AgentResponse:
    text: str
    tool_calls_made: tuple[ToolCall, ...] = ()
    turns: int = 1
    # provenance only; a replayed response equals the original
    source: Source = field(default="scripted", compare=False)

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "tool_calls_made": [[c.name, c.arguments, c.result] for c in self.tool_calls_made],
            "turns": self.turns,
        }

    @classmethod
    def from_dict(cls, d: dict, source: Source = "cache") -> AgentResponse:
        return cls(
            text=d["text"],
            tool_calls_made=tuple(ToolCall(*c) for c in d.get("tool_calls_made", [])),
            turns=int(d.get("turns", 1)),
            source=source,
        )


@dataclass(frozen=True)
class CoalitionEvaluation:
    coalition: Coalition
    members: tuple[str, ...]
    response: AgentResponse
    value: float
    phase: Phase


@dataclass(frozen=True)
class ShapleyReport:
    tools: tuple[str, ...]
    phi: tuple[float, ...]
    shares: tuple[float, ...]
    estimator: Estimator
    seed: int
    sampling_ratio: float
    evaluations: tuple[CoalitionEvaluation, ...]
    baseline_text: str
    prompt: str = ""
    catalog_fingerprint: str = ""
    backend: str = "tf_cosine"
    agent_id: str = ""
    permutations: int | None = None

    def __post_init__(self):
        if len(self.phi) != len(self.tools) or len(self.shares) != len(self.tools):
            raise ValueError("phi and shares must have one entry per tool")

    def top_tool(self) -> str:
        """Tool with the largest score; ties go to the lower catalog index."""
        best = max(range(len(self.phi)), key=lambda i: (self.phi[i], -i))
        return self.tools[best]

    def phi_of(self, name: str) -> float:
        return self.phi[self.tools.index(name)]
