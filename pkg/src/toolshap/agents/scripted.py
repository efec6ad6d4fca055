"""Deterministic rule-based agent used as offline ground truth."""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path

from toolshap.agents.executors import execute_tool
from toolshap.core import AgentResponse, Coalition, ToolCall, ToolCatalog, member_names


@dataclass(frozen=True)
class Rule:
    match: str
    required_tools: frozenset[str]
    response: str
    regex: bool = False
    # per-tool call arguments; results are substituted into ``response`` as {ToolName}
    tool_args: dict[str, dict] = field(default_factory=dict, hash=False, compare=False)

    def matches(self, prompt: str) -> bool:
        if self.regex:
            return re.search(self.match, prompt) is not None
        return self.match in prompt


@dataclass(frozen=True)
class AgentScript:
    rules: tuple[Rule, ...]
    fallback_response: str

    @classmethod
    def from_dict(cls, d: dict) -> AgentScript:
        rules = tuple(
            Rule(
                match=r["match"],
                required_tools=frozenset(r.get("required_tools", [])),
                response=r["response"],
                regex=bool(r.get("regex", False)),
                tool_args={k: dict(v) for k, v in r.get("tool_args", {}).items()},
            )
            for r in d.get("rules", [])
        )
        return cls(rules, d["fallback_response"])

    @classmethod
    def load(cls, path: str | Path) -> AgentScript:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "fallback_response": self.fallback_response,
            "rules": [
                {
                    "match": r.match,
                    "regex": r.regex,
                    "required_tools": sorted(r.required_tools),
                    "response": r.response,
                    "tool_args": r.tool_args,
                }
                for r in self.rules
            ],
        }


class ScriptedAgent:
    """Answers with the first rule that matches the prompt and whose tools are all offered."""

    def __init__(self, catalog: ToolCatalog, script: AgentScript):
        self.catalog = catalog
        self.script = script
        digest = hashlib.sha256(json.dumps(script.to_dict(), sort_keys=True).encode()).hexdigest()
        self.agent_id = f"scripted:{digest[:12]}"
        self.calls = 0
        self._lock = threading.Lock()

    def respond(self, prompt: str, coalition: Coalition) -> AgentResponse:
        offered = set(member_names(coalition, self.catalog))
        with self._lock:
            self.calls += 1
        for rule in self.script.rules:
            if rule.matches(prompt) and rule.required_tools <= offered:
                return self._answer(rule)
        return AgentResponse(self.script.fallback_response, (), 1, "scripted")

    def _answer(self, rule: Rule) -> AgentResponse:
        calls = []
        results = {}
        for name in sorted(rule.required_tools, key=self.catalog.index):
            args = rule.tool_args.get(name, {})
            result = execute_tool(self.catalog[name].executor_id, args)
            calls.append(ToolCall(name, json.dumps(args, sort_keys=True), result))
            results[name] = result
        return AgentResponse(rule.response.format_map(results), tuple(calls), 1, "scripted")
