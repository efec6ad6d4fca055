"""Agents: the black box queried with a prompt and a tool coalition."""

from __future__ import annotations

from typing import Protocol

from toolshap.agents.cache import ResponseCache, cached_respond
from toolshap.agents.executors import execute_tool
from toolshap.agents.live import LiveAgent, LiveAgentConfig, run_tool_loop
from toolshap.agents.scripted import AgentScript, Rule, ScriptedAgent
from toolshap.core import AgentResponse, Coalition, ToolCatalog


class Agent(Protocol):
    agent_id: str
    catalog: ToolCatalog

    def respond(self, prompt: str, coalition: Coalition) -> AgentResponse: ...


__all__ = [
    "Agent",
    "AgentScript",
    "LiveAgent",
    "LiveAgentConfig",
    "ResponseCache",
    "Rule",
    "ScriptedAgent",
    "cached_respond",
    "execute_tool",
    "run_tool_loop",
]
