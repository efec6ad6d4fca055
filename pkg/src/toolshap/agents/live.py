"""Tool-calling loop against an OpenAI-compatible chat-completions endpoint."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Sequence

import httpx

from toolshap.agents.executors import execute_tool
from toolshap.core import AgentResponse, Coalition, Tool, ToolCall, ToolCatalog
from toolshap.errors import (
    AgentUnavailable,
    ExecutorNotFound,
    MalformedToolCall,
    MaxTurnsExceeded,
)

log = logging.getLogger(__name__)

_RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class LiveAgentConfig:
    base_url: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    max_turns: int = 4
    request_timeout: float = 60.0
    max_retries: int = 2
    temperature: float = 0.0
    retry_backoff: float = 0.5
    system_prompt: str | None = None

    def __post_init__(self):
        if self.max_turns < 1:
            raise ValueError("max_turns must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


def tool_declaration(tool: Tool) -> dict:
    return {
        "type": "function",
        "function": {
            "name": tool.name,
            "description": tool.description,
            "parameters": tool.json_schema(),
        },
    }


def post_json(
    client: httpx.Client,
    url: str,
    payload: dict,
    headers: dict,
    max_retries: int,
    backoff: float,
    error: type[Exception],
) -> dict:
    """POST with retries on transport errors and retryable statuses."""
    last: Exception | None = None
    for attempt in range(max_retries + 1):
        if attempt:
            time.sleep(backoff * 2 ** (attempt - 1))
        try:
            resp = client.post(url, json=payload, headers=headers)
        except httpx.HTTPError as exc:
            last = exc
            continue
        if resp.status_code in _RETRY_STATUS:
            last = RuntimeError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            continue
        if resp.status_code >= 400:
            raise error(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise error(f"{url}: response is not JSON") from exc
    raise error(f"{url}: giving up after {max_retries + 1} attempt(s): {last}")


def auth_headers(api_key_env: str) -> dict:
    key = os.environ.get(api_key_env, "") if api_key_env else ""
    return {"Authorization": f"Bearer {key}"} if key else {}


def _parse_arguments(raw) -> dict:
    if isinstance(raw, dict):
        return raw
    try:
        args = json.loads(raw or "{}")
    except (TypeError, json.JSONDecodeError) as exc:
        raise MalformedToolCall(f"arguments are not valid JSON: {exc}") from None
    if not isinstance(args, dict):
        raise MalformedToolCall("arguments must be a JSON object")
    return args


def run_tool_loop(
    cfg: LiveAgentConfig,
    prompt: str,
    tools: Sequence[Tool],
    client: httpx.Client | None = None,
) -> AgentResponse:
    """Run the chat/tool-call loop until the model answers without calling tools.

    Each POST counts as one turn. Tool calls are executed locally and in order;
    malformed or unknown calls are answered with an error string so the model can
    recover. Only calls to offered tools appear in ``tool_calls_made``.
    """
    by_name = {t.name: t for t in tools}
    messages: list[dict] = []
    if cfg.system_prompt:
        messages.append({"role": "system", "content": cfg.system_prompt})
    messages.append({"role": "user", "content": prompt})
    payload_base = {"model": cfg.model, "temperature": cfg.temperature}
    if tools:
        payload_base["tools"] = [tool_declaration(t) for t in tools]
        payload_base["tool_choice"] = "auto"
    url = cfg.base_url.rstrip("/") + "/chat/completions"
    headers = auth_headers(cfg.api_key_env)

    own_client = client is None
    if own_client:
        client = httpx.Client(timeout=cfg.request_timeout)
    transcript: list[ToolCall] = []
    try:
        for turn in range(1, cfg.max_turns + 1):
            body = post_json(
                client, url, {**payload_base, "messages": messages}, headers,
                cfg.max_retries, cfg.retry_backoff, AgentUnavailable,
            )
            try:
                message = body["choices"][0]["message"]
            except (KeyError, IndexError, TypeError):
                raise AgentUnavailable(f"{url}: unexpected response shape") from None
            calls = message.get("tool_calls") or []
            if not calls:
                return AgentResponse(message.get("content") or "", tuple(transcript), turn, "live")
            if turn == cfg.max_turns:
                break
            messages.append(
                {"role": "assistant", "content": message.get("content"), "tool_calls": calls}
            )
            for call in calls:
                fn = call.get("function", {})
                name = fn.get("name", "")
                raw_args = fn.get("arguments", "")
                result = _run_call(by_name, name, raw_args)
                if name in by_name:
                    raw = raw_args if isinstance(raw_args, str) else json.dumps(raw_args)
                    transcript.append(ToolCall(name, raw, result))
                messages.append(
                    {"role": "tool", "tool_call_id": call.get("id", ""), "content": result}
                )
    finally:
        if own_client:
            client.close()
    raise MaxTurnsExceeded(f"no final answer after {cfg.max_turns} turn(s)")


def _run_call(by_name: dict[str, Tool], name: str, raw_args) -> str:
    tool = by_name.get(name)
    if tool is None:
        return f"Error: tool {name!r} is not available"
    try:
        args = _parse_arguments(raw_args)
    except MalformedToolCall as exc:
        log.info("malformed call to %s: %s", name, exc)
        return f"Error: {exc}"
    try:
        return execute_tool(tool.executor_id, args)
    except ExecutorNotFound as exc:
        return f"Error: {exc}"


class LiveAgent:
    def __init__(self, catalog: ToolCatalog, cfg: LiveAgentConfig, concurrency: int = 4):
        self.catalog = catalog
        self.cfg = cfg
        self.agent_id = f"live:{cfg.model}@{cfg.base_url}:t={cfg.temperature}"
        self.calls = 0
        self._slots = threading.BoundedSemaphore(max(1, concurrency))
        self._lock = threading.Lock()
        self._client = httpx.Client(timeout=cfg.request_timeout)

    def respond(self, prompt: str, coalition: Coalition) -> AgentResponse:
        tools = self.catalog.tools_in(coalition)
        with self._lock:
            self.calls += 1
        with self._slots:
            return run_tool_loop(self.cfg, prompt, tools, self._client)

    def close(self) -> None:
        self._client.close()
