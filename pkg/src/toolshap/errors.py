"""Exception hierarchy.

Errors deriving from :class:`ConfigError` map to CLI exit code 1 and errors
deriving from :class:`ServiceError` map to exit code 2.
"""

from __future__ import annotations


class ToolshapError(Exception):
    pass


class ConfigError(ToolshapError):
    """Invalid user input: bad catalog, bad names, bad parameters."""


class CatalogError(ConfigError):
    pass


class EmptyCatalog(CatalogError):
    pass


class CatalogTooLarge(CatalogError):
    pass


class UnknownTool(ConfigError):
    def __init__(self, name: str):
        super().__init__(f"unknown tool: {name!r}")
        self.name = name


class DuplicateName(ConfigError):
    def __init__(self, name: str):
        super().__init__(f"duplicate tool name: {name!r}")
        self.name = name


class InvalidRho(ConfigError):
    def __init__(self, rho):
        super().__init__(f"rho must satisfy 0 < rho <= 1, got {rho!r}")
        self.rho = rho


class UnknownExperiment(ConfigError):
    pass


class FingerprintMismatch(ToolshapError):
    pass


class IncompleteTable(ToolshapError):
    pass


class ZeroVector(ValueError, ToolshapError):
    pass


class ExecutorNotFound(ToolshapError):
    pass


class CalculatorParseError(ToolshapError):
    pass


class MalformedToolCall(ToolshapError):
    pass


class CacheIOError(ToolshapError):
    pass


class ServiceError(ToolshapError):
    """A remote agent or embedding service could not produce a result."""


class AgentUnavailable(ServiceError):
    pass


class MaxTurnsExceeded(ServiceError):
    pass


class EmbeddingUnavailable(ServiceError):
    pass


class DimensionMismatch(ServiceError):
    pass


class EvaluationFailed(ServiceError):
    def __init__(self, members: list[str], cause: Exception):
        super().__init__(f"evaluation failed for coalition {members!r}: {cause}")
        self.members = members
        self.cause = cause
