"""Exception types shared across the package."""

from __future__ import annotations


class ScenoError(Exception):
    """Base class for all package errors."""


class DocumentSyntaxError(ScenoError):
    """Input text is not well-formed (JSON/YAML level)."""


class SchemaError(ScenoError):
    """A document violates its schema; ``path`` names the offending entry."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class MapIntegrityError(ScenoError):
    """A map file references lanes that do not exist."""


class NoLaneNearPointError(ScenoError):
    """A query point does not project onto any lane within tolerance."""


class UnreachableError(ScenoError):
    """No lane-graph path connects the requested start and goal."""


class InfeasibleSeedError(ScenoError):
    """The seed generator exhausted its retry budget."""


class SpawnOverlapError(ScenoError):
    """Two actors would spawn with intersecting footprints."""

    def __init__(self, id_a: str, id_b: str):
        self.id_a = id_a
        self.id_b = id_b
        super().__init__(f"spawn footprints of '{id_a}' and '{id_b}' intersect")


class UnknownAgentError(ScenoError):
    """agent_config_ref does not name a registered agent kind."""


class AgentProtocolError(ScenoError):
    """An external agent violated the wire protocol (bad message, timeout, exit)."""


class PoolFailureError(ScenoError):
    """All workers of an execution pool died; carries any partial results."""

    def __init__(self, message: str, partial_results=None):
        self.partial_results = partial_results if partial_results is not None else []
        super().__init__(message)
