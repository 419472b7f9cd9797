"""Agent interface: context, per-step observation, action, registry."""

from __future__ import annotations

import math
import shlex
from dataclasses import dataclass
from urllib.parse import parse_qsl

from ..catalog import ModelSpec
from ..errors import AgentProtocolError, UnknownAgentError
from ..scenario import Route, Waypoint, WeatherSpec
from ..traces import ActorState, AgentLog


@dataclass(frozen=True)
class AgentContext:
    ego_id: str
    route: Route
    vehicle_limits: ModelSpec
    weather: WeatherSpec
    dt: float
    sensing_radius: float


@dataclass(frozen=True)
class VisibleLight:
    """Signal state of the nearest signalized junction within sensing range.

    ``approach_group`` and ``stop_line_distance`` are set only while the ego
    is on an approach lane of that junction; inside the junction or on an
    unrelated lane they are None.
    """

    junction_id: str
    x: float
    y: float
    distance: float
    stop_line_distance: float | None
    approach_group: int | None
    group0: str
    group1: str

    @property
    def approach_phase(self) -> str | None:
        if self.approach_group is None:
            return None
        return self.group0 if self.approach_group == 0 else self.group1


@dataclass(frozen=True)
class Observation:
    step: int
    timestamp: float
    self_state: ActorState
    nearby_actors: tuple[ActorState, ...]
    visible_light: VisibleLight | None
    remaining_route: tuple[Waypoint, ...]


@dataclass(frozen=True)
class AgentAction:
    accel: float
    steer: float

    def __post_init__(self):
        if not (math.isfinite(self.accel) and math.isfinite(self.steer)):
            raise ValueError("agent action must be finite")


class Agent:
    """Stateful per-ego driving agent; one handle per ego, never shared."""

    kind = "abstract"

    def __init__(self, ctx: AgentContext, params: dict[str, str]):
        self.ctx = ctx
        self._next_step: int | None = None  # first query fixes the offset

    def act(self, obs: Observation) -> tuple[AgentAction, AgentLog]:
        raise NotImplementedError

    def close(self) -> None:
        pass


AGENT_KINDS: dict[str, type[Agent]] = {}


def register_agent(cls: type[Agent]) -> type[Agent]:
    AGENT_KINDS[cls.kind] = cls
    return cls


def parse_agent_ref(ref: str) -> tuple[str, str, dict[str, str]]:
    """Split ``builtin:kind?k=v`` / ``external:command line`` references."""
    scheme, sep, rest = ref.partition(":")
    if not sep or scheme not in ("builtin", "external") or not rest:
        raise UnknownAgentError(
            f"bad agent_config_ref '{ref}' (expected 'builtin:<kind>[?params]' "
            f"or 'external:<command line>')")
    if scheme == "external":
        return scheme, rest, {}
    kind, _, query = rest.partition("?")
    return scheme, kind, dict(parse_qsl(query))


def setup_env(agent_config_ref: str, ctx: AgentContext) -> Agent:
    """Resolve an agent reference into a ready handle."""
    scheme, target, params = parse_agent_ref(agent_config_ref)
    if scheme == "builtin":
        cls = AGENT_KINDS.get(target)
        if cls is None:
            known = ", ".join(sorted(AGENT_KINDS))
            raise UnknownAgentError(f"unknown agent kind '{target}' (known: {known})")
        return cls(ctx, params)
    from .external import ExternalAgent  # avoid importing subprocess machinery eagerly
    return ExternalAgent(shlex.split(target), ctx)


def run_step(handle: Agent, obs: Observation) -> tuple[AgentAction, AgentLog]:
    """Advance the agent by one lockstep exchange; enforces step ordering."""
    if handle._next_step is not None and obs.step != handle._next_step:
        raise AgentProtocolError(
            f"agent '{handle.ctx.ego_id}' expected step {handle._next_step}, "
            f"got {obs.step}")
    handle._next_step = obs.step + 1
    action, log = handle.act(obs)
    limits = handle.ctx.vehicle_limits
    accel = min(max(action.accel, -limits.max_decel), limits.max_accel)
    steer = min(max(action.steer, -limits.max_steer), limits.max_steer)
    return AgentAction(accel, steer), log
