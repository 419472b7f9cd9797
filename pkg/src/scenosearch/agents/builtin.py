"""Built-in baseline driving agents.

NaiveFollower tracks its route and nothing else, so collision-producing
scenarios stay discoverable. SafeFollower adds IDM car-following plus
red-light braking. YieldingAgent adds a conservative junction-yield rule
with no deadlock-breaking timeout, which exposes multi-vehicle deadlock
to the stuck oracle.
"""

from __future__ import annotations

import math
import time

from ..roadnet import cumulative_arcs, project_to_polyline
from ..traces import KIND_EGO, KIND_NPC_VEHICLE, AgentLog
from .base import Agent, AgentAction, AgentContext, Observation, register_agent
from .control import (IdmParams, idm_acceleration, lookahead_for,
                      proportional_speed, pure_pursuit)

LEADER_CORRIDOR = 3.0        # lateral half-width for leader detection, m
LEADER_HORIZON = 60.0        # how far along the route leaders are searched, m
LIGHT_BRAKE_DISTANCE = 15.0  # stop-line distance that triggers red/yellow braking, m
YIELD_TRIGGER = 15.0         # ego stop-line distance that arms the yield rule, m
YIELD_ZONE = 20.0            # conflicting-vehicle distance from junction center, m


@register_agent
class NaiveFollower(Agent):
    kind = "naive_follower"

    def __init__(self, ctx: AgentContext, params: dict[str, str]):
        super().__init__(ctx, params)
        self.v_des = float(params.get("v_des", 8.0))

    def act(self, obs: Observation) -> tuple[AgentAction, AgentLog]:
        me = obs.self_state
        limits = self.ctx.vehicle_limits
        steer = pure_pursuit(me.x, me.y, me.heading, obs.remaining_route,
                             lookahead_for(me.speed), limits.wheelbase, limits.max_steer)
        accel = proportional_speed(me.speed, self.v_des, limits.max_accel, limits.max_decel)
        return AgentAction(accel, steer), {"mode": "cruise", "target_speed": self.v_des}


@register_agent
class SafeFollower(Agent):
    kind = "safe_follower"

    def __init__(self, ctx: AgentContext, params: dict[str, str]):
        super().__init__(ctx, params)
        self.v_des = float(params.get("v_des", 8.0))
        self.idm = IdmParams(
            v0=self.v_des,
            T=float(params.get("T", 1.5)),
            s0=float(params.get("s0", 2.0)),
            a_max=float(params.get("a_max", 2.0)),
            b=float(params.get("b", 3.0)),
        )

    def _path_ahead(self, obs: Observation) -> tuple[tuple[float, float], ...]:
        me = obs.self_state
        points = [(me.x, me.y)]
        travelled = 0.0
        for wp in obs.remaining_route:
            seg = math.hypot(wp.x - points[-1][0], wp.y - points[-1][1])
            if seg == 0.0:
                continue
            points.append((wp.x, wp.y))
            travelled += seg
            if travelled >= LEADER_HORIZON:
                break
        return tuple(points)

    def _leader(self, obs: Observation, path) -> tuple[float, float, str] | None:
        """Nearest actor ahead inside the route corridor: (gap, speed, id)."""
        if len(path) < 2:
            return None
        arcs = cumulative_arcs(path)
        me = obs.self_state
        best = None
        for actor in obs.nearby_actors:
            arc, lateral = project_to_polyline(path, arcs, (actor.x, actor.y))
            if arc <= 0.3 or lateral > LEADER_CORRIDOR:
                continue
            gap = arc - me.extent[0] / 2.0 - actor.extent[0] / 2.0
            if best is None or gap < best[0]:
                best = (gap, actor.speed, actor.id)
        return best

    def _speed_cap(self, obs: Observation) -> float:
        """Anticipate lower waypoint speeds within the braking window."""
        me = obs.self_state
        window = me.speed * self.idm.T + me.speed ** 2 / (2.0 * self.idm.b) + 5.0
        cap = self.v_des
        px, py = me.x, me.y
        travelled = 0.0
        for wp in obs.remaining_route:
            travelled += math.hypot(wp.x - px, wp.y - py)
            px, py = wp.x, wp.y
            if travelled > window:
                break
            cap = min(cap, wp.target_speed)
        return cap

    def act(self, obs: Observation) -> tuple[AgentAction, AgentLog]:
        me = obs.self_state
        limits = self.ctx.vehicle_limits
        params = IdmParams(v0=min(self.v_des, self._speed_cap(obs)),
                           T=self.idm.T, s0=self.idm.s0,
                           a_max=self.idm.a_max, b=self.idm.b)

        path = self._path_ahead(obs)
        leader = self._leader(obs, path)
        mode = "free"
        if leader is None:
            accel = idm_acceleration(me.speed, None, None, params, limits.max_decel)
        else:
            mode = "follow"
            accel = idm_acceleration(me.speed, leader[1], leader[0], params, limits.max_decel)

        light = obs.visible_light
        if (light is not None and light.approach_phase in ("red", "yellow")
                and light.stop_line_distance is not None
                and light.stop_line_distance <= LIGHT_BRAKE_DISTANCE):
            stop_gap = light.stop_line_distance - me.extent[0] / 2.0
            light_accel = idm_acceleration(me.speed, 0.0, stop_gap, params, limits.max_decel)
            if light_accel < accel:
                mode = "light"
                accel = light_accel

        steer = pure_pursuit(me.x, me.y, me.heading, obs.remaining_route,
                             lookahead_for(me.speed), limits.wheelbase, limits.max_steer)
        log: AgentLog = {"mode": mode, "v0": params.v0,
                         "leader": leader[2] if leader else "",
                         "gap": leader[0] if leader else -1.0}
        return AgentAction(accel, steer), log


@register_agent
class YieldingAgent(SafeFollower):
    kind = "yielding_agent"

    def act(self, obs: Observation) -> tuple[AgentAction, AgentLog]:
        action, log = super().act(obs)
        light = obs.visible_light
        if (light is not None and light.stop_line_distance is not None
                and light.stop_line_distance <= YIELD_TRIGGER):
            for actor in obs.nearby_actors:
                if actor.kind not in (KIND_EGO, KIND_NPC_VEHICLE):
                    continue
                if math.hypot(actor.x - light.x, actor.y - light.y) <= YIELD_ZONE:
                    log = dict(log)
                    log["mode"] = "yield"
                    log["yield_to"] = actor.id
                    return AgentAction(-self.ctx.vehicle_limits.max_decel, action.steer), log
        return action, log


@register_agent
class PanicAgent(Agent):
    """Raises at a configured step; exercises agent_failure handling."""

    kind = "panic"

    def __init__(self, ctx: AgentContext, params: dict[str, str]):
        super().__init__(ctx, params)
        self.at_step = int(params.get("at_step", 0))

    def act(self, obs: Observation) -> tuple[AgentAction, AgentLog]:
        if obs.step >= self.at_step:
            raise RuntimeError(f"panic agent tripped at step {obs.step}")
        return AgentAction(0.0, 0.0), {"mode": "idle"}


@register_agent
class SleeperAgent(Agent):
    """Stalls every step; exercises wall-clock budget enforcement."""

    kind = "sleeper"

    def __init__(self, ctx: AgentContext, params: dict[str, str]):
        super().__init__(ctx, params)
        self.seconds = float(params.get("seconds", 1.0))

    def act(self, obs: Observation) -> tuple[AgentAction, AgentLog]:
        time.sleep(self.seconds)
        return AgentAction(0.0, 0.0), {"mode": "sleep"}
