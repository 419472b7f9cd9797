"""Wire encoding for the external-agent protocol.

Messages are newline-delimited JSON over the agent process's stdin and
stdout. Floats are encoded at full precision (shortest round-trip repr),
so an external agent sees bit-identical values to an in-process one.

Message flow:
  framework -> {"type": "hello", "context": {...}}
  agent     -> {"type": "ready"}
  repeated:
    framework -> {"type": "observation", "observation": {...}}
    agent     -> {"type": "action", "accel": f, "steer": f, "log": {...}}
  framework -> {"type": "shutdown"}
  agent     -> {"type": "bye"}
"""

from __future__ import annotations

import json

from ..catalog import ModelSpec
from ..scenario import Route, Waypoint, WeatherSpec
from ..traces import ActorState
from .base import AgentAction, AgentContext, Observation, VisibleLight


def dumps(msg: dict) -> str:
    return json.dumps(msg, separators=(",", ":")) + "\n"


def _waypoint_doc(wp: Waypoint) -> dict:
    return {"x": wp.x, "y": wp.y, "target_speed": wp.target_speed}


def _waypoint_from(doc: dict) -> Waypoint:
    return Waypoint(doc["x"], doc["y"], doc["target_speed"])


def _actor_doc(a: ActorState) -> dict:
    return {"id": a.id, "kind": a.kind, "x": a.x, "y": a.y, "heading": a.heading,
            "speed": a.speed, "length": a.extent[0], "width": a.extent[1],
            "active": a.active, "route_progress": a.route_progress, "phase": a.phase}


def _actor_from(doc: dict) -> ActorState:
    return ActorState(id=doc["id"], kind=doc["kind"], x=doc["x"], y=doc["y"],
                      heading=doc["heading"], speed=doc["speed"],
                      extent=(doc["length"], doc["width"]), active=doc["active"],
                      route_progress=doc["route_progress"], phase=doc["phase"])


def context_doc(ctx: AgentContext) -> dict:
    limits = ctx.vehicle_limits
    return {
        "ego_id": ctx.ego_id,
        "route": [_waypoint_doc(wp) for wp in ctx.route.waypoints],
        "vehicle_limits": {
            "length": limits.length, "width": limits.width,
            "max_speed": limits.max_speed, "max_accel": limits.max_accel,
            "max_decel": limits.max_decel, "max_steer": limits.max_steer,
            "wheelbase": limits.wheelbase,
        },
        "weather": {
            "cloudiness": ctx.weather.cloudiness,
            "precipitation": ctx.weather.precipitation,
            "wind_intensity": ctx.weather.wind_intensity,
            "fog_density": ctx.weather.fog_density,
            "sun_altitude": ctx.weather.sun_altitude,
        },
        "dt": ctx.dt,
        "sensing_radius": ctx.sensing_radius,
    }


def context_from(doc: dict) -> AgentContext:
    return AgentContext(
        ego_id=doc["ego_id"],
        route=Route(tuple(_waypoint_from(w) for w in doc["route"])),
        vehicle_limits=ModelSpec(**doc["vehicle_limits"]),
        weather=WeatherSpec(**doc["weather"]),
        dt=doc["dt"],
        sensing_radius=doc["sensing_radius"],
    )


def observation_doc(obs: Observation) -> dict:
    light = None
    if obs.visible_light is not None:
        vl = obs.visible_light
        light = {"junction_id": vl.junction_id, "x": vl.x, "y": vl.y,
                 "distance": vl.distance, "stop_line_distance": vl.stop_line_distance,
                 "approach_group": vl.approach_group,
                 "group0": vl.group0, "group1": vl.group1}
    return {
        "step": obs.step,
        "timestamp": obs.timestamp,
        "self_state": _actor_doc(obs.self_state),
        "nearby_actors": [_actor_doc(a) for a in obs.nearby_actors],
        "visible_light": light,
        "remaining_route": [_waypoint_doc(wp) for wp in obs.remaining_route],
    }


def observation_from(doc: dict) -> Observation:
    light = None
    if doc["visible_light"] is not None:
        light = VisibleLight(**doc["visible_light"])
    return Observation(
        step=doc["step"],
        timestamp=doc["timestamp"],
        self_state=_actor_from(doc["self_state"]),
        nearby_actors=tuple(_actor_from(a) for a in doc["nearby_actors"]),
        visible_light=light,
        remaining_route=tuple(_waypoint_from(w) for w in doc["remaining_route"]),
    )


def action_doc(action: AgentAction, log: dict) -> dict:
    return {"type": "action", "accel": action.accel, "steer": action.steer, "log": log}
