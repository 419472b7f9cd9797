"""Per-step world records and the trace file format.

A trace file is canonical JSON: a header (scenario id, dt, sensing and
goal radii, seeds, weather, per-ego goals, termination) followed by the
recorded observations with keys ``step``, ``timestamp``, ``egos``,
``other_actors``, ``agent_logs``. Wall-clock time is runtime metadata and
deliberately not part of the file, so equal runs produce identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import SchemaError
from .jsonio import canonical_dumps, loads
from .scenario import WeatherSpec

KIND_EGO = "ego"
KIND_NPC_VEHICLE = "npc_vehicle"
KIND_WALKER = "walker"
KIND_OBSTACLE = "obstacle"
KIND_TRAFFIC_LIGHT = "traffic_light"
ACTOR_KINDS = (KIND_EGO, KIND_NPC_VEHICLE, KIND_WALKER, KIND_OBSTACLE, KIND_TRAFFIC_LIGHT)

TERM_COMPLETED = "all_routes_completed"
TERM_COLLISION = "collision"
TERM_MAX_TIME = "max_time_reached"
TERM_AGENT_FAILURE = "agent_failure"
TERMINATIONS = (TERM_COMPLETED, TERM_COLLISION, TERM_MAX_TIME, TERM_AGENT_FAILURE)

AgentLog = dict


@dataclass(frozen=True)
class ActorState:
    id: str
    kind: str
    x: float
    y: float
    heading: float
    speed: float
    extent: tuple[float, float]
    active: bool
    route_progress: float
    phase: str | None = None  # traffic lights only

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.heading)


@dataclass(frozen=True)
class SceneObs:
    step: int
    timestamp: float
    egos: tuple[ActorState, ...]
    other_actors: tuple[ActorState, ...]
    agent_logs: dict[str, AgentLog]


@dataclass(frozen=True)
class EgoGoal:
    x: float
    y: float
    route_length: float


@dataclass(frozen=True)
class Trace:
    scenario_id: str
    town: str
    dt: float
    sensing_radius: float
    goal_radius: float
    seeds: dict[str, int]
    weather: WeatherSpec
    ego_goals: dict[str, EgoGoal]
    observations: tuple[SceneObs, ...]
    termination: str
    error: str | None = None
    wall_clock: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.termination not in TERMINATIONS:
            raise ValueError(f"unknown termination '{self.termination}'")
        if not self.observations:
            raise ValueError("trace needs at least one observation")


def _actor_doc(a: ActorState) -> dict:
    return {
        "id": a.id, "kind": a.kind, "x": a.x, "y": a.y, "heading": a.heading,
        "speed": a.speed, "extent": {"length": a.extent[0], "width": a.extent[1]},
        "active": a.active, "route_progress": a.route_progress, "phase": a.phase,
    }


def _obs_doc(o: SceneObs) -> dict:
    return {
        "step": o.step,
        "timestamp": o.timestamp,
        "egos": [_actor_doc(a) for a in o.egos],
        "other_actors": [_actor_doc(a) for a in o.other_actors],
        "agent_logs": o.agent_logs,
    }


def serialize_trace(t: Trace) -> str:
    doc = {
        "scenario_id": t.scenario_id,
        "town": t.town,
        "dt": t.dt,
        "sensing_radius": t.sensing_radius,
        "goal_radius": t.goal_radius,
        "seeds": t.seeds,
        "weather": {
            "cloudiness": t.weather.cloudiness,
            "precipitation": t.weather.precipitation,
            "wind_intensity": t.weather.wind_intensity,
            "fog_density": t.weather.fog_density,
            "sun_altitude": t.weather.sun_altitude,
        },
        "ego_goals": {eid: {"x": g.x, "y": g.y, "route_length": g.route_length}
                      for eid, g in t.ego_goals.items()},
        "termination": t.termination,
        "error": t.error,
        "observations": [_obs_doc(o) for o in t.observations],
    }
    return canonical_dumps(doc)


def _parse_actor(doc: dict, path: str) -> ActorState:
    try:
        kind = doc["kind"]
        if kind not in ACTOR_KINDS:
            raise SchemaError(f"{path}.kind", f"unknown actor kind '{kind}'")
        return ActorState(
            id=doc["id"], kind=kind, x=float(doc["x"]), y=float(doc["y"]),
            heading=float(doc["heading"]), speed=float(doc["speed"]),
            extent=(float(doc["extent"]["length"]), float(doc["extent"]["width"])),
            active=bool(doc["active"]), route_progress=float(doc["route_progress"]),
            phase=doc.get("phase"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(path, str(exc)) from exc


def parse_trace(text: str) -> Trace:
    doc = loads(text)
    if not isinstance(doc, dict):
        raise SchemaError("", "trace document must be an object")
    try:
        observations = tuple(
            SceneObs(
                step=int(o["step"]),
                timestamp=float(o["timestamp"]),
                egos=tuple(_parse_actor(a, f"observations[{i}].egos[{k}]")
                           for k, a in enumerate(o["egos"])),
                other_actors=tuple(_parse_actor(a, f"observations[{i}].other_actors[{k}]")
                                   for k, a in enumerate(o["other_actors"])),
                agent_logs=dict(o["agent_logs"]),
            )
            for i, o in enumerate(doc["observations"])
        )
        return Trace(
            scenario_id=doc["scenario_id"],
            town=doc["town"],
            dt=float(doc["dt"]),
            sensing_radius=float(doc["sensing_radius"]),
            goal_radius=float(doc["goal_radius"]),
            seeds={k: int(v) for k, v in doc["seeds"].items()},
            weather=WeatherSpec(**{k: float(v) for k, v in doc["weather"].items()}),
            ego_goals={eid: EgoGoal(float(g["x"]), float(g["y"]), float(g["route_length"]))
                       for eid, g in doc["ego_goals"].items()},
            observations=observations,
            termination=doc["termination"],
            error=doc.get("error"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError("", f"bad trace document: {exc}") from exc
