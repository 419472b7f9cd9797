"""Scenario data model: typed test-case description plus parse/serialize.

The document format is JSON with a fixed top-level key set
(``scenario_id``, ``ego_vehicles``, ``npc_vehicles``, ``npc_walkers``,
``npc_obstacles``, ``map_region``, ``weather``, ``traffic_lights``).
Serialization is canonical: fixed key order, floats with 6 decimal
digits, so equal values produce byte-identical documents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import SchemaError
from .jsonio import canonical_dumps, loads

MIN_WAYPOINT_SEPARATION = 0.01  # meters


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    target_speed: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("waypoint coordinates must be finite")
        if not math.isfinite(self.target_speed) or self.target_speed < 0:
            raise ValueError("target_speed must be finite and >= 0")


@dataclass(frozen=True)
class Route:
    waypoints: tuple[Waypoint, ...]

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError("route needs at least 2 waypoints")
        for i in range(1, len(self.waypoints)):
            a, b = self.waypoints[i - 1], self.waypoints[i]
            if math.hypot(b.x - a.x, b.y - a.y) <= MIN_WAYPOINT_SEPARATION:
                raise ValueError(f"waypoints {i - 1} and {i} coincide")

    def __len__(self) -> int:
        return len(self.waypoints)


@dataclass(frozen=True)
class EgoSpec:
    id: str
    model: str
    route: Route
    start_time: float
    agent_config_ref: str

    def __post_init__(self):
        _check_actor_common(self.id, self.start_time)


@dataclass(frozen=True)
class NpcVehicleSpec:
    id: str
    model: str
    route: Route
    start_time: float

    def __post_init__(self):
        _check_actor_common(self.id, self.start_time)


@dataclass(frozen=True)
class NpcWalkerSpec:
    id: str
    model: str
    route: Route
    start_time: float

    def __post_init__(self):
        _check_actor_common(self.id, self.start_time)


@dataclass(frozen=True)
class NpcObstacleSpec:
    id: str
    model: str
    location: tuple[float, float, float]  # x, y, heading

    def __post_init__(self):
        if not self.id:
            raise ValueError("actor id must be non-empty")
        if not all(math.isfinite(v) for v in self.location):
            raise ValueError("obstacle location must be finite")


@dataclass(frozen=True)
class MapRegionSpec:
    town: str
    region: tuple[float, float, float, float] | None = None  # min_x, max_x, min_y, max_y

    def __post_init__(self):
        if self.region is not None:
            min_x, max_x, min_y, max_y = self.region
            if not (min_x < max_x and min_y < max_y):
                raise ValueError("region bounds must satisfy min < max")

    def contains(self, x: float, y: float) -> bool:
        if self.region is None:
            return True
        min_x, max_x, min_y, max_y = self.region
        return min_x <= x <= max_x and min_y <= y <= max_y


@dataclass(frozen=True)
class WeatherSpec:
    cloudiness: float = 0.0
    precipitation: float = 0.0
    wind_intensity: float = 0.0
    fog_density: float = 0.0
    sun_altitude: float = 45.0

    def __post_init__(self):
        for name in ("cloudiness", "precipitation", "wind_intensity", "fog_density"):
            v = getattr(self, name)
            if not (0.0 <= v <= 100.0):
                raise ValueError(f"{name} must be in [0, 100]")
        if not (-90.0 <= self.sun_altitude <= 90.0):
            raise ValueError("sun_altitude must be in [-90, 90]")


@dataclass(frozen=True)
class TrafficLightSpec:
    green_time: float = 10.0
    yellow_time: float = 3.0
    red_time: float = 7.0

    def __post_init__(self):
        for name in ("green_time", "yellow_time", "red_time"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be strictly positive and finite")


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    ego_vehicles: tuple[EgoSpec, ...]
    npc_vehicles: tuple[NpcVehicleSpec, ...] = ()
    npc_walkers: tuple[NpcWalkerSpec, ...] = ()
    npc_obstacles: tuple[NpcObstacleSpec, ...] = ()
    map_region: MapRegionSpec = field(default_factory=lambda: MapRegionSpec("Town01-lite"))
    weather: WeatherSpec = field(default_factory=WeatherSpec)
    traffic_lights: TrafficLightSpec = field(default_factory=TrafficLightSpec)

    def __post_init__(self):
        if len(self.ego_vehicles) < 1:
            raise ValueError("scenario needs at least one ego vehicle")
        seen: set[str] = set()
        for actor in self.all_actors():
            if actor.id in seen:
                raise ValueError(f"duplicate actor id '{actor.id}'")
            seen.add(actor.id)

    def all_actors(self):
        return (*self.ego_vehicles, *self.npc_vehicles, *self.npc_walkers, *self.npc_obstacles)


def _check_actor_common(actor_id: str, start_time: float) -> None:
    if not actor_id:
        raise ValueError("actor id must be non-empty")
    if not math.isfinite(start_time) or start_time < 0:
        raise ValueError("start_time must be finite and >= 0")


# --------------------------------------------------------------------- #
# Parsing
# --------------------------------------------------------------------- #

def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"{path}.{key}" if path else key, "missing required field")
    return obj[key]


def _no_extra(obj: dict, allowed: tuple[str, ...], path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}" if path else key, "unknown field")


def _as_obj(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(path, f"expected object, got {type(value).__name__}")
    return value


def _as_list(value, path: str) -> list:
    if not isinstance(value, list):
        raise SchemaError(path, f"expected list, got {type(value).__name__}")
    return value


def _as_str(value, path: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(path, f"expected string, got {type(value).__name__}")
    return value


def _as_float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected number, got {type(value).__name__}")
    value = float(value)
    if not math.isfinite(value):
        raise SchemaError(path, "number must be finite")
    return value


def _parse_waypoint(value, path: str) -> Waypoint:
    obj = _as_obj(value, path)
    _no_extra(obj, ("x", "y", "target_speed"), path)
    wp = {k: _as_float(_require(obj, k, path), f"{path}.{k}") for k in ("x", "y", "target_speed")}
    if wp["target_speed"] < 0:
        raise SchemaError(f"{path}.target_speed", "must be >= 0")
    return Waypoint(**wp)


def _parse_route(value, path: str) -> Route:
    items = _as_list(value, path)
    if len(items) < 2:
        raise SchemaError(path, "route needs at least 2 waypoints")
    waypoints = tuple(_parse_waypoint(v, f"{path}[{i}]") for i, v in enumerate(items))
    try:
        return Route(waypoints)
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from exc


def _parse_moving_actor(value, path: str, with_agent: bool):
    obj = _as_obj(value, path)
    allowed = ("id", "model", "route", "start_time") + (("agent_config_ref",) if with_agent else ())
    _no_extra(obj, allowed, path)
    actor_id = _as_str(_require(obj, "id", path), f"{path}.id")
    model = _as_str(_require(obj, "model", path), f"{path}.model")
    route = _parse_route(_require(obj, "route", path), f"{path}.route")
    start_time = _as_float(_require(obj, "start_time", path), f"{path}.start_time")
    if start_time < 0:
        raise SchemaError(f"{path}.start_time", "must be >= 0")
    if with_agent:
        ref = _as_str(_require(obj, "agent_config_ref", path), f"{path}.agent_config_ref")
        return EgoSpec(actor_id, model, route, start_time, ref)
    return actor_id, model, route, start_time


def _parse_obstacle(value, path: str) -> NpcObstacleSpec:
    obj = _as_obj(value, path)
    _no_extra(obj, ("id", "model", "location"), path)
    actor_id = _as_str(_require(obj, "id", path), f"{path}.id")
    model = _as_str(_require(obj, "model", path), f"{path}.model")
    loc = _as_obj(_require(obj, "location", path), f"{path}.location")
    _no_extra(loc, ("x", "y", "heading"), f"{path}.location")
    xyh = tuple(_as_float(_require(loc, k, f"{path}.location"), f"{path}.location.{k}")
                for k in ("x", "y", "heading"))
    return NpcObstacleSpec(actor_id, model, xyh)


def _parse_map_region(value, path: str) -> MapRegionSpec:
    obj = _as_obj(value, path)
    _no_extra(obj, ("town", "region"), path)
    town = _as_str(_require(obj, "town", path), f"{path}.town")
    region_value = _require(obj, "region", path)
    if region_value is None:
        return MapRegionSpec(town, None)
    region_obj = _as_obj(region_value, f"{path}.region")
    _no_extra(region_obj, ("min_x", "max_x", "min_y", "max_y"), f"{path}.region")
    bounds = tuple(_as_float(_require(region_obj, k, f"{path}.region"), f"{path}.region.{k}")
                   for k in ("min_x", "max_x", "min_y", "max_y"))
    try:
        return MapRegionSpec(town, bounds)
    except ValueError as exc:
        raise SchemaError(f"{path}.region", str(exc)) from exc


def _parse_ranged(obj: dict, key: str, path: str, lo: float, hi: float) -> float:
    v = _as_float(_require(obj, key, path), f"{path}.{key}")
    if not (lo <= v <= hi):
        raise SchemaError(f"{path}.{key}", f"must be in [{lo}, {hi}]")
    return v


def _parse_weather(value, path: str) -> WeatherSpec:
    obj = _as_obj(value, path)
    keys = ("cloudiness", "precipitation", "wind_intensity", "fog_density", "sun_altitude")
    _no_extra(obj, keys, path)
    return WeatherSpec(
        cloudiness=_parse_ranged(obj, "cloudiness", path, 0, 100),
        precipitation=_parse_ranged(obj, "precipitation", path, 0, 100),
        wind_intensity=_parse_ranged(obj, "wind_intensity", path, 0, 100),
        fog_density=_parse_ranged(obj, "fog_density", path, 0, 100),
        sun_altitude=_parse_ranged(obj, "sun_altitude", path, -90, 90),
    )


def _parse_traffic_lights(value, path: str) -> TrafficLightSpec:
    obj = _as_obj(value, path)
    _no_extra(obj, ("green_time", "yellow_time", "red_time"), path)
    times = {}
    for key in ("green_time", "yellow_time", "red_time"):
        v = _as_float(_require(obj, key, path), f"{path}.{key}")
        if v <= 0:
            raise SchemaError(f"{path}.{key}", "must be strictly positive")
        times[key] = v
    return TrafficLightSpec(**times)


TOP_LEVEL_KEYS = ("scenario_id", "ego_vehicles", "npc_vehicles", "npc_walkers",
                  "npc_obstacles", "map_region", "weather", "traffic_lights")


def parse_scenario(text: str) -> Scenario:
    """Parse a scenario document; raises DocumentSyntaxError or SchemaError."""
    root = _as_obj(loads(text), "")
    _no_extra(root, TOP_LEVEL_KEYS, "")

    scenario_id = _as_str(_require(root, "scenario_id", ""), "scenario_id")
    egos = tuple(_parse_moving_actor(v, f"ego_vehicles[{i}]", with_agent=True)
                 for i, v in enumerate(_as_list(_require(root, "ego_vehicles", ""), "ego_vehicles")))
    if not egos:
        raise SchemaError("ego_vehicles", "needs at least one ego vehicle")
    npc_vehicles = tuple(NpcVehicleSpec(*_parse_moving_actor(v, f"npc_vehicles[{i}]", with_agent=False))
                         for i, v in enumerate(_as_list(_require(root, "npc_vehicles", ""), "npc_vehicles")))
    npc_walkers = tuple(NpcWalkerSpec(*_parse_moving_actor(v, f"npc_walkers[{i}]", with_agent=False))
                        for i, v in enumerate(_as_list(_require(root, "npc_walkers", ""), "npc_walkers")))
    npc_obstacles = tuple(_parse_obstacle(v, f"npc_obstacles[{i}]")
                          for i, v in enumerate(_as_list(_require(root, "npc_obstacles", ""), "npc_obstacles")))

    # Uniqueness is checked here so the error can name the offending path.
    seen: dict[str, str] = {}
    groups = (("ego_vehicles", egos), ("npc_vehicles", npc_vehicles),
              ("npc_walkers", npc_walkers), ("npc_obstacles", npc_obstacles))
    for group_name, actors in groups:
        for i, actor in enumerate(actors):
            if actor.id in seen:
                raise SchemaError(f"{group_name}[{i}].id",
                                  f"duplicate actor id '{actor.id}' (first used at {seen[actor.id]})")
            seen[actor.id] = f"{group_name}[{i}].id"

    return Scenario(
        scenario_id=scenario_id,
        ego_vehicles=egos,
        npc_vehicles=npc_vehicles,
        npc_walkers=npc_walkers,
        npc_obstacles=npc_obstacles,
        map_region=_parse_map_region(_require(root, "map_region", ""), "map_region"),
        weather=_parse_weather(_require(root, "weather", ""), "weather"),
        traffic_lights=_parse_traffic_lights(_require(root, "traffic_lights", ""), "traffic_lights"),
    )


# --------------------------------------------------------------------- #
# Serialization
# --------------------------------------------------------------------- #

def _waypoint_doc(wp: Waypoint) -> dict:
    return {"x": wp.x, "y": wp.y, "target_speed": wp.target_speed}


def _route_doc(route: Route) -> list:
    return [_waypoint_doc(wp) for wp in route.waypoints]


def scenario_doc(s: Scenario) -> dict:
    """Scenario as a plain dict with the documented key order."""
    region = None
    if s.map_region.region is not None:
        min_x, max_x, min_y, max_y = s.map_region.region
        region = {"min_x": min_x, "max_x": max_x, "min_y": min_y, "max_y": max_y}
    return {
        "scenario_id": s.scenario_id,
        "ego_vehicles": [
            {"id": e.id, "model": e.model, "route": _route_doc(e.route),
             "start_time": e.start_time, "agent_config_ref": e.agent_config_ref}
            for e in s.ego_vehicles
        ],
        "npc_vehicles": [
            {"id": n.id, "model": n.model, "route": _route_doc(n.route), "start_time": n.start_time}
            for n in s.npc_vehicles
        ],
        "npc_walkers": [
            {"id": n.id, "model": n.model, "route": _route_doc(n.route), "start_time": n.start_time}
            for n in s.npc_walkers
        ],
        "npc_obstacles": [
            {"id": n.id, "model": n.model,
             "location": {"x": n.location[0], "y": n.location[1], "heading": n.location[2]}}
            for n in s.npc_obstacles
        ],
        "map_region": {"town": s.map_region.town, "region": region},
        "weather": {
            "cloudiness": s.weather.cloudiness,
            "precipitation": s.weather.precipitation,
            "wind_intensity": s.weather.wind_intensity,
            "fog_density": s.weather.fog_density,
            "sun_altitude": s.weather.sun_altitude,
        },
        "traffic_lights": {
            "green_time": s.traffic_lights.green_time,
            "yellow_time": s.traffic_lights.yellow_time,
            "red_time": s.traffic_lights.red_time,
        },
    }


def serialize_scenario(s: Scenario) -> str:
    return canonical_dumps(scenario_doc(s))


def normalize_scenario(s: Scenario) -> Scenario:
    """One serialize/parse pass; rounds every float to the canonical 6 digits."""
    return parse_scenario(serialize_scenario(s))
