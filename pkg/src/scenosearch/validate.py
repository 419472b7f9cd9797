"""Scenario validation against a road network and model catalog."""

from __future__ import annotations

from dataclasses import dataclass

from .catalog import VehicleModelCatalog
from .roadnet import RoadNetwork, match_route_lanes, nearest_lane_point
from .scenario import Route, Scenario

OBSTACLE_LANE_TOLERANCE = 8.0  # meters beside a lane an obstacle may sit


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    path: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def ok(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "error"]


def _check_region(scenario: Scenario, route: Route, path: str, out: list[Finding]) -> None:
    for i, wp in enumerate(route.waypoints):
        if not scenario.map_region.contains(wp.x, wp.y):
            out.append(Finding("error", f"{path}.route[{i}]",
                               f"waypoint ({wp.x:.1f}, {wp.y:.1f}) outside map_region"))
            return  # one finding per route is enough


def _check_lane_route(net: RoadNetwork, route: Route, path: str, out: list[Finding]) -> None:
    lanes, bad_index = match_route_lanes(net, route)
    if lanes is None:
        out.append(Finding("error", f"{path}.route[{bad_index}]",
                           "waypoint is not connected to the previous one on the lane graph"))


def validate_scenario(s: Scenario, net: RoadNetwork,
                      catalog: VehicleModelCatalog) -> ValidationReport:
    """Checks routes, region containment, obstacle placement, and model keys.

    A scenario is valid iff the report contains no error findings.
    """
    out: list[Finding] = []
    if s.map_region.town != net.town:
        out.append(Finding("error", "map_region.town",
                           f"scenario town '{s.map_region.town}' does not match "
                           f"loaded network '{net.town}'"))
        return ValidationReport(tuple(out))

    groups = (("ego_vehicles", s.ego_vehicles), ("npc_vehicles", s.npc_vehicles),
              ("npc_walkers", s.npc_walkers), ("npc_obstacles", s.npc_obstacles))
    for group_name, actors in groups:
        for i, actor in enumerate(actors):
            path = f"{group_name}[{i}]"
            if actor.model not in catalog:
                out.append(Finding("error", f"{path}.model",
                                   f"unknown model '{actor.model}'"))
            if group_name == "npc_obstacles":
                x, y, _ = actor.location
                if not s.map_region.contains(x, y):
                    out.append(Finding("error", f"{path}.location",
                                       "obstacle outside map_region"))
                _, _, lateral = nearest_lane_point(net, (x, y))
                if lateral > OBSTACLE_LANE_TOLERANCE:
                    out.append(Finding("error", f"{path}.location",
                                       f"obstacle is {lateral:.1f} m from any lane"))
            else:
                _check_region(s, actor.route, path, out)
                # Walkers are point-mass followers and may leave the lanes.
                if group_name in ("ego_vehicles", "npc_vehicles"):
                    _check_lane_route(net, actor.route, path, out)
    return ValidationReport(tuple(out))
