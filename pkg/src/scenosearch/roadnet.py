"""Lane-graph road maps: loading, projection queries, routing, seed generation.

A map file is JSON: a town name, a list of lanes (polyline centerline,
successor lane ids, speed limit) and a list of junction records (member
connector lanes, signalized flag, approach lane -> signal group).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from heapq import heappop, heappush
from importlib import resources
from pathlib import Path

from .errors import (InfeasibleSeedError, MapIntegrityError, NoLaneNearPointError,
                     SchemaError, UnreachableError)
from .jsonio import loads
from .scenario import EgoSpec, MapRegionSpec, Route, Scenario, Waypoint

WAYPOINT_STEP = 2.0       # route discretization, meters
PROJECTION_TOLERANCE = 5.0  # max lateral distance for route endpoints, meters

Point = tuple[float, float]


# --------------------------------------------------------------------- #
# Polyline helpers
# --------------------------------------------------------------------- #

def cumulative_arcs(points: tuple[Point, ...]) -> tuple[float, ...]:
    arcs = [0.0]
    for i in range(1, len(points)):
        arcs.append(arcs[-1] + math.dist(points[i - 1], points[i]))
    return tuple(arcs)


def point_at_arc(points: tuple[Point, ...], arcs: tuple[float, ...], s: float) -> Point:
    if s <= 0.0:
        return points[0]
    if s >= arcs[-1]:
        return points[-1]
    for i in range(1, len(arcs)):
        if s <= arcs[i]:
            seg = arcs[i] - arcs[i - 1]
            t = (s - arcs[i - 1]) / seg
            ax, ay = points[i - 1]
            bx, by = points[i]
            return (ax + t * (bx - ax), ay + t * (by - ay))
    return points[-1]


def heading_at_arc(points: tuple[Point, ...], arcs: tuple[float, ...], s: float) -> float:
    s = min(max(s, 0.0), arcs[-1])
    for i in range(1, len(arcs)):
        if s <= arcs[i] or i == len(arcs) - 1:
            ax, ay = points[i - 1]
            bx, by = points[i]
            return math.atan2(by - ay, bx - ax)
    raise AssertionError("unreachable: arcs always has >= 2 entries")


def _project_to_segment(p: Point, a: Point, b: Point) -> tuple[float, float]:
    """Returns (t in [0,1] along ab, distance from p to the closest point)."""
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    seg_sq = dx * dx + dy * dy
    if seg_sq == 0.0:
        return 0.0, math.dist(p, a)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / seg_sq
    t = min(max(t, 0.0), 1.0)
    cx, cy = ax + t * dx, ay + t * dy
    return t, math.hypot(p[0] - cx, p[1] - cy)


def project_to_polyline(points: tuple[Point, ...], arcs: tuple[float, ...],
                        p: Point) -> tuple[float, float]:
    """Closest point on the polyline; returns (arc position, distance)."""
    best_arc, best_dist = 0.0, math.inf
    for i in range(1, len(points)):
        t, dist = _project_to_segment(p, points[i - 1], points[i])
        if dist < best_dist:
            best_dist = dist
            best_arc = arcs[i - 1] + t * (arcs[i] - arcs[i - 1])
    return best_arc, best_dist


# --------------------------------------------------------------------- #
# Network model
# --------------------------------------------------------------------- #

@dataclass(frozen=True)
class Lane:
    lane_id: str
    centerline: tuple[Point, ...]
    successors: tuple[str, ...]
    speed_limit: float
    arcs: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.centerline) < 2:
            raise ValueError(f"lane '{self.lane_id}' centerline needs >= 2 points")
        for x, y in self.centerline:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError(f"lane '{self.lane_id}' has non-finite points")
        object.__setattr__(self, "arcs", cumulative_arcs(self.centerline))
        if self.length <= 0.0:
            raise ValueError(f"lane '{self.lane_id}' has zero length")
        if self.speed_limit <= 0.0:
            raise ValueError(f"lane '{self.lane_id}' speed_limit must be positive")

    @property
    def length(self) -> float:
        return self.arcs[-1]

    def point_at(self, s: float) -> Point:
        return point_at_arc(self.centerline, self.arcs, s)

    def heading_at(self, s: float) -> float:
        return heading_at_arc(self.centerline, self.arcs, s)

    def project(self, p: Point) -> tuple[float, float]:
        return project_to_polyline(self.centerline, self.arcs, p)


@dataclass(frozen=True)
class Junction:
    junction_id: str
    members: tuple[str, ...]
    signalized: bool
    approaches: dict[str, int]  # approach lane id -> signal group 0 or 1
    center: Point


_GRID_CELL = 12.0


class RoadNetwork:
    """Immutable directed lane graph with a segment grid for fast queries."""

    def __init__(self, town: str, lanes: dict[str, Lane], junctions: tuple[Junction, ...]):
        self.town = town
        self.lanes = lanes
        self.junctions = junctions
        self.junction_of_member = {m: j for j in junctions for m in j.members}
        self.junction_of_approach = {a: j for j in junctions for a in j.approaches}
        self._check_integrity()
        self._grid: dict[tuple[int, int], list[tuple[str, int]]] = {}
        for lane in lanes.values():
            pts = lane.centerline
            for i in range(1, len(pts)):
                (ax, ay), (bx, by) = pts[i - 1], pts[i]
                for cx in range(int(min(ax, bx) // _GRID_CELL), int(max(ax, bx) // _GRID_CELL) + 1):
                    for cy in range(int(min(ay, by) // _GRID_CELL), int(max(ay, by) // _GRID_CELL) + 1):
                        self._grid.setdefault((cx, cy), []).append((lane.lane_id, i))

    def _check_integrity(self):
        for lane in self.lanes.values():
            for succ in lane.successors:
                if succ not in self.lanes:
                    raise MapIntegrityError(
                        f"lane '{lane.lane_id}' references missing successor '{succ}'")
        for junction in self.junctions:
            for member in junction.members:
                if member not in self.lanes:
                    raise MapIntegrityError(
                        f"junction '{junction.junction_id}' references missing lane '{member}'")
            for approach, group in junction.approaches.items():
                if approach not in self.lanes:
                    raise MapIntegrityError(
                        f"junction '{junction.junction_id}' references missing lane '{approach}'")
                if junction.signalized and group not in (0, 1):
                    raise MapIntegrityError(
                        f"junction '{junction.junction_id}' approach '{approach}' has bad group")

    def __eq__(self, other):
        return (isinstance(other, RoadNetwork) and self.town == other.town
                and self.lanes == other.lanes and self.junctions == other.junctions)

    def _segments_near(self, p: Point, radius: float) -> list[tuple[str, int]]:
        cx, cy = int(p[0] // _GRID_CELL), int(p[1] // _GRID_CELL)
        reach = int(radius // _GRID_CELL) + 1
        found: set[tuple[str, int]] = set()
        for ix in range(cx - reach, cx + reach + 1):
            for iy in range(cy - reach, cy + reach + 1):
                found.update(self._grid.get((ix, iy), ()))
        return sorted(found)

    def lanes_near(self, p: Point, radius: float) -> list[tuple[str, float, float]]:
        """All lanes within ``radius`` lateral distance: (lane_id, arc, distance)."""
        per_lane: dict[str, tuple[float, float]] = {}
        for lane_id, seg in self._segments_near(p, radius):
            lane = self.lanes[lane_id]
            t, dist = _project_to_segment(p, lane.centerline[seg - 1], lane.centerline[seg])
            if dist <= radius:
                arc = lane.arcs[seg - 1] + t * (lane.arcs[seg] - lane.arcs[seg - 1])
                cur = per_lane.get(lane_id)
                if cur is None or dist < cur[1]:
                    per_lane[lane_id] = (arc, dist)
        return [(lid, arc, dist) for lid, (arc, dist) in sorted(per_lane.items())]


# --------------------------------------------------------------------- #
# Loading
# --------------------------------------------------------------------- #

def parse_network(text: str) -> RoadNetwork:
    root = loads(text)
    if not isinstance(root, dict):
        raise SchemaError("", "map document must be an object")
    for key in ("town", "lanes", "junctions"):
        if key not in root:
            raise SchemaError(key, "missing required field")
    lanes: dict[str, Lane] = {}
    for i, entry in enumerate(root["lanes"]):
        path = f"lanes[{i}]"
        try:
            lane = Lane(
                lane_id=entry["lane_id"],
                centerline=tuple((float(x), float(y)) for x, y in entry["centerline"]),
                successors=tuple(entry["successors"]),
                speed_limit=float(entry["speed_limit"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(path, str(exc)) from exc
        if lane.lane_id in lanes:
            raise SchemaError(path, f"duplicate lane id '{lane.lane_id}'")
        lanes[lane.lane_id] = lane
    junctions = []
    for i, entry in enumerate(root["junctions"]):
        path = f"junctions[{i}]"
        try:
            junctions.append(Junction(
                junction_id=entry["junction_id"],
                members=tuple(entry["members"]),
                signalized=bool(entry["signalized"]),
                approaches={k: int(v) for k, v in entry["approaches"].items()},
                center=(float(entry["center"][0]), float(entry["center"][1])),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(path, str(exc)) from exc
    return RoadNetwork(str(root["town"]), lanes, tuple(junctions))


def load_network(path: str | Path) -> RoadNetwork:
    return parse_network(Path(path).read_text())


def available_towns() -> dict[str, str]:
    """Bundled town name -> importable map resource path."""
    towns = {}
    for item in resources.files("scenosearch.data").iterdir():
        if item.name.endswith(".map.json"):
            towns[item.name[: -len(".map.json")]] = str(item)
    return dict(sorted(towns.items()))


def load_town(town: str) -> RoadNetwork:
    resource = resources.files("scenosearch.data").joinpath(f"{town}.map.json")
    if not resource.is_file():
        known = ", ".join(available_towns()) or "(none)"
        raise MapIntegrityError(f"unknown town '{town}'; bundled towns: {known}")
    return parse_network(resource.read_text())


# --------------------------------------------------------------------- #
# Queries
# --------------------------------------------------------------------- #

def nearest_lane_point(net: RoadNetwork, p: Point) -> tuple[str, float, float]:
    """Lane projection minimizing lateral distance: (lane_id, arc, lateral).

    Ties are broken by lexicographically smallest lane_id.
    """
    for radius in (6.0, 20.0, 60.0, 200.0):
        best = None
        for lane_id, arc, dist in net.lanes_near(p, radius):
            if best is None or dist < best[2]:
                best = (lane_id, arc, dist)
        if best is not None and best[2] <= radius:
            return best
    best = None
    for lane_id in sorted(net.lanes):
        arc, dist = net.lanes[lane_id].project(p)
        if best is None or dist < best[2]:
            best = (lane_id, arc, dist)
    if best is None:
        raise NoLaneNearPointError("network has no lanes")
    return best


def route_length(r: Route) -> float:
    total = 0.0
    wps = r.waypoints
    for i in range(1, len(wps)):
        total += math.hypot(wps[i].x - wps[i - 1].x, wps[i].y - wps[i - 1].y)
    return total


def shortest_route(net: RoadNetwork, start: Point, goal: Point) -> Route:
    """Minimum-length lane-graph route between the projections of two points.

    Discretized every 2 m along lane centerlines; waypoint target_speed is
    the speed limit of the lane the sample lies on.
    """
    ls, arc_s, lat_s = nearest_lane_point(net, start)
    if lat_s > PROJECTION_TOLERANCE:
        raise NoLaneNearPointError(f"start point {start} is {lat_s:.1f} m from any lane")
    lg, arc_g, lat_g = nearest_lane_point(net, goal)
    if lat_g > PROJECTION_TOLERANCE:
        raise NoLaneNearPointError(f"goal point {goal} is {lat_g:.1f} m from any lane")
    if ls == lg and abs(arc_g - arc_s) <= 0.01:
        raise UnreachableError("start and goal project to the same lane point")

    best_total = math.inf
    best_chain: list[str] | None = None
    if ls == lg and arc_g > arc_s:
        best_total = arc_g - arc_s
        best_chain = [ls]

    # Dijkstra over lane starts: dist[l] = cost from the start point to the
    # beginning of lane l; lexicographic lane id breaks cost ties.
    start_lane = net.lanes[ls]
    dist: dict[str, float] = {}
    prev: dict[str, str | None] = {}
    heap: list[tuple[float, str]] = []
    for succ in sorted(start_lane.successors):
        cost = start_lane.length - arc_s
        if cost < dist.get(succ, math.inf):
            dist[succ] = cost
            prev[succ] = None
            heappush(heap, (cost, succ))
    while heap:
        cost, lane_id = heappop(heap)
        if cost > dist.get(lane_id, math.inf):
            continue
        lane = net.lanes[lane_id]
        for succ in sorted(lane.successors):
            cand = cost + lane.length
            if cand < dist.get(succ, math.inf):
                dist[succ] = cand
                prev[succ] = lane_id
                heappush(heap, (cand, succ))
    if lg in dist and dist[lg] + arc_g < best_total:
        best_total = dist[lg] + arc_g
        chain = [lg]
        node = prev[lg]
        while node is not None:
            chain.append(node)
            node = prev[node]
        chain.append(ls)
        best_chain = list(reversed(chain))

    if best_chain is None:
        raise UnreachableError(f"no lane path from {start} to {goal}")

    # Concatenate the traversed arc ranges and discretize.
    pieces: list[tuple[Lane, float, float]] = []
    if len(best_chain) == 1:
        pieces.append((net.lanes[ls], arc_s, arc_g))
    else:
        pieces.append((net.lanes[ls], arc_s, net.lanes[ls].length))
        for lane_id in best_chain[1:-1]:
            pieces.append((net.lanes[lane_id], 0.0, net.lanes[lane_id].length))
        pieces.append((net.lanes[lg], 0.0, arc_g))

    waypoints: list[Waypoint] = []
    carried = 0.0  # distance left until the next sample
    for lane, s_from, s_to in pieces:
        s = s_from + carried
        while s < s_to:
            x, y = lane.point_at(s)
            waypoints.append(Waypoint(x, y, lane.speed_limit))
            s += WAYPOINT_STEP
        carried = s - s_to
    final_lane, _, final_arc = pieces[-1]
    fx, fy = final_lane.point_at(final_arc)
    if len(waypoints) >= 2 and math.hypot(fx - waypoints[-1].x, fy - waypoints[-1].y) < 0.5:
        waypoints.pop()
    waypoints.append(Waypoint(fx, fy, final_lane.speed_limit))
    return Route(tuple(waypoints))


def match_route_lanes(net: RoadNetwork, route: Route,
                      lateral_tol: float = 2.5) -> tuple[list[str] | None, int]:
    """Assign a lane to every waypoint by walking the lane graph.

    Keeps every (lane, arc) hypothesis consistent with the walk so far, so
    crossing lanes inside junctions cannot derail the match. Returns
    (lane per waypoint, -1) or (None, index of the first disconnected
    waypoint).
    """
    wps = route.waypoints
    hypotheses: dict[str, float] = {}
    for lane_id, arc, _ in net.lanes_near((wps[0].x, wps[0].y), lateral_tol):
        hypotheses[lane_id] = arc
    if not hypotheses:
        return None, 0
    back: list[dict[str, tuple[float, str | None]]] = [
        {lid: (arc, None) for lid, arc in hypotheses.items()}]

    for i in range(1, len(wps)):
        candidates = net.lanes_near((wps[i].x, wps[i].y), lateral_tol)
        step: dict[str, tuple[float, str | None]] = {}
        for lane_id, arc, _ in candidates:
            for prev_id, prev_arc in hypotheses.items():
                if lane_id == prev_id and arc >= prev_arc - 0.5:
                    step[lane_id] = (arc, prev_id)
                    break
                if lane_id in net.lanes[prev_id].successors:
                    step[lane_id] = (arc, prev_id)
                    break
        if not step:
            return None, i
        hypotheses = {lid: arc for lid, (arc, _) in step.items()}
        back.append(step)

    # Walk the back-pointers from the final hypothesis for a consistent chain.
    lane = sorted(hypotheses)[0]
    result = [lane]
    for i in range(len(wps) - 1, 0, -1):
        parent = back[i][lane][1]
        lane = parent if parent is not None else lane
        result.append(lane)
    result.reverse()
    return result, -1


# --------------------------------------------------------------------- #
# Seed generation
# --------------------------------------------------------------------- #

SEED_RETRY_BUDGET = 10_000
DEFAULT_EGO_MODEL = "sedan"
DEFAULT_EGO_AGENT = "builtin:safe_follower"


def _road_lane_ids(net: RoadNetwork) -> list[str]:
    members = set(net.junction_of_member)
    return [lid for lid in net.lanes if lid not in members]


def draw_route(net: RoadNetwork, rng: random.Random, min_length: float,
               max_length: float, lane_pool: list[str] | None = None,
               budget: int = SEED_RETRY_BUDGET) -> Route:
    """Draw a random route whose length falls inside [min_length, max_length]."""
    pool = lane_pool if lane_pool is not None else _road_lane_ids(net)
    if not pool:
        raise InfeasibleSeedError("network has no road lanes to draw from")
    for _ in range(budget):
        start_lane = net.lanes[rng.choice(pool)]
        goal_lane = net.lanes[rng.choice(pool)]
        start = start_lane.point_at(rng.uniform(0.0, start_lane.length))
        goal = goal_lane.point_at(rng.uniform(0.0, goal_lane.length))
        try:
            route = shortest_route(net, start, goal)
        except (NoLaneNearPointError, UnreachableError):
            continue
        if min_length <= route_length(route) <= max_length:
            return route
    raise InfeasibleSeedError(
        f"no route with length in [{min_length}, {max_length}] m "
        f"after {budget} draws")


def generate_seed_scenarios(net: RoadNetwork, num: int, min_length: float,
                            max_length: float, rng_seed: int) -> list[Scenario]:
    """Seed scenarios: one ego task each, no NPCs, whole-map region."""
    if num < 1:
        raise ValueError("num must be >= 1")
    if not (0 < min_length < max_length):
        raise ValueError("need 0 < min_length < max_length")
    rng = random.Random(f"seedgen:{rng_seed}")
    seeds = []
    for i in range(num):
        route = draw_route(net, rng, min_length, max_length)
        ego = EgoSpec(id="ego", model=DEFAULT_EGO_MODEL, route=route,
                      start_time=0.0, agent_config_ref=DEFAULT_EGO_AGENT)
        seeds.append(Scenario(
            scenario_id=f"seed_{i:03d}",
            ego_vehicles=(ego,),
            map_region=MapRegionSpec(net.town, None),
        ))
    return seeds
