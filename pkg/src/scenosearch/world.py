"""Deterministic fixed-timestep 2-D world.

Spawns actors from a scenario, advances NPC and ego motion with a
forward-Euler kinematic bicycle (position integrates the post-update
speed), cycles traffic lights, detects collisions, and emits per-step
scene observations. One WorldState is confined to a single worker.
"""

from __future__ import annotations

import math
import time
from bisect import bisect_right
from dataclasses import dataclass

from .agents.base import AgentContext, Observation, VisibleLight
from .agents.base import run_step as agent_run_step
from .agents.base import setup_env as default_agent_factory
from .agents.control import lookahead_for, proportional_speed, pure_pursuit
from .catalog import ModelSpec, VehicleModelCatalog
from .errors import SpawnOverlapError
from .geometry import obb_intersects
from .roadnet import RoadNetwork, match_route_lanes
from .scenario import Route, Scenario, TrafficLightSpec, Waypoint
from .traces import (KIND_EGO, KIND_NPC_VEHICLE, KIND_OBSTACLE, KIND_TRAFFIC_LIGHT,
                     KIND_WALKER, TERM_AGENT_FAILURE, TERM_COLLISION, TERM_COMPLETED,
                     TERM_MAX_TIME, ActorState, AgentLog, EgoGoal, SceneObs, Trace)

ROUTE_END_MARGIN = 0.5       # meters of route left that count as "at the end"
PROGRESS_WINDOW = 25.0       # forward window for route projection, meters
GREEN, YELLOW, RED = "green", "yellow", "red"


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.05
    max_sim_time: float = 120.0
    sensing_radius: float = 50.0
    goal_radius: float = 2.0
    stop_on_collision: bool = True
    obs_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.max_sim_time < self.dt:
            raise ValueError("max_sim_time must be >= dt")
        if self.obs_stride < 1:
            raise ValueError("obs_stride must be >= 1")


@dataclass(frozen=True)
class LightPhase:
    junction_id: str
    group0: str
    group1: str

    def __post_init__(self):
        if self.group0 in (GREEN, YELLOW) and self.group1 != RED:
            raise ValueError("conflicting green phases")
        if self.group1 in (GREEN, YELLOW) and self.group0 != RED:
            raise ValueError("conflicting green phases")


def traffic_light_phase(t: float, spec: TrafficLightSpec) -> tuple[str, str]:
    """Phases of the two signal groups at time t.

    Group 0 cycles green -> yellow -> red from t=0; group 1 runs the
    complementary schedule (green while group 0 is red, with the same
    yellow duration, clipped if red_time <= yellow_time).
    """
    g, y, r = spec.green_time, spec.yellow_time, spec.red_time
    period = g + y + r
    tau = t % period
    if tau < g:
        group0 = GREEN
    elif tau < g + y:
        group0 = YELLOW
    else:
        group0 = RED
    green1 = max(r - y, 0.0)
    if tau < g + y:
        group1 = RED
    elif tau < g + y + green1:
        group1 = GREEN
    else:
        group1 = YELLOW
    return group0, group1


def kinematic_bicycle_step(x: float, y: float, heading: float, speed: float,
                           accel: float, steer: float, wheelbase: float,
                           max_speed: float, dt: float) -> tuple[float, float, float, float]:
    v = min(max(speed + accel * dt, 0.0), max_speed)
    heading = heading + (v / wheelbase) * math.tan(steer) * dt
    x = x + v * math.cos(heading) * dt
    y = y + v * math.sin(heading) * dt
    return x, y, heading, v


class RouteTracker:
    """Precomputed route geometry plus per-waypoint lane annotation."""

    def __init__(self, route: Route, lanes: list[str] | None):
        self.waypoints = route.waypoints
        self.points = tuple((wp.x, wp.y) for wp in self.waypoints)
        self.speeds = tuple(wp.target_speed for wp in self.waypoints)
        arcs = [0.0]
        for i in range(1, len(self.points)):
            arcs.append(arcs[-1] + math.dist(self.points[i - 1], self.points[i]))
        self.arcs = tuple(arcs)
        self.length = arcs[-1]
        self.lanes = lanes

    def project(self, p: tuple[float, float], prev_arc: float) -> float:
        """Arc position of p, searched within a forward window of prev_arc."""
        lo = max(0, bisect_right(self.arcs, prev_arc - 2.0) - 1)
        hi = min(len(self.points) - 1, bisect_right(self.arcs, prev_arc + PROGRESS_WINDOW))
        best_arc, best_dist = prev_arc, math.inf
        for i in range(lo, hi):
            ax, ay = self.points[i]
            bx, by = self.points[i + 1]
            dx, dy = bx - ax, by - ay
            seg_sq = dx * dx + dy * dy
            if seg_sq == 0.0:
                continue
            t = min(max(((p[0] - ax) * dx + (p[1] - ay) * dy) / seg_sq, 0.0), 1.0)
            dist = math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))
            if dist < best_dist:
                best_dist = dist
                best_arc = self.arcs[i] + t * math.sqrt(seg_sq)
        return best_arc

    def point_at(self, s: float) -> tuple[float, float]:
        if s <= 0.0:
            return self.points[0]
        if s >= self.length:
            return self.points[-1]
        i = bisect_right(self.arcs, s)
        seg = self.arcs[i] - self.arcs[i - 1]
        t = (s - self.arcs[i - 1]) / seg
        ax, ay = self.points[i - 1]
        bx, by = self.points[i]
        return (ax + t * (bx - ax), ay + t * (by - ay))

    def heading_at(self, s: float) -> float:
        i = min(max(bisect_right(self.arcs, s), 1), len(self.points) - 1)
        ax, ay = self.points[i - 1]
        bx, by = self.points[i]
        return math.atan2(by - ay, bx - ax)

    def suffix_from(self, s: float) -> tuple[Waypoint, ...]:
        i = bisect_right(self.arcs, s)
        if i >= len(self.waypoints):
            return (self.waypoints[-1],)
        return self.waypoints[i:]

    def min_speed_within(self, s: float, window: float) -> float:
        i = bisect_right(self.arcs, s)
        best = self.speeds[min(i, len(self.speeds) - 1)]
        while i < len(self.speeds) and self.arcs[i] <= s + window:
            best = min(best, self.speeds[i])
            i += 1
        return best

    def lane_index_at(self, s: float) -> int:
        return min(max(bisect_right(self.arcs, s) - 1, 0), len(self.points) - 1)

    def lane_at(self, s: float) -> str | None:
        if self.lanes is None:
            return None
        return self.lanes[self.lane_index_at(s)]

    def stop_line_arc(self, s: float) -> float | None:
        """Route arc where the current lane ends (next lane begins)."""
        if self.lanes is None:
            return None
        i = self.lane_index_at(s)
        current = self.lanes[i]
        for j in range(i + 1, len(self.lanes)):
            if self.lanes[j] != current:
                return self.arcs[j]
        return None


class _Actor:
    __slots__ = ("id", "kind", "model", "x", "y", "heading", "speed",
                 "start_time", "tracker", "progress", "completed")

    def __init__(self, actor_id: str, kind: str, model: ModelSpec, x: float, y: float,
                 heading: float, start_time: float, tracker: RouteTracker | None):
        self.id = actor_id
        self.kind = kind
        self.model = model
        self.x = x
        self.y = y
        self.heading = heading
        self.speed = 0.0
        self.start_time = start_time
        self.tracker = tracker
        self.progress = 0.0
        self.completed = False

    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.heading)


@dataclass(frozen=True)
class CollisionEvent:
    step: int
    id_a: str
    id_b: str
    x: float
    y: float


def npc_vehicle_action(actor: _Actor) -> tuple[float, float]:
    """Waypoint-following control: pure pursuit plus proportional speed.

    Target speed anticipates slower waypoints within braking distance; at
    the route end the vehicle brakes to a halt.
    """
    model = actor.model
    tracker = actor.tracker
    remaining = tracker.length - actor.progress
    if remaining <= ROUTE_END_MARGIN:
        return -model.max_decel, 0.0
    window = actor.speed ** 2 / (2.0 * max(model.max_decel, 0.1)) + 2.0
    target = tracker.min_speed_within(actor.progress, window)
    # comfort-braking speed cap so the vehicle settles at the route end
    v_stop = math.sqrt(model.max_decel * max(remaining - ROUTE_END_MARGIN, 0.0))
    accel = proportional_speed(actor.speed, min(target, v_stop),
                               model.max_accel, model.max_decel)
    steer = pure_pursuit(actor.x, actor.y, actor.heading,
                         tracker.suffix_from(actor.progress),
                         lookahead_for(actor.speed), model.wheelbase, model.max_steer)
    return accel, steer


class WorldState:
    def __init__(self, scenario: Scenario, net: RoadNetwork,
                 catalog: VehicleModelCatalog, cfg: SimConfig,
                 actors: dict[str, _Actor]):
        self.scenario = scenario
        self.net = net
        self.catalog = catalog
        self.cfg = cfg
        self.actors = actors
        self.ego_ids = [e.id for e in scenario.ego_vehicles]
        self.step = 0
        self.collisions: list[CollisionEvent] = []
        self._signalized = [j for j in net.junctions if j.signalized]
        self.light_phases: dict[str, LightPhase] = {}
        self._update_lights()

    @property
    def t(self) -> float:
        return self.step * self.cfg.dt

    def _update_lights(self) -> None:
        phases = {}
        for junction in self._signalized:
            g0, g1 = traffic_light_phase(self.t, self.scenario.traffic_lights)
            phases[junction.junction_id] = LightPhase(junction.junction_id, g0, g1)
        self.light_phases = phases

    def is_active(self, actor: _Actor) -> bool:
        return self.t >= actor.start_time

    def pending_ego_ids(self) -> list[str]:
        return [eid for eid in self.ego_ids
                if self.is_active(self.actors[eid]) and not self.actors[eid].completed]

    def _snapshot(self, actor: _Actor) -> ActorState:
        return ActorState(
            id=actor.id, kind=actor.kind, x=actor.x, y=actor.y,
            heading=actor.heading, speed=actor.speed, extent=actor.model.extent,
            active=self.is_active(actor), route_progress=actor.progress)

    def scene_obs(self, agent_logs: dict[str, AgentLog] | None = None) -> SceneObs:
        egos = []
        others = []
        for actor in self.actors.values():
            snap = self._snapshot(actor)
            (egos if actor.kind == KIND_EGO else others).append(snap)
        for junction in self._signalized:
            phase = self.light_phases[junction.junction_id]
            for group, state in (("g0", phase.group0), ("g1", phase.group1)):
                others.append(ActorState(
                    id=f"{junction.junction_id}#{group}", kind=KIND_TRAFFIC_LIGHT,
                    x=junction.center[0], y=junction.center[1], heading=0.0,
                    speed=0.0, extent=(0.1, 0.1), active=True,
                    route_progress=0.0, phase=state))
        return SceneObs(step=self.step, timestamp=self.t, egos=tuple(egos),
                        other_actors=tuple(others),
                        agent_logs=agent_logs if agent_logs is not None else {})

    def _move_vehicle(self, actor: _Actor, accel: float, steer: float) -> None:
        accel = min(max(accel, -actor.model.max_decel), actor.model.max_accel)
        steer = min(max(steer, -actor.model.max_steer), actor.model.max_steer)
        actor.x, actor.y, actor.heading, actor.speed = kinematic_bicycle_step(
            actor.x, actor.y, actor.heading, actor.speed, accel, steer,
            actor.model.wheelbase, actor.model.max_speed, self.cfg.dt)
        if actor.tracker is not None:
            actor.progress = actor.tracker.project((actor.x, actor.y), actor.progress)

    def _move_walker(self, actor: _Actor) -> None:
        tracker = actor.tracker
        if actor.progress >= tracker.length:
            actor.speed = 0.0
            return
        actor.speed = actor.model.max_speed
        actor.progress = min(actor.progress + actor.speed * self.cfg.dt, tracker.length)
        actor.x, actor.y = tracker.point_at(actor.progress)
        actor.heading = tracker.heading_at(actor.progress)
        if actor.progress >= tracker.length:
            actor.speed = 0.0

    def _detect_collisions(self) -> None:
        bodies = [a for a in self.actors.values()]
        for i in range(len(bodies)):
            a = bodies[i]
            for j in range(i + 1, len(bodies)):
                b = bodies[j]
                if a.kind == KIND_OBSTACLE and b.kind == KIND_OBSTACLE:
                    continue
                reach = (math.hypot(*a.model.extent) + math.hypot(*b.model.extent)) / 2.0
                if math.hypot(a.x - b.x, a.y - b.y) > reach:
                    continue
                if obb_intersects(a.pose(), a.model.extent, b.pose(), b.model.extent):
                    self.collisions.append(CollisionEvent(
                        self.step, a.id, b.id, (a.x + b.x) / 2.0, (a.y + b.y) / 2.0))

    def step_once(self, ego_actions: dict, agent_logs: dict[str, AgentLog]) -> SceneObs:
        """Advance one tick: NPCs, walkers, egos, collisions, lights, record."""
        for actor in self.actors.values():
            if not self.is_active(actor):
                continue
            if actor.kind == KIND_NPC_VEHICLE:
                accel, steer = npc_vehicle_action(actor)
                self._move_vehicle(actor, accel, steer)
            elif actor.kind == KIND_WALKER:
                self._move_walker(actor)
            elif actor.kind == KIND_EGO and not actor.completed:
                action = ego_actions[actor.id]
                self._move_vehicle(actor, action.accel, action.steer)
                goal = actor.tracker.points[-1]
                if math.hypot(actor.x - goal[0], actor.y - goal[1]) <= self.cfg.goal_radius:
                    actor.completed = True
                    actor.speed = 0.0
        self.step += 1
        self._detect_collisions()
        self._update_lights()
        return self.scene_obs(agent_logs)

    def collisions_at(self, step: int) -> list[CollisionEvent]:
        return [c for c in self.collisions if c.step == step]

    def all_egos_completed(self) -> bool:
        return all(self.actors[eid].completed for eid in self.ego_ids)


def _spawn_pose(route: Route) -> tuple[float, float, float]:
    first, second = route.waypoints[0], route.waypoints[1]
    heading = math.atan2(second.y - first.y, second.x - first.x)
    return first.x, first.y, heading


def spawn_conflict(s: Scenario, catalog: VehicleModelCatalog) -> tuple[str, str] | None:
    """First pair of actors whose spawn footprints intersect, if any."""
    bodies = []
    for actor in (*s.ego_vehicles, *s.npc_vehicles, *s.npc_walkers):
        x, y, heading = _spawn_pose(actor.route)
        bodies.append((actor.id, (x, y, heading), catalog[actor.model].extent))
    for obstacle in s.npc_obstacles:
        bodies.append((obstacle.id, obstacle.location, catalog[obstacle.model].extent))
    for i in range(len(bodies)):
        for j in range(i + 1, len(bodies)):
            if obb_intersects(bodies[i][1], bodies[i][2], bodies[j][1], bodies[j][2]):
                return bodies[i][0], bodies[j][0]
    return None


def init_world(s: Scenario, net: RoadNetwork, catalog: VehicleModelCatalog,
               cfg: SimConfig) -> WorldState:
    """Spawn all actors at their route starts / obstacle locations.

    Actors with start_time > 0 spawn frozen but occupy space, so overlap
    checking covers them too; raises SpawnOverlapError naming both ids.
    """
    actors: dict[str, _Actor] = {}

    def add(actor: _Actor):
        actors[actor.id] = actor

    for ego in s.ego_vehicles:
        lanes, _ = match_route_lanes(net, ego.route)
        x, y, heading = _spawn_pose(ego.route)
        add(_Actor(ego.id, KIND_EGO, catalog[ego.model], x, y, heading,
                   ego.start_time, RouteTracker(ego.route, lanes)))
    for npc in s.npc_vehicles:
        lanes, _ = match_route_lanes(net, npc.route)
        x, y, heading = _spawn_pose(npc.route)
        add(_Actor(npc.id, KIND_NPC_VEHICLE, catalog[npc.model], x, y, heading,
                   npc.start_time, RouteTracker(npc.route, lanes)))
    for walker in s.npc_walkers:
        x, y, heading = _spawn_pose(walker.route)
        add(_Actor(walker.id, KIND_WALKER, catalog[walker.model], x, y, heading,
                   walker.start_time, RouteTracker(walker.route, None)))
    for obstacle in s.npc_obstacles:
        x, y, heading = obstacle.location
        add(_Actor(obstacle.id, KIND_OBSTACLE, catalog[obstacle.model], x, y,
                   heading, 0.0, None))

    conflict = spawn_conflict(s, catalog)
    if conflict is not None:
        raise SpawnOverlapError(*conflict)
    return WorldState(s, net, catalog, cfg, actors)


def step_world(world: WorldState, ego_actions: dict,
               agent_logs: dict[str, AgentLog] | None = None) -> tuple[WorldState, SceneObs]:
    """One simulation tick; mutates and returns the same world instance."""
    return world, world.step_once(ego_actions, agent_logs or {})


def build_observation(world: WorldState, ego_id: str) -> Observation:
    me = world.actors[ego_id]
    cfg = world.cfg
    nearby = []
    for actor in world.actors.values():
        if actor.id == ego_id:
            continue
        dist = math.hypot(actor.x - me.x, actor.y - me.y)
        if dist <= cfg.sensing_radius:
            nearby.append((dist, actor.id, world._snapshot(actor)))
    nearby.sort(key=lambda item: (item[0], item[1]))

    visible = None
    lane = me.tracker.lane_at(me.progress) if me.tracker is not None else None
    junction = world.net.junction_of_approach.get(lane) if lane is not None else None
    if junction is not None and junction.signalized:
        d_center = math.hypot(junction.center[0] - me.x, junction.center[1] - me.y)
        if d_center <= cfg.sensing_radius:
            phase = world.light_phases[junction.junction_id]
            stop_arc = me.tracker.stop_line_arc(me.progress)
            visible = VisibleLight(
                junction_id=junction.junction_id,
                x=junction.center[0], y=junction.center[1], distance=d_center,
                stop_line_distance=(stop_arc - me.progress) if stop_arc is not None else None,
                approach_group=junction.approaches[lane],
                group0=phase.group0, group1=phase.group1)
    if visible is None:
        best = None
        for j in world._signalized:
            d = math.hypot(j.center[0] - me.x, j.center[1] - me.y)
            if d <= cfg.sensing_radius and (best is None or d < best[0]):
                best = (d, j)
        if best is not None:
            phase = world.light_phases[best[1].junction_id]
            visible = VisibleLight(
                junction_id=best[1].junction_id, x=best[1].center[0],
                y=best[1].center[1], distance=best[0], stop_line_distance=None,
                approach_group=None, group0=phase.group0, group1=phase.group1)

    return Observation(
        step=world.step, timestamp=world.t, self_state=world._snapshot(me),
        nearby_actors=tuple(snap for _, _, snap in nearby),
        visible_light=visible,
        remaining_route=me.tracker.suffix_from(me.progress))


def run_scenario(s: Scenario, agent_factory, net: RoadNetwork,
                 catalog: VehicleModelCatalog, cfg: SimConfig) -> Trace:
    """Closed-loop execution of one scenario into a Trace.

    Terminates on: every ego within goal_radius of its final waypoint, any
    ego collision (when stop_on_collision), the simulated-time budget, or
    an unrecoverable agent error.
    """
    start_clock = time.perf_counter()
    factory = agent_factory if agent_factory is not None else default_agent_factory
    world = init_world(s, net, catalog, cfg)

    ego_goals = {}
    for ego in s.ego_vehicles:
        tracker = world.actors[ego.id].tracker
        gx, gy = tracker.points[-1]
        ego_goals[ego.id] = EgoGoal(gx, gy, tracker.length)

    observations = [world.scene_obs()]
    termination = None
    error = None

    handles = {}
    try:
        for ego in s.ego_vehicles:
            ctx = AgentContext(ego_id=ego.id, route=ego.route,
                               vehicle_limits=catalog[ego.model], weather=s.weather,
                               dt=cfg.dt, sensing_radius=cfg.sensing_radius)
            try:
                handles[ego.id] = factory(ego.agent_config_ref, ctx)
            except Exception as exc:
                termination = TERM_AGENT_FAILURE
                error = f"agent setup for '{ego.id}' failed: {exc}"
                break

        while termination is None:
            actions: dict = {}
            logs: dict[str, AgentLog] = {}
            for ego_id in world.pending_ego_ids():
                obs = build_observation(world, ego_id)
                try:
                    action, log = agent_run_step(handles[ego_id], obs)
                except Exception as exc:
                    termination = TERM_AGENT_FAILURE
                    error = f"agent '{ego_id}' failed at step {world.step}: {exc}"
                    break
                actions[ego_id] = action
                logs[ego_id] = log
            if termination is not None:
                break
            sobs = world.step_once(actions, logs)
            if world.step % cfg.obs_stride == 0:
                observations.append(sobs)
            ego_hit = any(c.id_a in world.ego_ids or c.id_b in world.ego_ids
                          for c in world.collisions_at(world.step))
            if cfg.stop_on_collision and ego_hit:
                termination = TERM_COLLISION
            elif world.all_egos_completed():
                termination = TERM_COMPLETED
            elif world.t >= cfg.max_sim_time:
                termination = TERM_MAX_TIME
            if termination is not None and observations[-1] is not sobs:
                observations.append(sobs)
    finally:
        for handle in handles.values():
            try:
                handle.close()
            except Exception:
                pass

    return Trace(
        scenario_id=s.scenario_id,
        town=s.map_region.town,
        dt=cfg.dt,
        sensing_radius=cfg.sensing_radius,
        goal_radius=cfg.goal_radius,
        seeds={},
        weather=s.weather,
        ego_goals=ego_goals,
        observations=tuple(observations),
        termination=termination,
        error=error,
        wall_clock=time.perf_counter() - start_clock,
    )
