"""Evolutionary search over scenarios: mutation, oracles, feedback, selection.

The engine is a sequential coordinator; only batch execution (delegated to
an executor) runs concurrently. Per-offspring RNG streams derive from
(run seed, generation, slot), so results never depend on scheduling order.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .catalog import NPC_VEHICLE_MODELS, VehicleModelCatalog
from .errors import NoLaneNearPointError, UnreachableError
from .geometry import obb_distance, obb_intersects
from .roadnet import RoadNetwork, route_length, shortest_route
from .scenario import NpcVehicleSpec, Route, Scenario, Waypoint, WeatherSpec
from .traces import (KIND_NPC_VEHICLE, KIND_TRAFFIC_LIGHT, TERM_AGENT_FAILURE,
                     TERM_MAX_TIME, Trace)
from .validate import validate_scenario
from .world import spawn_conflict

ORACLE_COLLISION = "collision"
ORACLE_STUCK = "stuck"
ORACLE_COMPLETION = "completion"
ORACLES = (ORACLE_COLLISION, ORACLE_STUCK, ORACLE_COMPLETION)

MUTATION_RETRIES = 20
DEFAULT_MUTATION_WEIGHTS = {
    "add_npc": 0.3,
    "remove_npc": 0.1,
    "perturb_route": 0.25,
    "perturb_start_time": 0.15,
    "perturb_weather": 0.1,
    "perturb_lights": 0.1,
}

NPC_ROUTE_MIN = 20.0
NPC_ROUTE_MAX = 100.0
NPC_START_TIME_MAX = 20.0
CORRIDOR_ANCHOR_RADIUS = 25.0
REROUTE_RADIUS = 15.0

V_STUCK = 0.1   # m/s
T_STUCK = 30.0  # s


@dataclass(frozen=True)
class TesterConfig:
    __test__ = False  # keep pytest from collecting this as a test class

    tester_kind: str = "genetic"  # "random" | "genetic"
    population_size: int = 8
    generations: int = 10
    mutation_weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_MUTATION_WEIGHTS))
    elite_count: int = 2
    tournament_size: int = 3
    rng_seed: int = 0
    oracles: tuple[str, ...] = ORACLES
    fitness_kind: str = "min_distance"
    stop_on_first_violation: bool = False

    def __post_init__(self):
        if self.tester_kind not in ("random", "genetic"):
            raise ValueError(f"unknown tester_kind '{self.tester_kind}'")
        if self.population_size < 1 or self.generations < 1:
            raise ValueError("population_size and generations must be >= 1")
        if not (0 <= self.elite_count <= self.population_size):
            raise ValueError("elite_count must be in [0, population_size]")
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be >= 2")
        for oracle in self.oracles:
            if oracle not in ORACLES:
                raise ValueError(f"unknown oracle '{oracle}'")
        if self.fitness_kind != "min_distance":
            raise ValueError(f"unknown fitness_kind '{self.fitness_kind}'")
        unknown = set(self.mutation_weights) - set(DEFAULT_MUTATION_WEIGHTS)
        if unknown:
            raise ValueError(f"unknown mutation operators: {sorted(unknown)}")


@dataclass(frozen=True)
class Individual:
    individual_id: str
    scenario: Scenario
    parent_id: str | None
    generation: int


@dataclass(frozen=True)
class OracleDetail:
    actors: tuple[str, ...]
    step: int
    x: float
    y: float


@dataclass(frozen=True)
class OracleVerdict:
    oracle: str
    violated: bool
    detail: OracleDetail | None = None

    def __post_init__(self):
        if self.violated != (self.detail is not None):
            raise ValueError("detail must be present iff violated")


@dataclass(frozen=True)
class Evaluation:
    individual_id: str
    verdicts: tuple[OracleVerdict, ...]
    fitness: float
    trace_ref: str
    agent_failure: bool = False

    @property
    def violated(self) -> bool:
        return any(v.violated for v in self.verdicts)


@dataclass(frozen=True)
class Evaluated:
    individual: Individual
    evaluation: Evaluation


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    records: tuple[Evaluated, ...]
    best_fitness: float
    violation_count: int


@dataclass(frozen=True)
class RunReport:
    scenario_id: str
    tester_kind: str
    rng_seed: int
    generations: tuple[GenerationRecord, ...]
    best_fitness_per_generation: tuple[float, ...]
    violating_individual_ids: tuple[str, ...]
    aborted: bool = False


# Executor: index-aligned (trace, trace_ref) per individual.
Executor = Callable[[Sequence[Individual]], list[tuple[Trace, str]]]


class RunObserver:
    """Persistence hooks; the default observer keeps everything in memory."""

    def on_individual(self, individual: Individual, evaluation: Evaluation,
                      trace: Trace) -> None:
        pass

    def on_generation(self, record: GenerationRecord) -> None:
        pass


# --------------------------------------------------------------------- #
# Mutation
# --------------------------------------------------------------------- #

def _slot_rng(run_seed: int, generation: int, slot: int) -> random.Random:
    return random.Random(f"{run_seed}:{generation}:{slot}")


def _next_npc_id(s: Scenario) -> str:
    taken = {a.id for a in s.all_actors()}
    n = 0
    while f"npc{n}" in taken:
        n += 1
    return f"npc{n}"


def _route_near_corridor(parent: Scenario, net: RoadNetwork,
                         rng: random.Random) -> Route | None:
    ego = parent.ego_vehicles[rng.randrange(len(parent.ego_vehicles))]
    wps = ego.route.waypoints
    anchor_a = wps[rng.randrange(len(wps))]
    anchor_b = wps[rng.randrange(len(wps))]
    starts = net.lanes_near((anchor_a.x, anchor_a.y), CORRIDOR_ANCHOR_RADIUS)
    goals = net.lanes_near((anchor_b.x, anchor_b.y), CORRIDOR_ANCHOR_RADIUS)
    if not starts or not goals:
        return None
    lid_s, arc_s, _ = starts[rng.randrange(len(starts))]
    lid_g, arc_g, _ = goals[rng.randrange(len(goals))]
    lane_s, lane_g = net.lanes[lid_s], net.lanes[lid_g]
    start = lane_s.point_at(min(max(arc_s + rng.uniform(-10.0, 10.0), 0.0), lane_s.length))
    goal = lane_g.point_at(min(max(arc_g + rng.uniform(-10.0, 10.0), 0.0), lane_g.length))
    try:
        route = shortest_route(net, start, goal)
    except (NoLaneNearPointError, UnreachableError):
        return None
    if not (NPC_ROUTE_MIN <= route_length(route) <= NPC_ROUTE_MAX):
        return None
    return route


def _op_add_npc(parent: Scenario, net, catalog, rng: random.Random) -> Scenario | None:
    route = _route_near_corridor(parent, net, rng)
    if route is None:
        return None
    speed_factor = rng.uniform(0.0, 1.0)
    route = Route(tuple(Waypoint(w.x, w.y, w.target_speed * speed_factor)
                        for w in route.waypoints))
    npc = NpcVehicleSpec(
        id=_next_npc_id(parent),
        model=NPC_VEHICLE_MODELS[rng.randrange(len(NPC_VEHICLE_MODELS))],
        route=route,
        start_time=rng.uniform(0.0, NPC_START_TIME_MAX),
    )
    return replace(parent, npc_vehicles=parent.npc_vehicles + (npc,))


def _op_remove_npc(parent: Scenario, net, catalog, rng: random.Random) -> Scenario | None:
    pool = [("npc_vehicles", i) for i in range(len(parent.npc_vehicles))]
    pool += [("npc_walkers", i) for i in range(len(parent.npc_walkers))]
    pool += [("npc_obstacles", i) for i in range(len(parent.npc_obstacles))]
    if not pool:
        return None
    group, idx = pool[rng.randrange(len(pool))]
    actors = getattr(parent, group)
    return replace(parent, **{group: actors[:idx] + actors[idx + 1:]})


def _op_perturb_route(parent: Scenario, net, catalog, rng: random.Random) -> Scenario | None:
    if not parent.npc_vehicles:
        return None
    idx = rng.randrange(len(parent.npc_vehicles))
    npc = parent.npc_vehicles[idx]
    route = npc.route
    mode = rng.random()  # <0.4 speeds, <0.7 endpoint, else both
    if mode >= 0.4:
        end = rng.random() < 0.5  # True: move the goal, False: move the start
        old = route.waypoints[-1] if end else route.waypoints[0]
        near = net.lanes_near((old.x, old.y), REROUTE_RADIUS)
        if not near:
            return None
        lid, arc, _ = near[rng.randrange(len(near))]
        lane = net.lanes[lid]
        point = lane.point_at(min(max(arc + rng.uniform(-5.0, 5.0), 0.0), lane.length))
        a = (route.waypoints[0].x, route.waypoints[0].y) if end else point
        b = point if end else (route.waypoints[-1].x, route.waypoints[-1].y)
        try:
            route = shortest_route(net, a, b)
        except (NoLaneNearPointError, UnreachableError):
            return None
    if mode < 0.4 or mode >= 0.7:
        route = Route(tuple(
            Waypoint(w.x, w.y, max(w.target_speed + rng.gauss(0.0, 1.0), 0.0))
            for w in route.waypoints))
    vehicles = list(parent.npc_vehicles)
    vehicles[idx] = replace(npc, route=route)
    return replace(parent, npc_vehicles=tuple(vehicles))


def _op_perturb_start_time(parent: Scenario, net, catalog, rng: random.Random) -> Scenario | None:
    pool = [("npc_vehicles", i) for i in range(len(parent.npc_vehicles))]
    pool += [("npc_walkers", i) for i in range(len(parent.npc_walkers))]
    if not pool:
        return None
    group, idx = pool[rng.randrange(len(pool))]
    actors = list(getattr(parent, group))
    actor = actors[idx]
    actors[idx] = replace(actor, start_time=max(actor.start_time + rng.gauss(0.0, 2.0), 0.0))
    return replace(parent, **{group: tuple(actors)})


def _op_perturb_weather(parent: Scenario, net, catalog, rng: random.Random) -> Scenario:
    def jitter(value, lo, hi):
        return min(max(value + rng.gauss(0.0, 10.0), lo), hi)

    w = parent.weather
    return replace(parent, weather=WeatherSpec(
        cloudiness=jitter(w.cloudiness, 0.0, 100.0),
        precipitation=jitter(w.precipitation, 0.0, 100.0),
        wind_intensity=jitter(w.wind_intensity, 0.0, 100.0),
        fog_density=jitter(w.fog_density, 0.0, 100.0),
        sun_altitude=jitter(w.sun_altitude, -90.0, 90.0),
    ))


def _op_perturb_lights(parent: Scenario, net, catalog, rng: random.Random) -> Scenario:
    name = ("green_time", "yellow_time", "red_time")[rng.randrange(3)]
    lights = parent.traffic_lights
    value = max(getattr(lights, name) + rng.gauss(0.0, 2.0), 1.0)
    return replace(parent, traffic_lights=replace(lights, **{name: value}))


_MUTATION_OPS = {
    "add_npc": _op_add_npc,
    "remove_npc": _op_remove_npc,
    "perturb_route": _op_perturb_route,
    "perturb_start_time": _op_perturb_start_time,
    "perturb_weather": _op_perturb_weather,
    "perturb_lights": _op_perturb_lights,
}


def mutate(parent: Scenario, cfg: TesterConfig, net: RoadNetwork,
           catalog: VehicleModelCatalog, rng: random.Random) -> Scenario:
    """One weighted mutation operator, revalidated; up to 20 draws, then
    the parent is returned unchanged. Ego routes are never touched."""
    names = [n for n in DEFAULT_MUTATION_WEIGHTS if cfg.mutation_weights.get(n, 0.0) > 0.0]
    if not names:
        return parent
    weights = [cfg.mutation_weights[n] for n in names]
    for _ in range(MUTATION_RETRIES):
        name = rng.choices(names, weights=weights, k=1)[0]
        candidate = _MUTATION_OPS[name](parent, net, catalog, rng)
        if candidate is None:
            continue
        if spawn_conflict(candidate, catalog) is not None:
            continue
        if validate_scenario(candidate, net, catalog).ok:
            return candidate
    return parent


# --------------------------------------------------------------------- #
# Oracles and feedback
# --------------------------------------------------------------------- #

def oracle_collision(trace: Trace) -> OracleVerdict:
    """Violated iff any recorded ego footprint intersects another actor's."""
    for obs in trace.observations:
        for i, ego in enumerate(obs.egos):
            for other in (*obs.egos[i + 1:], *obs.other_actors):
                if other.kind == KIND_TRAFFIC_LIGHT:
                    continue
                if obb_intersects(ego.pose, ego.extent, other.pose, other.extent):
                    return OracleVerdict(ORACLE_COLLISION, True, OracleDetail(
                        actors=(ego.id, other.id), step=obs.step,
                        x=(ego.x + other.x) / 2.0, y=(ego.y + other.y) / 2.0))
    return OracleVerdict(ORACLE_COLLISION, False)


def oracle_stuck(trace: Trace, v_stuck: float = V_STUCK,
                 t_stuck: float = T_STUCK) -> OracleVerdict:
    """Violated iff an active ego stays below v_stuck for t_stuck seconds
    while its route is incomplete."""
    first_violation: dict[str, tuple[int, float, float]] = {}
    ego_ids = [e.id for e in trace.observations[0].egos]
    for ego_id in ego_ids:
        goal = trace.ego_goals.get(ego_id)
        run_start = None
        for obs in trace.observations:
            state = next((e for e in obs.egos if e.id == ego_id), None)
            if state is None:
                continue
            incomplete = (goal is None or
                          math.hypot(state.x - goal.x, state.y - goal.y) > trace.goal_radius)
            if state.active and incomplete and state.speed < v_stuck:
                if run_start is None:
                    run_start = obs.timestamp
                if obs.timestamp - run_start >= t_stuck:
                    first_violation[ego_id] = (obs.step, state.x, state.y)
                    break
            else:
                run_start = None
    if not first_violation:
        return OracleVerdict(ORACLE_STUCK, False)
    first_id = min(first_violation, key=lambda eid: (first_violation[eid][0], eid))
    step, x, y = first_violation[first_id]
    return OracleVerdict(ORACLE_STUCK, True, OracleDetail(
        actors=tuple(sorted(first_violation)), step=step, x=x, y=y))


def oracle_completion(trace: Trace, goal_radius: float | None = None) -> OracleVerdict:
    """Violated iff the time budget ran out with an ego away from its goal."""
    if trace.termination != TERM_MAX_TIME:
        return OracleVerdict(ORACLE_COMPLETION, False)
    radius = goal_radius if goal_radius is not None else trace.goal_radius
    last = trace.observations[-1]
    missed = []
    for ego in last.egos:
        goal = trace.ego_goals.get(ego.id)
        if goal is None or math.hypot(ego.x - goal.x, ego.y - goal.y) > radius:
            missed.append(ego)
    if not missed:
        return OracleVerdict(ORACLE_COMPLETION, False)
    return OracleVerdict(ORACLE_COMPLETION, True, OracleDetail(
        actors=tuple(sorted(e.id for e in missed)), step=last.step,
        x=missed[0].x, y=missed[0].y))


def fitness_min_distance(trace: Trace) -> float:
    """Minimum ego-to-NPC-vehicle footprint distance over the whole trace.

    Sentinel (the sensing radius) when no NPC vehicle ever appears.
    """
    best = math.inf
    found = False
    for obs in trace.observations:
        for ego in obs.egos:
            for other in obs.other_actors:
                if other.kind != KIND_NPC_VEHICLE:
                    continue
                found = True
                d = obb_distance(ego.pose, ego.extent, other.pose, other.extent)
                if d < best:
                    best = d
                    if best == 0.0:
                        return 0.0
    return best if found else trace.sensing_radius


_ORACLE_FNS = {
    ORACLE_COLLISION: lambda trace: oracle_collision(trace),
    ORACLE_STUCK: lambda trace: oracle_stuck(trace),
    ORACLE_COMPLETION: lambda trace: oracle_completion(trace),
}


def evaluate_trace(individual_id: str, trace: Trace, trace_ref: str,
                   oracles: Sequence[str]) -> Evaluation:
    verdicts = tuple(_ORACLE_FNS[name](trace) for name in oracles)
    failed = trace.termination == TERM_AGENT_FAILURE
    fitness = trace.sensing_radius if failed else fitness_min_distance(trace)
    return Evaluation(individual_id=individual_id, verdicts=verdicts,
                      fitness=fitness, trace_ref=trace_ref, agent_failure=failed)


# --------------------------------------------------------------------- #
# Selection and the search loop
# --------------------------------------------------------------------- #

def select(evals: Sequence[Evaluated], n: int, cfg: TesterConfig,
           rng: random.Random) -> list[Individual]:
    """Elites first (E lowest fitness, ties by id), then tournament winners.

    The caller keeps the first E unchanged and mutates the rest.
    """
    if not evals:
        raise ValueError("select needs at least one evaluation")
    ranked = sorted(evals, key=lambda ev: (ev.evaluation.fitness, ev.individual.individual_id))
    parents = [ev.individual for ev in ranked[:cfg.elite_count]]
    k = min(cfg.tournament_size, len(evals))
    for _ in range(n - len(parents)):
        contestants = rng.sample(list(evals), k)
        winner = min(contestants,
                     key=lambda ev: (ev.evaluation.fitness, ev.individual.individual_id))
        parents.append(winner.individual)
    return parents


def run_search(seed: Scenario, tcfg: TesterConfig, executor: Executor,
               net: RoadNetwork, catalog: VehicleModelCatalog,
               observer: RunObserver | None = None) -> RunReport:
    """The full mutate -> execute -> judge -> select loop.

    Generation 0 is N mutations of the seed. The random tester re-mutates
    the original seed each generation regardless of results; the genetic
    tester carries elites and mutates tournament-selected parents.
    """
    observer = observer if observer is not None else RunObserver()
    n = tcfg.population_size

    def offspring(generation: int, slot: int, parent_scenario: Scenario,
                  parent_id: str | None, mutate_it: bool) -> Individual:
        rng = _slot_rng(tcfg.rng_seed, generation, slot)
        scenario = mutate(parent_scenario, tcfg, net, catalog, rng) if mutate_it else parent_scenario
        scenario = replace(scenario, scenario_id=f"{seed.scenario_id}-g{generation:03d}i{slot:02d}")
        return Individual(individual_id=f"g{generation:03d}_i{slot:02d}",
                          scenario=scenario, parent_id=parent_id, generation=generation)

    population = [offspring(0, slot, seed, None, True) for slot in range(n)]
    generations: list[GenerationRecord] = []
    best_per_gen: list[float] = []
    violating: list[str] = []

    for generation in range(tcfg.generations):
        outcomes = executor(population)
        evaluated = []
        for individual, (trace, trace_ref) in zip(population, outcomes):
            evaluation = evaluate_trace(individual.individual_id, trace, trace_ref,
                                        tcfg.oracles)
            evaluated.append(Evaluated(individual, evaluation))
            observer.on_individual(individual, evaluation, trace)
        best = min(ev.evaluation.fitness for ev in evaluated)
        gen_violations = [ev.individual.individual_id for ev in evaluated
                          if ev.evaluation.violated]
        record = GenerationRecord(generation=generation, records=tuple(evaluated),
                                  best_fitness=best, violation_count=len(gen_violations))
        generations.append(record)
        best_per_gen.append(best)
        violating.extend(gen_violations)
        observer.on_generation(record)

        if generation == tcfg.generations - 1:
            break
        if tcfg.stop_on_first_violation and gen_violations:
            break

        if tcfg.tester_kind == "random":
            population = [offspring(generation + 1, slot, seed, None, True)
                          for slot in range(n)]
        else:
            rng = random.Random(f"{tcfg.rng_seed}:select:{generation}")
            parents = select(evaluated, n, tcfg, rng)
            population = []
            for slot, parent in enumerate(parents):
                keep = slot < tcfg.elite_count
                population.append(offspring(generation + 1, slot, parent.scenario,
                                            parent.individual_id, not keep))

    return RunReport(
        scenario_id=seed.scenario_id,
        tester_kind=tcfg.tester_kind,
        rng_seed=tcfg.rng_seed,
        generations=tuple(generations),
        best_fitness_per_generation=tuple(best_per_gen),
        violating_individual_ids=tuple(violating),
    )
