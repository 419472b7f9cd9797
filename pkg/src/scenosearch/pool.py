"""Parallel batch execution across isolated simulator workers.

Each worker is a separate spawned process (its own session group) that
owns a private road network and simulator state; workers share nothing
but the task queue and the result channel. Scenarios that exceed their
wall-clock budget get their worker group killed and are reported as
agent_failure traces with a budget flag; one scenario's failure never
affects the others.
"""

from __future__ import annotations

import os
import queue
import signal
import time
from dataclasses import dataclass, field, replace

import multiprocessing as mp

from loguru import logger

from .catalog import VehicleModelCatalog
from .errors import PoolFailureError
from .roadnet import RoadNetwork, load_network, load_town
from .scenario import Scenario
from .traces import TERM_AGENT_FAILURE, EgoGoal, SceneObs, Trace
from .world import SimConfig, init_world, run_scenario


@dataclass(frozen=True)
class WorkerPoolConfig:
    worker_count: int = 1
    sim: SimConfig = field(default_factory=SimConfig)
    town: str | None = "Town01-lite"
    map_path: str | None = None  # overrides town when set
    scenario_budget: float = 300.0  # wall-clock seconds per scenario
    log_dir: str | None = None

    def __post_init__(self):
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        if self.town is None and self.map_path is None:
            raise ValueError("either town or map_path is required")


@dataclass(frozen=True)
class ExecResult:
    slot_index: int
    trace: Trace
    wall_clock: float
    worker_id: int
    budget_exceeded: bool = False


def bind_agents(scenario: Scenario, bindings: dict[str, str] | None) -> Scenario:
    """Apply per-ego agent bindings; '*' covers egos without an explicit one."""
    if not bindings:
        return scenario
    egos = []
    for ego in scenario.ego_vehicles:
        ref = bindings.get(ego.id, bindings.get("*"))
        egos.append(replace(ego, agent_config_ref=ref) if ref else ego)
    return replace(scenario, ego_vehicles=tuple(egos))


def _load_net(cfg: WorkerPoolConfig) -> RoadNetwork:
    if cfg.map_path is not None:
        return load_network(cfg.map_path)
    return load_town(cfg.town)


def _worker_main(worker_id: int, pool_cfg: WorkerPoolConfig,
                 catalog: VehicleModelCatalog, task_q, result_q) -> None:
    os.setsid()  # own group, so external agent children die with the worker
    logger.remove()
    if pool_cfg.log_dir is not None:
        logger.add(os.path.join(pool_cfg.log_dir, f"worker_{worker_id}.log"),
                   level="INFO", enqueue=False)
    net = _load_net(pool_cfg)
    logger.info("worker {} ready (town={})", worker_id, net.town)
    while True:
        msg = task_q.get()
        if msg is None:
            logger.info("worker {} shutting down", worker_id)
            return
        _, slot, scenario, bindings = msg
        result_q.put(("start", slot, worker_id))
        start = time.perf_counter()
        try:
            bound = bind_agents(scenario, bindings)
            trace = run_scenario(bound, None, net, catalog, pool_cfg.sim)
            result_q.put(("done", slot, worker_id, trace, time.perf_counter() - start))
            logger.info("worker {} finished slot {} ({})", worker_id, slot, trace.termination)
        except Exception as exc:
            logger.exception("worker {} failed on slot {}", worker_id, slot)
            result_q.put(("failed", slot, worker_id,
                          f"{type(exc).__name__}: {exc}", time.perf_counter() - start))


def _failure_trace(scenario: Scenario, net: RoadNetwork,
                   catalog: VehicleModelCatalog, cfg: SimConfig, error: str) -> Trace:
    """Placeholder trace for scenarios that never produced one."""
    try:
        world = init_world(scenario, net, catalog, cfg)
        observations = (world.scene_obs(),)
        ego_goals = {}
        for ego in scenario.ego_vehicles:
            tracker = world.actors[ego.id].tracker
            gx, gy = tracker.points[-1]
            ego_goals[ego.id] = EgoGoal(gx, gy, tracker.length)
    except Exception:
        observations = (SceneObs(0, 0.0, (), (), {}),)
        ego_goals = {}
    return Trace(scenario_id=scenario.scenario_id, town=scenario.map_region.town,
                 dt=cfg.dt, sensing_radius=cfg.sensing_radius,
                 goal_radius=cfg.goal_radius, seeds={}, weather=scenario.weather,
                 ego_goals=ego_goals, observations=observations,
                 termination=TERM_AGENT_FAILURE, error=error)


class WorkerPool:
    """K isolated execution workers fed from one shared queue."""

    def __init__(self, cfg: WorkerPoolConfig, catalog: VehicleModelCatalog):
        self.cfg = cfg
        self.catalog = catalog
        self.net = _load_net(cfg)
        self._ctx = mp.get_context("spawn")
        self._task_q = self._ctx.Queue()
        self._result_q = self._ctx.Queue()
        self._workers: dict[int, mp.process.BaseProcess] = {}
        self._next_worker_id = 0
        self._stop = self._ctx.Event()
        self._closed = False
        for _ in range(cfg.worker_count):
            self._spawn_worker()

    def _spawn_worker(self) -> None:
        worker_id = self._next_worker_id
        self._next_worker_id += 1
        proc = self._ctx.Process(
            target=_worker_main,
            args=(worker_id, self.cfg, self.catalog, self._task_q, self._result_q),
            daemon=False,
        )
        proc.start()
        self._workers[worker_id] = proc

    def _kill_worker(self, worker_id: int) -> None:
        proc = self._workers.pop(worker_id, None)
        if proc is None:
            return
        if proc.pid is not None:
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                pass
        if proc.is_alive():
            proc.kill()
        proc.join(timeout=5.0)

    def execute_batch(self, items: list[tuple], bindings_default: dict | None = None
                      ) -> list[ExecResult]:
        """Run scenarios work-stealing style; results are index-aligned.

        ``items`` entries are Scenario or (Scenario, bindings) pairs.
        """
        if self._closed:
            raise PoolFailureError("pool is shut down")
        if not items:
            raise ValueError("empty batch")
        tasks: list[tuple[Scenario, dict | None]] = []
        for item in items:
            if isinstance(item, tuple):
                tasks.append((item[0], item[1]))
            else:
                tasks.append((item, bindings_default))
        for slot, (scenario, bindings) in enumerate(tasks):
            self._task_q.put(("task", slot, scenario, bindings))

        results: dict[int, ExecResult] = {}
        running: dict[int, tuple[int, float]] = {}  # worker_id -> (slot, start)
        spontaneous_deaths = 0
        death_budget = len(tasks) + 2 * self.cfg.worker_count

        def synth(slot: int, worker_id: int, error: str, wall: float,
                  budget: bool) -> None:
            scenario, bindings = tasks[slot]
            trace = _failure_trace(bind_agents(scenario, bindings), self.net,
                                   self.catalog, self.cfg.sim, error)
            results.setdefault(slot, ExecResult(slot, trace, wall, worker_id,
                                                budget_exceeded=budget))

        while len(results) < len(tasks):
            if self._stop.is_set():
                for worker_id, (slot, started) in list(running.items()):
                    self._kill_worker(worker_id)
                    synth(slot, worker_id, "pool shut down mid-batch",
                          time.perf_counter() - started, budget=True)
                for slot in range(len(tasks)):
                    synth(slot, -1, "pool shut down before execution", 0.0, budget=True)
                break
            try:
                msg = self._result_q.get(timeout=0.1)
            except queue.Empty:
                msg = None
            if msg is not None:
                kind = msg[0]
                if kind == "start":
                    _, slot, worker_id = msg
                    running[worker_id] = (slot, time.perf_counter())
                elif kind == "done":
                    _, slot, worker_id, trace, wall = msg
                    running.pop(worker_id, None)
                    results.setdefault(slot, ExecResult(slot, trace, wall, worker_id))
                elif kind == "failed":
                    _, slot, worker_id, error, wall = msg
                    running.pop(worker_id, None)
                    synth(slot, worker_id, error, wall, budget=False)

            now = time.perf_counter()
            for worker_id, (slot, started) in list(running.items()):
                if now - started > self.cfg.scenario_budget:
                    logger.warning("slot {} exceeded budget of {} s; killing worker {}",
                                   slot, self.cfg.scenario_budget, worker_id)
                    self._kill_worker(worker_id)
                    running.pop(worker_id, None)
                    synth(slot, worker_id,
                          f"wall-clock budget of {self.cfg.scenario_budget} s exceeded",
                          now - started, budget=True)
                    self._spawn_worker()

            for worker_id, proc in list(self._workers.items()):
                if proc.is_alive():
                    continue
                self._workers.pop(worker_id)
                spontaneous_deaths += 1
                if worker_id in running:
                    slot, started = running.pop(worker_id)
                    synth(slot, worker_id,
                          f"worker {worker_id} died (exit {proc.exitcode})",
                          time.perf_counter() - started, budget=False)
                if not self._stop.is_set():
                    self._spawn_worker()
                if spontaneous_deaths > death_budget:
                    partial = [results[i] for i in sorted(results)]
                    self.shutdown()
                    raise PoolFailureError(
                        f"workers died {spontaneous_deaths} times; aborting batch",
                        partial_results=partial)

        return [results[i] for i in range(len(tasks))]

    def shutdown(self) -> None:
        """Drain or terminate all workers; double shutdown is a no-op."""
        if self._closed:
            return
        self._closed = True
        self._stop.set()
        for _ in self._workers:
            try:
                self._task_q.put_nowait(None)
            except Exception:
                break
        deadline = time.time() + 5.0
        for worker_id, proc in list(self._workers.items()):
            proc.join(timeout=max(0.1, deadline - time.time()))
            if proc.is_alive():
                self._kill_worker(worker_id)
        self._workers.clear()
        self._task_q.close()
        self._result_q.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


def spawn_pool(cfg: WorkerPoolConfig, catalog: VehicleModelCatalog) -> WorkerPool:
    return WorkerPool(cfg, catalog)


def shutdown(pool: WorkerPool) -> None:
    pool.shutdown()
