"""Run configuration files and the on-disk run directory layout.

A run directory looks like:

    <output_root>/<run_id>/
      config_snapshot.yaml      resolved config; replaying it reproduces the run
      seeds/<id>.scn.json       canonical copy of the input seed
      gen_<g>/ind_<i>/          scenario.scn.json, trace.json, verdicts.json,
                                fitness.json
      report.json               full run report (canonical JSON)
      generations.csv           one summary row per generation
      logs/                     engine.log, worker_<n>.log
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .engine import (DEFAULT_MUTATION_WEIGHTS, ORACLES, Evaluation, GenerationRecord,
                     Individual, OracleVerdict, RunReport, TesterConfig)
from .errors import DocumentSyntaxError, SchemaError
from .jsonio import canonical_dumps, loads
from .traces import Trace, serialize_trace
from .world import SimConfig


@dataclass(frozen=True)
class RunConfig:
    tester: TesterConfig
    agent: dict[str, str]
    scenario_path: Path
    sim: SimConfig = field(default_factory=SimConfig)
    map_path: Path | None = None
    pool_workers: int = 1
    scenario_budget: float = 300.0
    output_root: Path = Path("runs")

    def __post_init__(self):
        if not self.agent:
            raise ValueError("agent section needs at least one binding")
        if self.pool_workers < 1:
            raise ValueError("pool workers must be >= 1")


def _section(doc: dict, name: str, required: bool = True) -> dict:
    value = doc.get(name)
    if value is None:
        if required:
            raise SchemaError(name, "missing required section")
        return {}
    if not isinstance(value, dict):
        raise SchemaError(name, "section must be a mapping")
    return value


def load_run_config(path: str | Path) -> RunConfig:
    """Parse a YAML run configuration; relative paths resolve against it."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise DocumentSyntaxError(f"malformed config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("", "config must be a mapping")
    base = path.parent

    tester_doc = _section(doc, "tester")
    weights = dict(DEFAULT_MUTATION_WEIGHTS)
    weights.update(tester_doc.get("mutation_weights") or {})
    try:
        tester = TesterConfig(
            tester_kind=tester_doc.get("kind", "genetic"),
            population_size=int(tester_doc.get("population_size", 8)),
            generations=int(tester_doc.get("generations", 10)),
            mutation_weights={k: float(v) for k, v in weights.items()},
            elite_count=int(tester_doc.get("elite_count", 2)),
            tournament_size=int(tester_doc.get("tournament_size", 3)),
            rng_seed=int(tester_doc.get("rng_seed", 0)),
            oracles=tuple(tester_doc.get("oracles", list(ORACLES))),
            fitness_kind=tester_doc.get("fitness", "min_distance"),
            stop_on_first_violation=bool(tester_doc.get("stop_on_first_violation", False)),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError("tester", str(exc)) from exc

    agent_doc = _section(doc, "agent")
    agent = {str(k): str(v) for k, v in agent_doc.items()}

    scenario_doc = _section(doc, "scenario")
    if "seed" not in scenario_doc:
        raise SchemaError("scenario.seed", "missing required field")
    seed_path = (base / str(scenario_doc["seed"])).resolve()
    if not seed_path.is_file():
        raise SchemaError("scenario.seed", f"no such file: {seed_path}")
    map_path = None
    if scenario_doc.get("map"):
        map_path = (base / str(scenario_doc["map"])).resolve()
        if not map_path.is_file():
            raise SchemaError("scenario.map", f"no such file: {map_path}")

    sim_doc = _section(doc, "sim", required=False)
    try:
        sim = SimConfig(
            dt=float(sim_doc.get("dt", 0.05)),
            max_sim_time=float(sim_doc.get("max_sim_time", 120.0)),
            sensing_radius=float(sim_doc.get("sensing_radius", 50.0)),
            goal_radius=float(sim_doc.get("goal_radius", 2.0)),
            stop_on_collision=bool(sim_doc.get("stop_on_collision", True)),
            obs_stride=int(sim_doc.get("obs_stride", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError("sim", str(exc)) from exc

    pool_doc = _section(doc, "pool", required=False)
    output_doc = _section(doc, "output", required=False)
    try:
        return RunConfig(
            tester=tester,
            agent=agent,
            scenario_path=seed_path,
            sim=sim,
            map_path=map_path,
            pool_workers=int(pool_doc.get("workers", 1)),
            scenario_budget=float(pool_doc.get("scenario_budget", 300.0)),
            output_root=(base / str(output_doc.get("root", "runs"))).resolve(),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError("", str(exc)) from exc


def snapshot_run_config(cfg: RunConfig) -> str:
    """Resolved config as YAML; feeding it back to `run` replays the run."""
    doc = {
        "tester": {
            "kind": cfg.tester.tester_kind,
            "population_size": cfg.tester.population_size,
            "generations": cfg.tester.generations,
            "mutation_weights": {k: float(v) for k, v in cfg.tester.mutation_weights.items()},
            "elite_count": cfg.tester.elite_count,
            "tournament_size": cfg.tester.tournament_size,
            "rng_seed": cfg.tester.rng_seed,
            "oracles": list(cfg.tester.oracles),
            "fitness": cfg.tester.fitness_kind,
            "stop_on_first_violation": cfg.tester.stop_on_first_violation,
        },
        "agent": dict(cfg.agent),
        "scenario": {
            "seed": str(cfg.scenario_path),
            "map": str(cfg.map_path) if cfg.map_path else None,
        },
        "sim": {
            "dt": cfg.sim.dt,
            "max_sim_time": cfg.sim.max_sim_time,
            "sensing_radius": cfg.sim.sensing_radius,
            "goal_radius": cfg.sim.goal_radius,
            "stop_on_collision": cfg.sim.stop_on_collision,
            "obs_stride": cfg.sim.obs_stride,
        },
        "pool": {
            "workers": cfg.pool_workers,
            "scenario_budget": cfg.scenario_budget,
        },
        "output": {"root": str(cfg.output_root)},
    }
    return yaml.safe_dump(doc, sort_keys=False)


# --------------------------------------------------------------------- #
# Run directory
# --------------------------------------------------------------------- #

def individual_dir(run_dir: Path, individual: Individual) -> Path:
    generation, _, slot = individual.individual_id.partition("_i")
    return run_dir / f"gen_{generation[1:]}" / f"ind_{slot}"


def trace_ref_for(individual: Individual) -> str:
    generation, _, slot = individual.individual_id.partition("_i")
    return f"gen_{generation[1:]}/ind_{slot}/trace.json"


def _verdict_doc(v: OracleVerdict) -> dict:
    detail = None
    if v.detail is not None:
        detail = {"actors": list(v.detail.actors), "step": v.detail.step,
                  "x": v.detail.x, "y": v.detail.y}
    return {"oracle": v.oracle, "violated": v.violated, "detail": detail}


def _evaluation_doc(individual: Individual, evaluation: Evaluation) -> dict:
    return {
        "individual_id": evaluation.individual_id,
        "parent_id": individual.parent_id,
        "generation": individual.generation,
        "fitness": evaluation.fitness,
        "agent_failure": evaluation.agent_failure,
        "violated": evaluation.violated,
        "trace_ref": evaluation.trace_ref,
    }


def report_doc(report: RunReport) -> dict:
    return {
        "scenario_id": report.scenario_id,
        "tester_kind": report.tester_kind,
        "rng_seed": report.rng_seed,
        "aborted": report.aborted,
        "best_fitness_per_generation": list(report.best_fitness_per_generation),
        "violating_individuals": list(report.violating_individual_ids),
        "generations": [
            {
                "generation": g.generation,
                "best_fitness": g.best_fitness,
                "violation_count": g.violation_count,
                "individuals": [
                    {**_evaluation_doc(ev.individual, ev.evaluation),
                     "verdicts": [_verdict_doc(v) for v in ev.evaluation.verdicts],
                     "scenario_ref": trace_ref_for(ev.individual).replace(
                         "trace.json", "scenario.scn.json")}
                    for ev in g.records
                ],
            }
            for g in report.generations
        ],
    }


class RunWriter:
    """RunObserver that persists every individual and generation summary."""

    def __init__(self, run_dir: Path, echo=None):
        self.run_dir = Path(run_dir)
        self.echo = echo
        self.generation_records: list[GenerationRecord] = []
        (self.run_dir / "logs").mkdir(parents=True, exist_ok=True)
        (self.run_dir / "seeds").mkdir(parents=True, exist_ok=True)
        self._csv_path = self.run_dir / "generations.csv"
        with open(self._csv_path, "w", newline="") as fh:
            csv.writer(fh).writerow(["generation", "best_fitness", "violations"])

    def on_individual(self, individual: Individual, evaluation: Evaluation,
                      trace: Trace) -> None:
        out = individual_dir(self.run_dir, individual)
        out.mkdir(parents=True, exist_ok=True)
        from .scenario import serialize_scenario
        (out / "scenario.scn.json").write_text(serialize_scenario(individual.scenario))
        (out / "trace.json").write_text(serialize_trace(trace))
        (out / "verdicts.json").write_text(canonical_dumps(
            [_verdict_doc(v) for v in evaluation.verdicts]))
        (out / "fitness.json").write_text(canonical_dumps(
            _evaluation_doc(individual, evaluation)))

    def on_generation(self, record: GenerationRecord) -> None:
        self.generation_records.append(record)
        with open(self._csv_path, "a", newline="") as fh:
            csv.writer(fh).writerow([record.generation,
                                     f"{record.best_fitness:.6f}",
                                     record.violation_count])
        if self.echo is not None:
            self.echo(f"generation {record.generation}: "
                      f"best_fitness={record.best_fitness:.3f} "
                      f"violations={record.violation_count}")

    def partial_report(self, seed_id: str, tester: TesterConfig) -> RunReport:
        records = tuple(self.generation_records)
        return RunReport(
            scenario_id=seed_id,
            tester_kind=tester.tester_kind,
            rng_seed=tester.rng_seed,
            generations=records,
            best_fitness_per_generation=tuple(r.best_fitness for r in records),
            violating_individual_ids=tuple(
                ev.individual.individual_id for r in records for ev in r.records
                if ev.evaluation.violated),
            aborted=True,
        )


def write_report(run_dir: Path, report: RunReport) -> Path:
    path = Path(run_dir) / "report.json"
    path.write_text(canonical_dumps(report_doc(report)))
    return path


def read_report_doc(run_dir: Path) -> dict:
    return loads((Path(run_dir) / "report.json").read_text())


def allocate_run_dir(output_root: Path, run_id: str) -> Path:
    """First free directory named run_id, run_id-2, run_id-3, ..."""
    output_root.mkdir(parents=True, exist_ok=True)
    candidate = output_root / run_id
    n = 1
    while candidate.exists():
        n += 1
        candidate = output_root / f"{run_id}-{n}"
    candidate.mkdir(parents=True)
    return candidate
