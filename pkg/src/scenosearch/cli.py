"""Command-line surface: seed generation, search runs, replay, reporting."""

from __future__ import annotations

import sys
from pathlib import Path

import click
from loguru import logger

from .catalog import DEFAULT_CATALOG
from .engine import run_search
from .errors import (DocumentSyntaxError, InfeasibleSeedError, MapIntegrityError,
                     PoolFailureError, SchemaError)
from .pool import WorkerPool, WorkerPoolConfig, bind_agents
from .roadnet import (available_towns, generate_seed_scenarios, load_network,
                      load_town, route_length)
from .runio import (RunConfig, RunWriter, allocate_run_dir, load_run_config,
                    snapshot_run_config, trace_ref_for, write_report)
from .scenario import parse_scenario, serialize_scenario
from .validate import validate_scenario


@click.group()
def main():
    """Search-based testing of driving agents on an embedded 2-D simulator."""
    logger.remove()
    logger.add(sys.stderr, level="WARNING")


@main.command("seed-generate")
@click.option("--num", type=int, default=10, show_default=True,
              help="Number of seed scenarios.")
@click.option("--town", default="Town01-lite", show_default=True,
              help="Bundled town name.")
@click.option("--min-length", type=float, default=50.0, show_default=True,
              help="Minimum ego route length in meters.")
@click.option("--max-length", type=float, default=200.0, show_default=True,
              help="Maximum ego route length in meters.")
@click.option("--seed", "rng_seed", type=int, default=0, show_default=True,
              help="RNG seed; equal seeds give byte-identical files.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path),
              default=Path("seeds"), show_default=True, help="Output directory.")
def cmd_seed_generate(num, town, min_length, max_length, rng_seed, out_dir):
    """Generate ego-task seed scenarios with length-constrained routes."""
    try:
        net = load_town(town)
    except MapIntegrityError as exc:
        raise click.ClickException(str(exc)) from exc
    try:
        seeds = generate_seed_scenarios(net, num, min_length, max_length, rng_seed)
    except (InfeasibleSeedError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    out_dir.mkdir(parents=True, exist_ok=True)
    for scenario in seeds:
        path = out_dir / f"{scenario.scenario_id}.scn.json"
        path.write_text(serialize_scenario(scenario))
        length = route_length(scenario.ego_vehicles[0].route)
        click.echo(f"{scenario.scenario_id}  route_length={length:.1f} m  -> {path}")


def _execute_run(cfg: RunConfig) -> Path:
    seed_text = cfg.scenario_path.read_text()
    seed = bind_agents(parse_scenario(seed_text), cfg.agent)
    if cfg.map_path is not None:
        net = load_network(cfg.map_path)
    else:
        net = load_town(seed.map_region.town)
    validation = validate_scenario(seed, net, DEFAULT_CATALOG)
    if not validation.ok:
        details = "; ".join(f"{f.path}: {f.message}" for f in validation.errors())
        raise click.ClickException(f"seed scenario is invalid: {details}")

    run_id = f"{seed.scenario_id}_{cfg.tester.tester_kind}_s{cfg.tester.rng_seed}"
    run_dir = allocate_run_dir(cfg.output_root, run_id)
    writer = RunWriter(run_dir, echo=click.echo)
    engine_log = logger.add(run_dir / "logs" / "engine.log", level="INFO")
    (run_dir / "config_snapshot.yaml").write_text(snapshot_run_config(cfg))
    (run_dir / "seeds" / f"{seed.scenario_id}.scn.json").write_text(
        serialize_scenario(seed))

    pool_cfg = WorkerPoolConfig(
        worker_count=cfg.pool_workers,
        sim=cfg.sim,
        town=None if cfg.map_path else seed.map_region.town,
        map_path=str(cfg.map_path) if cfg.map_path else None,
        scenario_budget=cfg.scenario_budget,
        log_dir=str(run_dir / "logs"),
    )
    pool = WorkerPool(pool_cfg, DEFAULT_CATALOG)

    def executor(individuals):
        results = pool.execute_batch([ind.scenario for ind in individuals])
        return [(res.trace, trace_ref_for(ind))
                for ind, res in zip(individuals, results)]

    logger.info("run {} starting: tester={} N={} G={} K={}", run_id,
                cfg.tester.tester_kind, cfg.tester.population_size,
                cfg.tester.generations, cfg.pool_workers)
    try:
        report = run_search(seed, cfg.tester, executor, net, DEFAULT_CATALOG,
                            observer=writer)
    except PoolFailureError as exc:
        write_report(run_dir, writer.partial_report(seed.scenario_id, cfg.tester))
        logger.error("pool failure: {}", exc)
        raise click.ClickException(
            f"execution pool failed; partial results in {run_dir}: {exc}") from exc
    finally:
        pool.shutdown()
        logger.remove(engine_log)

    write_report(run_dir, report)
    violations = len(report.violating_individual_ids)
    click.echo(f"run complete: {violations} violating individual(s), "
               f"report at {run_dir / 'report.json'}")
    return run_dir


@main.command("run")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="Run configuration YAML.")
def cmd_run(config_path):
    """Execute a search run end-to-end into a run directory."""
    try:
        cfg = load_run_config(config_path)
    except (DocumentSyntaxError, SchemaError) as exc:
        raise click.ClickException(f"bad config: {exc}") from exc
    run_dir = _execute_run(cfg)
    click.echo(str(run_dir))


@main.command("replay")
@click.option("--trace", "trace_path", required=True,
              type=click.Path(exists=True, path_type=Path), help="Trace file.")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path),
              help="Directory for rendered frames.")
@click.option("--stride", type=int, default=20, show_default=True,
              help="Steps between rendered frames.")
def cmd_replay(trace_path, out_dir, stride):
    """Render a trace as SVG frames plus a violation summary frame."""
    from .replay import render_trace
    try:
        frames = render_trace(trace_path, out_dir, stride)
    except (DocumentSyntaxError, SchemaError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    for frame in frames:
        click.echo(str(frame))


@main.command("report")
@click.option("--run-dir", "run_dir", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Run directory produced by `run`.")
def cmd_report(run_dir):
    """Summarize a run: totals, per-individual table, fitness figure."""
    from .report import (format_summary, summarize_run, write_fitness_figure,
                         write_individuals_csv)
    summary = summarize_run(run_dir)
    table = write_individuals_csv(run_dir, summary)
    figure = write_fitness_figure(run_dir, summary)
    click.echo(format_summary(run_dir, summary))
    click.echo(f"table: {table}")
    click.echo(f"figure: {figure}")


if __name__ == "__main__":
    main()
