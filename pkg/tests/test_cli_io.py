"""CLI commands, run directory layout, snapshot replay, reporting."""

from __future__ import annotations

import shutil
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from scenosearch.cli import main
from scenosearch.jsonio import loads
from scenosearch.roadnet import route_length
from scenosearch.scenario import parse_scenario
from scenosearch.traces import parse_trace

from conftest import CONFIGS

RUN_CONFIG = """\
tester:
  kind: {kind}
  population_size: {n}
  generations: {g}
  elite_count: 1
  tournament_size: 2
  rng_seed: {seed}
  stop_on_first_violation: {stop}
  mutation_weights: {{add_npc: 0.6, remove_npc: 0.05, perturb_route: 0.2,
                      perturb_start_time: 0.15}}
agent:
  "*": builtin:naive_follower?v_des=10
scenario:
  seed: {seed_path}
sim:
  max_sim_time: 30.0
pool:
  workers: {workers}
output:
  root: {root}
"""


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def seeds_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("seeds")
    result = CliRunner().invoke(main, [
        "seed-generate", "--num", "3", "--town", "Town01-lite",
        "--min-length", "50", "--max-length", "200", "--seed", "5",
        "--out", str(out)])
    assert result.exit_code == 0, result.output
    return out


def write_config(path: Path, seed_path: Path, root: Path, kind="genetic",
                 n=4, g=2, seed=9, workers=2, stop="true") -> Path:
    path.write_text(RUN_CONFIG.format(kind=kind, n=n, g=g, seed=seed,
                                      workers=workers, stop=stop,
                                      seed_path=seed_path, root=root))
    return path


@pytest.fixture(scope="module")
def collision_run(tmp_path_factory, seeds_dir):
    """One shared genetic run that ends in at least one collision."""
    base = tmp_path_factory.mktemp("runspace")
    config = write_config(base / "run.yaml", seeds_dir / "seed_000.scn.json",
                          base / "runs", g=6)
    result = CliRunner().invoke(main, ["run", "--config", str(config)])
    assert result.exit_code == 0, result.output
    run_dir = Path(result.output.strip().splitlines()[-1])
    assert run_dir.is_dir()
    return run_dir


def test_seed_generate_files_and_lengths(seeds_dir):
    files = sorted(seeds_dir.glob("*.scn.json"))
    assert len(files) == 3
    for f in files:
        scenario = parse_scenario(f.read_text())
        assert 50.0 <= route_length(scenario.ego_vehicles[0].route) <= 200.0


def test_seed_generate_unknown_town(runner, tmp_path):
    result = runner.invoke(main, ["seed-generate", "--town", "Atlantis",
                                  "--out", str(tmp_path)])
    assert result.exit_code != 0
    assert "Town01-lite" in result.output  # lists available towns


def test_seed_generate_deterministic(runner, tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        result = runner.invoke(main, [
            "seed-generate", "--num", "2", "--min-length", "60",
            "--max-length", "150", "--seed", "31", "--out", str(out)])
        assert result.exit_code == 0, result.output
    for f in sorted(out_a.glob("*.scn.json")):
        assert f.read_bytes() == (out_b / f.name).read_bytes()


def test_run_directory_layout_complete(collision_run):
    assert (collision_run / "config_snapshot.yaml").is_file()
    assert (collision_run / "report.json").is_file()
    assert (collision_run / "generations.csv").is_file()
    assert list((collision_run / "seeds").glob("*.scn.json"))
    ind_dirs = sorted(collision_run.glob("gen_*/ind_*"))
    assert ind_dirs
    for ind in ind_dirs:
        for name in ("scenario.scn.json", "trace.json", "verdicts.json",
                     "fitness.json"):
            assert (ind / name).is_file(), f"{ind} missing {name}"


def test_run_records_collision_verdict(collision_run):
    report = loads((collision_run / "report.json").read_text())
    assert report["violating_individuals"]
    found = False
    for ind_dir in collision_run.glob("gen_*/ind_*"):
        verdicts = loads((ind_dir / "verdicts.json").read_text())
        if any(v["oracle"] == "collision" and v["violated"] for v in verdicts):
            found = True
    assert found


def test_snapshot_replay_reproduces_report(runner, collision_run):
    result = runner.invoke(main, [
        "run", "--config", str(collision_run / "config_snapshot.yaml")])
    assert result.exit_code == 0, result.output
    replay_dir = Path(result.output.strip().splitlines()[-1])
    assert replay_dir != collision_run
    original = (collision_run / "report.json").read_bytes()
    replayed = (replay_dir / "report.json").read_bytes()
    assert replayed == original
    shutil.rmtree(replay_dir)


def test_random_tester_single_generation(runner, tmp_path, seeds_dir):
    config = write_config(tmp_path / "r.yaml", seeds_dir / "seed_001.scn.json",
                          tmp_path / "runs", kind="random", n=3, g=1,
                          stop="false", workers=1)
    result = runner.invoke(main, ["run", "--config", str(config)])
    assert result.exit_code == 0, result.output
    run_dir = Path(result.output.strip().splitlines()[-1])
    gen_dirs = sorted(run_dir.glob("gen_*"))
    assert [g.name for g in gen_dirs] == ["gen_000"]


def test_bad_config_fails_cleanly(runner, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("tester: {kind: genetic}\n")  # missing agent/scenario
    result = runner.invoke(main, ["run", "--config", str(bad)])
    assert result.exit_code != 0
    assert "bad config" in result.output


def test_replay_frames(runner, collision_run, tmp_path):
    report = loads((collision_run / "report.json").read_text())
    violating = report["violating_individuals"][0]
    trace_path = None
    for gen in report["generations"]:
        for ind in gen["individuals"]:
            if ind["individual_id"] == violating:
                trace_path = collision_run / ind["trace_ref"]
    assert trace_path and trace_path.is_file()
    out = tmp_path / "frames"
    result = runner.invoke(main, ["replay", "--trace", str(trace_path),
                                  "--out", str(out), "--stride", "50"])
    assert result.exit_code == 0, result.output
    frames = sorted(out.glob("frame_*.svg"))
    assert len(frames) >= 2
    summary = out / "summary.svg"
    assert summary.is_file()
    assert "collision" in summary.read_text()


def test_replay_oversized_stride_two_frames(runner, collision_run, tmp_path):
    trace_path = next(collision_run.glob("gen_000/ind_00/trace.json"))
    trace = parse_trace(trace_path.read_text())
    out = tmp_path / "frames2"
    result = runner.invoke(main, ["replay", "--trace", str(trace_path),
                                  "--out", str(out),
                                  "--stride", str(trace.observations[-1].step + 100)])
    assert result.exit_code == 0, result.output
    frames = sorted(out.glob("frame_*.svg"))
    assert len(frames) == 2  # first and final only
    assert (out / "summary.svg").is_file()


def test_report_totals_and_table(runner, collision_run):
    result = runner.invoke(main, ["report", "--run-dir", str(collision_run)])
    assert result.exit_code == 0, result.output
    assert "scenarios executed:" in result.output
    table = collision_run / "individuals.csv"
    figure = collision_run / "fitness_trajectory.svg"
    assert table.is_file() and figure.is_file()
    rows = table.read_text().strip().splitlines()[1:]
    executed = len(list(collision_run.glob("gen_*/ind_*")))
    assert len(rows) == executed
    report = loads((collision_run / "report.json").read_text())
    listed = sum(len(g["individuals"]) for g in report["generations"])
    assert len(rows) == listed
    for row in rows:
        trace_ref = row.split(",")[-1]
        assert (collision_run / trace_ref).is_file()


def test_report_zero_violthan_run(runner, tmp_path, seeds_dir):
    config_path = tmp_path / "clean.yaml"
    config_path.write_text(f"""\
tester:
  kind: random
  population_size: 2
  generations: 1
  rng_seed: 4
  mutation_weights: {{perturb_weather: 1.0}}
agent:
  "*": builtin:safe_follower?v_des=8
scenario:
  seed: {seeds_dir / 'seed_002.scn.json'}
sim:
  max_sim_time: 60.0
pool:
  workers: 1
output:
  root: {tmp_path / 'runs'}
""")
    result = runner.invoke(main, ["run", "--config", str(config_path)])
    assert result.exit_code == 0, result.output
    run_dir = Path(result.output.strip().splitlines()[-1])
    report_result = runner.invoke(main, ["report", "--run-dir", str(run_dir)])
    assert report_result.exit_code == 0
    assert "collision=0  stuck=0  completion=0" in report_result.output


def test_report_partial_directory_warns(runner, collision_run, tmp_path):
    partial = tmp_path / "partial_run"
    shutil.copytree(collision_run, partial)
    (partial / "report.json").unlink()
    first_ind = sorted(partial.glob("gen_*/ind_*"))[0]
    (first_ind / "trace.json").unlink()
    result = runner.invoke(main, ["report", "--run-dir", str(partial)])
    assert result.exit_code == 0, result.output
    assert "warning" in result.output


def test_example_config_parses():
    from scenosearch.runio import load_run_config
    cfg = load_run_config(CONFIGS / "example_genetic.yaml")
    assert cfg.tester.tester_kind == "genetic"
    assert cfg.tester.population_size == 8
    assert cfg.pool_workers == 2
    assert cfg.agent["*"].startswith("builtin:naive_follower")


def test_deadlock_fixture_parses(deadlock_scenario):
    assert len(deadlock_scenario.ego_vehicles) == 3
    refs = {e.agent_config_ref for e in deadlock_scenario.ego_vehicles}
    assert refs == {"builtin:yielding_agent"}
