"""Regenerates the bundled scenario fixtures and example run config.

Run from the repository root:  python tools/gen_fixtures.py
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from scenosearch.roadnet import generate_seed_scenarios, load_town, shortest_route  # noqa: E402
from scenosearch.scenario import (EgoSpec, MapRegionSpec, Scenario,  # noqa: E402
                                  serialize_scenario)

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

EXAMPLE_CONFIG = """\
# Example search run: genetic tester hunting collisions against a route
# follower that ignores traffic. Run from the repository root:
#
#   scenosearch run --config configs/example_genetic.yaml
tester:
  kind: genetic
  population_size: 8
  generations: 20
  elite_count: 2
  tournament_size: 3
  rng_seed: 7
  oracles: [collision, stuck, completion]
  fitness: min_distance
  stop_on_first_violation: true
  mutation_weights:
    add_npc: 0.55
    remove_npc: 0.05
    perturb_route: 0.2
    perturb_start_time: 0.2
    perturb_weather: 0.0
    perturb_lights: 0.0
agent:
  "*": builtin:naive_follower?v_des=10
scenario:
  seed: seeds/seed_demo.scn.json
sim:
  dt: 0.05
  max_sim_time: 60.0
  sensing_radius: 50.0
  goal_radius: 2.0
  stop_on_collision: true
  obs_stride: 1
pool:
  workers: 2
  scenario_budget: 300.0
output:
  root: ../runs
"""


def deadlock_fixture(net) -> Scenario:
    """Three mutually yielding egos meeting at the inner signalized junction."""
    ref = "builtin:yielding_agent"
    egos = (
        EgoSpec("ego_w", "sedan", shortest_route(net, (55.0, 98.25), (150.0, 98.25)),
                0.0, ref),
        EgoSpec("ego_e", "sedan", shortest_route(net, (145.0, 101.75), (50.0, 101.75)),
                0.0, ref),
        EgoSpec("ego_n", "sedan", shortest_route(net, (98.25, 145.0), (98.25, 50.0)),
                0.0, ref),
    )
    return Scenario("deadlock_three_av", egos,
                    map_region=MapRegionSpec("Town01-lite"))


def main():
    net = load_town("Town01-lite")
    (CONFIGS / "seeds").mkdir(parents=True, exist_ok=True)

    seed = generate_seed_scenarios(net, 1, 80, 140, rng_seed=20)[0]
    seed_path = CONFIGS / "seeds" / "seed_demo.scn.json"
    seed_path.write_text(serialize_scenario(
        Scenario("seed_demo", seed.ego_vehicles, map_region=seed.map_region)))
    print(f"wrote {seed_path}")

    fixture_path = CONFIGS / "deadlock_three_av.scn.json"
    fixture_path.write_text(serialize_scenario(deadlock_fixture(net)))
    print(f"wrote {fixture_path}")

    config_path = CONFIGS / "example_genetic.yaml"
    config_path.write_text(EXAMPLE_CONFIG)
    print(f"wrote {config_path}")


if __name__ == "__main__":
    main()
