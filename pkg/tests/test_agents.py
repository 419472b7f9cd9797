"""Control laws, builtin agent contracts, agent resolution."""

from __future__ import annotations

import math

import pytest

from scenosearch.agents import (AgentContext, IdmParams, idm_acceleration,
                                pure_pursuit, run_step, setup_env)
from scenosearch.agents.base import Observation
from scenosearch.agents.builtin import SafeFollower, YieldingAgent
from scenosearch.agents.base import VisibleLight
from scenosearch.catalog import DEFAULT_CATALOG
from scenosearch.errors import UnknownAgentError
from scenosearch.roadnet import shortest_route
from scenosearch.scenario import (EgoSpec, MapRegionSpec, NpcVehicleSpec, Route,
                                  Scenario, Waypoint, WeatherSpec)
from scenosearch.traces import TERM_AGENT_FAILURE, ActorState
from scenosearch.world import SimConfig, run_scenario

from conftest import idm_reference

SEDAN = DEFAULT_CATALOG["sedan"]


def make_ctx(route=None, ego_id="ego"):
    if route is None:
        route = Route((Waypoint(0.0, 0.0, 8.0), Waypoint(100.0, 0.0, 8.0)))
    return AgentContext(ego_id=ego_id, route=route, vehicle_limits=SEDAN,
                        weather=WeatherSpec(), dt=0.05, sensing_radius=50.0)


def make_state(x=0.0, y=0.0, heading=0.0, speed=8.0, actor_id="ego", kind="ego",
               extent=SEDAN.extent):
    return ActorState(id=actor_id, kind=kind, x=x, y=y, heading=heading,
                      speed=speed, extent=extent, active=True, route_progress=0.0)


def make_obs(self_state, nearby=(), light=None, remaining=None, step=0):
    if remaining is None:
        remaining = tuple(Waypoint(self_state.x + 2.0 * (i + 1), self_state.y, 8.0)
                          for i in range(40))
    return Observation(step=step, timestamp=step * 0.05, self_state=self_state,
                       nearby_actors=tuple(nearby), visible_light=light,
                       remaining_route=tuple(remaining))


# ------------------------------------------------------------------ #
# pure_pursuit / IDM
# ------------------------------------------------------------------ #

def test_pure_pursuit_straight_ahead_zero():
    route = tuple(Waypoint(2.0 * i, 0.0, 8.0) for i in range(1, 20))
    assert pure_pursuit(0.0, 0.0, 0.0, route, 8.0, 2.8, 0.6) == pytest.approx(0.0)


def test_pure_pursuit_formula_at_30_degrees():
    # target at bearing +30 deg, exactly lookahead away
    lookahead = 8.0
    alpha = math.radians(30.0)
    target = Waypoint(lookahead * math.cos(alpha), lookahead * math.sin(alpha), 8.0)
    steer = pure_pursuit(0.0, 0.0, 0.0, (target,), lookahead, 2.8, 0.6)
    assert steer == pytest.approx(math.atan(2.0 * 2.8 * math.sin(alpha) / 8.0))
    assert steer == pytest.approx(math.atan(0.35))


def test_pure_pursuit_antisymmetry():
    lookahead = 8.0
    for deg in (10.0, 25.0, 40.0, 75.0):
        alpha = math.radians(deg)
        up = (Waypoint(lookahead * math.cos(alpha), lookahead * math.sin(alpha), 8.0),)
        down = (Waypoint(lookahead * math.cos(alpha), -lookahead * math.sin(alpha), 8.0),)
        s_up = pure_pursuit(0.0, 0.0, 0.0, up, lookahead, 2.8, 0.6)
        s_down = pure_pursuit(0.0, 0.0, 0.0, down, lookahead, 2.8, 0.6)
        assert s_up == pytest.approx(-s_down)


def test_idm_free_flow_equilibrium():
    params = IdmParams(v0=10.0)
    assert idm_acceleration(10.0, None, None, params, 6.0) == pytest.approx(0.0)
    assert idm_acceleration(0.0, None, None, params, 6.0) == pytest.approx(params.a_max)


def test_idm_defensive_on_nonpositive_gap():
    params = IdmParams(v0=10.0)
    assert idm_acceleration(5.0, 5.0, 0.0, params, 6.0) == -6.0
    assert idm_acceleration(5.0, 5.0, -1.0, params, 6.0) == -6.0


def test_idm_matches_independent_formula():
    params = IdmParams(v0=12.0, T=1.5, s0=2.0, a_max=2.0, b=3.0)
    cases = [(10.0, 10.0, 2.0 + 10.0 * 1.5), (10.0, 5.0, 30.0), (3.0, 12.0, 8.0),
             (0.0, 0.0, 2.5), (12.0, 0.0, 80.0), (6.0, 6.0, 300.0)]
    for v, v_lead, gap in cases:
        got = idm_acceleration(v, v_lead, gap, params, 6.0)
        want = idm_reference(v, v_lead, gap, v0=12.0, T=1.5, s0=2.0,
                             a_max=2.0, b=3.0, max_decel=6.0)
        assert got == pytest.approx(want, abs=1e-12)


def test_idm_follower_never_closes_below_half_s0():
    """Follower behind a constant-speed leader: gap stays above s0/2."""
    params = IdmParams(v0=10.0, T=1.5, s0=2.0, a_max=2.0, b=3.0)
    v_lead = params.v0 / 2.0
    gap = 4.0 * params.s0
    v = params.v0  # worst case: arrives at full desired speed
    dt = 0.05
    min_gap = gap
    for _ in range(int(120.0 / dt)):
        accel = idm_acceleration(v, v_lead, gap, params, 6.0)
        v = max(v + accel * dt, 0.0)
        gap += (v_lead - v) * dt
        min_gap = min(min_gap, gap)
    assert min_gap > params.s0 / 2.0


# ------------------------------------------------------------------ #
# Agent resolution and contracts
# ------------------------------------------------------------------ #

def test_setup_env_parses_params():
    handle = setup_env("builtin:safe_follower?v_des=8", make_ctx())
    assert isinstance(handle, SafeFollower)
    assert handle.v_des == 8.0


def test_setup_env_unknown_kind():
    with pytest.raises(UnknownAgentError):
        setup_env("builtin:nosuch", make_ctx())
    with pytest.raises(UnknownAgentError):
        setup_env("nonsense", make_ctx())


def test_safe_follower_equilibrium_on_empty_road():
    handle = setup_env("builtin:safe_follower?v_des=8", make_ctx())
    action, log = run_step(handle, make_obs(make_state(speed=8.0)))
    assert action.accel == pytest.approx(0.0, abs=0.05)
    assert action.steer == pytest.approx(0.0, abs=1e-6)
    assert log["mode"] == "free"


def test_naive_follower_ignores_actors():
    obstacle = make_state(x=10.0, speed=0.0, actor_id="npc0", kind="npc_vehicle")
    empty = setup_env("builtin:naive_follower?v_des=8", make_ctx())
    blocked = setup_env("builtin:naive_follower?v_des=8", make_ctx())
    a1, _ = run_step(empty, make_obs(make_state()))
    a2, _ = run_step(blocked, make_obs(make_state(), nearby=(obstacle,)))
    assert a1 == a2


def test_safe_follower_brakes_behind_leader():
    leader = make_state(x=8.0, speed=0.0, actor_id="npc0", kind="npc_vehicle")
    handle = setup_env("builtin:safe_follower?v_des=8", make_ctx())
    action, log = run_step(handle, make_obs(make_state(speed=8.0), nearby=(leader,)))
    assert action.accel < -1.0
    assert log["mode"] == "follow"
    assert log["leader"] == "npc0"


def test_safe_follower_brakes_for_red_light():
    light = VisibleLight(junction_id="X", x=20.0, y=0.0, distance=20.0,
                         stop_line_distance=12.0, approach_group=0,
                         group0="red", group1="green")
    handle = setup_env("builtin:safe_follower?v_des=8", make_ctx())
    action, log = run_step(handle, make_obs(make_state(speed=8.0), light=light))
    assert action.accel < -0.5
    assert log["mode"] == "light"


def test_yielding_agent_full_brake_in_yield_zone():
    light = VisibleLight(junction_id="X", x=20.0, y=0.0, distance=20.0,
                         stop_line_distance=12.0, approach_group=0,
                         group0="green", group1="red")
    conflict = make_state(x=25.0, y=5.0, speed=3.0, actor_id="other", kind="ego")
    handle = setup_env("builtin:yielding_agent", make_ctx())
    action, log = run_step(handle, make_obs(make_state(speed=8.0),
                                            nearby=(conflict,), light=light))
    assert action.accel == -SEDAN.max_decel
    assert log["mode"] == "yield"


def test_run_step_enforces_step_order():
    handle = setup_env("builtin:safe_follower", make_ctx())
    run_step(handle, make_obs(make_state(), step=0))
    from scenosearch.errors import AgentProtocolError
    with pytest.raises(AgentProtocolError):
        run_step(handle, make_obs(make_state(), step=5))


def test_panic_agent_surfaces_as_agent_failure(net, catalog, sim_cfg):
    route = shortest_route(net, (20.0, -1.75), (60.0, -1.75))
    s = Scenario("panic", (EgoSpec("ego", "sedan", route, 0.0, "builtin:panic?at_step=3"),),
                 map_region=MapRegionSpec("Town01-lite"))
    trace = run_scenario(s, None, net, catalog, sim_cfg)
    assert trace.termination == TERM_AGENT_FAILURE
    assert "panic" in trace.error


def test_safe_follower_full_sim_following_never_collides(net, catalog):
    """Closed-loop version of the IDM stability property."""
    leader_route = Route(tuple(Waypoint(40.0 + 2.0 * i, -1.75, 5.0) for i in range(25)))
    npc = NpcVehicleSpec("lead", "sedan", leader_route, 0.0)
    ego_route = shortest_route(net, (12.0, -1.75), (88.0, -1.75))
    ego = EgoSpec("ego", "sedan", ego_route, 0.0, "builtin:safe_follower?v_des=10")
    s = Scenario("follow", (ego,), npc_vehicles=(npc,),
                 map_region=MapRegionSpec("Town01-lite"))
    cfg = SimConfig(max_sim_time=120.0)
    trace = run_scenario(s, None, net, catalog, cfg)
    assert trace.termination != "collision"
    from scenosearch.engine import fitness_min_distance
    assert fitness_min_distance(trace) > 0.0
