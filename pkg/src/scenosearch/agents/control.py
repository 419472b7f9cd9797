"""Geometric tracking and car-following laws shared by agents and NPCs."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..scenario import Waypoint

SPEED_GAIN = 1.5  # proportional speed controller, 1/s


@dataclass(frozen=True)
class IdmParams:
    v0: float          # desired free-flow speed
    T: float = 1.5     # desired time headway, s
    s0: float = 2.0    # standstill clearance, m
    a_max: float = 2.0
    b: float = 3.0     # comfortable braking, m/s^2


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def lookahead_for(speed: float) -> float:
    return max(4.0, 1.0 * speed)


def route_point_ahead(x: float, y: float, remaining_route: tuple[Waypoint, ...],
                      distance: float) -> tuple[float, float]:
    """Point at the given arc distance ahead along the remaining route."""
    if not remaining_route:
        return (x, y)
    px, py = x, y
    travelled = 0.0
    for wp in remaining_route:
        seg = math.hypot(wp.x - px, wp.y - py)
        if travelled + seg >= distance and seg > 0.0:
            t = (distance - travelled) / seg
            return (px + t * (wp.x - px), py + t * (wp.y - py))
        travelled += seg
        px, py = wp.x, wp.y
    return (px, py)


def pure_pursuit(x: float, y: float, heading: float,
                 remaining_route: tuple[Waypoint, ...],
                 lookahead: float, wheelbase: float, max_steer: float) -> float:
    """Steer toward the route point one lookahead ahead."""
    tx, ty = route_point_ahead(x, y, remaining_route, lookahead)
    if tx == x and ty == y:
        return 0.0
    alpha = wrap_angle(math.atan2(ty - y, tx - x) - heading)
    steer = math.atan(2.0 * wheelbase * math.sin(alpha) / lookahead)
    return min(max(steer, -max_steer), max_steer)


def idm_acceleration(v: float, v_lead: float | None, gap: float | None,
                     params: IdmParams, max_decel: float) -> float:
    """Intelligent Driver Model; ``gap=None`` means free road ahead.

    A non-positive gap is treated defensively as maximal braking.
    """
    v0 = max(params.v0, 0.5)  # keep the free-flow term defined
    free = 1.0 - (v / v0) ** 4
    if gap is None:
        accel = params.a_max * free
    elif gap <= 0.0:
        return -max_decel
    else:
        lead = v_lead if v_lead is not None else 0.0
        s_star = params.s0 + v * params.T + v * (v - lead) / (2.0 * math.sqrt(params.a_max * params.b))
        accel = params.a_max * (free - (s_star / gap) ** 2)
    return min(max(accel, -max_decel), params.a_max)


def proportional_speed(v: float, target: float, max_accel: float, max_decel: float) -> float:
    return min(max(SPEED_GAIN * (target - v), -max_decel), max_accel)
