"""Shared fixtures and independent brute-force oracles for the test suite."""

from __future__ import annotations

import math
import random
from pathlib import Path

import pytest

from scenosearch.catalog import DEFAULT_CATALOG
from scenosearch.geometry import obb_corners
from scenosearch.roadnet import generate_seed_scenarios, load_town
from scenosearch.scenario import parse_scenario
from scenosearch.world import SimConfig

REPO_ROOT = Path(__file__).resolve().parents[1]
CONFIGS = REPO_ROOT / "configs"


@pytest.fixture(scope="session")
def net():
    return load_town("Town01-lite")


@pytest.fixture(scope="session")
def catalog():
    return DEFAULT_CATALOG


@pytest.fixture(scope="session")
def sim_cfg():
    return SimConfig()


@pytest.fixture(scope="session")
def demo_seeds(net):
    return generate_seed_scenarios(net, 5, 50, 200, rng_seed=1234)


@pytest.fixture(scope="session")
def deadlock_scenario():
    return parse_scenario((CONFIGS / "deadlock_three_av.scn.json").read_text())


# --------------------------------------------------------------------- #
# Independent oracles (deliberately different algorithms than the package)
# --------------------------------------------------------------------- #

def brute_force_shortest_length(net, start, goal) -> float | None:
    """Exhaustive DFS over lane chains, exact under admissible pruning.

    Mirrors the routing problem definition: cost from the start projection
    to the goal projection, traversing whole lanes in between. Branches are
    cut only when they provably cannot beat the incumbent (straight-line
    lower bound, cost dominance per lane), so the result stays exact.
    """
    from scenosearch.roadnet import nearest_lane_point

    ls, arc_s, _ = nearest_lane_point(net, start)
    lg, arc_g, _ = nearest_lane_point(net, goal)
    best = [math.inf]
    if ls == lg and arc_g > arc_s + 0.01:
        best[0] = arc_g - arc_s

    start_cost = net.lanes[ls].length - arc_s
    cheapest: dict[str, float] = {}

    def dfs(lane_id: str, cost: float):
        if cost >= cheapest.get(lane_id, math.inf):
            return
        cheapest[lane_id] = cost
        lane = net.lanes[lane_id]
        head = lane.centerline[0]
        if cost + math.dist(head, goal) - 6.0 >= best[0]:
            return
        if lane_id == lg and 0.01 < cost + arc_g < best[0]:
            best[0] = cost + arc_g
        for succ in lane.successors:
            dfs(succ, cost + lane.length)

    for succ in net.lanes[ls].successors:
        dfs(succ, start_cost)
    return None if math.isinf(best[0]) else best[0]


class DenseLaneSamples:
    """Every centerline sampled at 0.1 m arc steps, vectorized for queries."""

    def __init__(self, net, step: float = 0.1):
        import numpy as np

        xs, ys, arcs, lane_idx = [], [], [], []
        self.lane_ids = sorted(net.lanes)
        for li, lane_id in enumerate(self.lane_ids):
            pts = net.lanes[lane_id].centerline
            arc0 = 0.0
            for i in range(1, len(pts)):
                ax, ay = pts[i - 1]
                bx, by = pts[i]
                seg = math.hypot(bx - ax, by - ay)
                n = max(1, int(seg / step))
                for k in range(n + 1):
                    t = k / n
                    xs.append(ax + t * (bx - ax))
                    ys.append(ay + t * (by - ay))
                    arcs.append(arc0 + t * seg)
                    lane_idx.append(li)
                arc0 += seg
        self.x = np.asarray(xs)
        self.y = np.asarray(ys)
        self.arc = np.asarray(arcs)
        self.lane = np.asarray(lane_idx)

    def nearest(self, p):
        import numpy as np

        d2 = (self.x - p[0]) ** 2 + (self.y - p[1]) ** 2
        i = int(np.argmin(d2))
        return self.lane_ids[self.lane[i]], float(self.arc[i]), math.sqrt(float(d2[i]))


@pytest.fixture(scope="session")
def dense_samples(net):
    return DenseLaneSamples(net)


def point_in_obb(p, pose, extent) -> bool:
    dx, dy = p[0] - pose[0], p[1] - pose[1]
    cos_h, sin_h = math.cos(pose[2]), math.sin(pose[2])
    local_x = dx * cos_h + dy * sin_h
    local_y = -dx * sin_h + dy * cos_h
    return abs(local_x) <= extent[0] / 2.0 and abs(local_y) <= extent[1] / 2.0


def sampled_obb_overlap(pose_a, extent_a, pose_b, extent_b, grid: float = 0.02) -> bool:
    """Point-sampling containment oracle: does any grid point of A sit in B
    (or a corner of B in A)?"""
    nx = max(2, int(extent_a[0] / grid))
    ny = max(2, int(extent_a[1] / grid))
    cos_h, sin_h = math.cos(pose_a[2]), math.sin(pose_a[2])
    for i in range(nx + 1):
        lx = -extent_a[0] / 2.0 + extent_a[0] * i / nx
        for j in range(ny + 1):
            ly = -extent_a[1] / 2.0 + extent_a[1] * j / ny
            p = (pose_a[0] + lx * cos_h - ly * sin_h,
                 pose_a[1] + lx * sin_h + ly * cos_h)
            if point_in_obb(p, pose_b, extent_b):
                return True
    for corner in obb_corners(pose_b, extent_b):
        if point_in_obb(corner, pose_a, extent_a):
            return True
    return False


def _point_segment_distance(p, a, b) -> float:
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    seg_sq = dx * dx + dy * dy
    if seg_sq == 0.0:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = min(max(((p[0] - ax) * dx + (p[1] - ay) * dy) / seg_sq, 0.0), 1.0)
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


def vertex_edge_obb_distance(pose_a, extent_a, pose_b, extent_b) -> float:
    """Brute-force vertex against edge distance for two disjoint rectangles."""
    ca = obb_corners(pose_a, extent_a)
    cb = obb_corners(pose_b, extent_b)
    best = math.inf
    for corners, other in ((ca, cb), (cb, ca)):
        for p in corners:
            for k in range(4):
                best = min(best, _point_segment_distance(p, other[k], other[(k + 1) % 4]))
    return best


def random_pose(rng: random.Random, span: float = 12.0):
    pose = (rng.uniform(-span, span), rng.uniform(-span, span),
            rng.uniform(-math.pi, math.pi))
    extent = (rng.uniform(0.5, 6.0), rng.uniform(0.5, 3.0))
    return pose, extent


def idm_reference(v, v_lead, gap, v0, T, s0, a_max, b, max_decel) -> float:
    """Independent transcription of the IDM formula for cross-checking."""
    if gap <= 0:
        return -max_decel
    desired_gap = s0 + v * T + (v * (v - v_lead)) / (2.0 * math.sqrt(a_max * b))
    raw = a_max * (1.0 - (v / max(v0, 0.5)) ** 4 - (desired_gap / gap) ** 2)
    return max(min(raw, a_max), -max_decel)
