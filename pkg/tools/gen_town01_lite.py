"""Generates the bundled Town01-lite map: a 4x4 grid of two-lane roads.

Blocks are 100 m, right-hand traffic with 1.75 m lane offset, 16 m junction
boxes with arc connectors for every legal turn, and the four inner
junctions signalized. Run from the repository root:

    python tools/gen_town01_lite.py
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from scenosearch.jsonio import canonical_dumps  # noqa: E402

GRID_N = 4
BLOCK = 100.0
HALF_BOX = 8.0
LANE_OFFSET = 1.75
ROAD_SPEED = 10.0
CONNECTOR_SPEED = 4.0
SIGNALIZED = {(1, 1), (1, 2), (2, 1), (2, 2)}

DIRS = {"E": (1, 0), "N": (0, 1), "W": (-1, 0), "S": (0, -1)}
OPPOSITE = {"E": "W", "W": "E", "N": "S", "S": "N"}


def node_pos(node):
    return (BLOCK * node[0], BLOCK * node[1])


def right_of(d):
    dx, dy = DIRS[d]
    return (dy, -dx)


def road_lane_id(a, b):
    return f"L_{a[0]}{a[1]}_{b[0]}{b[1]}"


def connector_id(node, din, dout):
    return f"J_{node[0]}{node[1]}_{din}{dout}"


def build():
    lanes = {}       # id -> dict entry (successors filled later)
    incoming = {}    # node -> list[(direction of travel, lane_id)]
    outgoing = {}    # node -> list[(direction of travel, lane_id)]

    nodes = [(i, j) for i in range(GRID_N) for j in range(GRID_N)]
    for a in nodes:
        ax, ay = node_pos(a)
        for d, (dx, dy) in DIRS.items():
            b = (a[0] + dx, a[1] + dy)
            if not (0 <= b[0] < GRID_N and 0 <= b[1] < GRID_N):
                continue
            bx, by = node_pos(b)
            rx, ry = right_of(d)
            start = (ax + dx * HALF_BOX + rx * LANE_OFFSET, ay + dy * HALF_BOX + ry * LANE_OFFSET)
            end = (bx - dx * HALF_BOX + rx * LANE_OFFSET, by - dy * HALF_BOX + ry * LANE_OFFSET)
            lid = road_lane_id(a, b)
            lanes[lid] = {
                "lane_id": lid,
                "centerline": [list(start), list(end)],
                "successors": [],
                "speed_limit": ROAD_SPEED,
            }
            outgoing.setdefault(a, []).append((d, lid))
            incoming.setdefault(b, []).append((d, lid))

    junctions = []
    for node in nodes:
        members = []
        approaches = {}
        for din, in_lane in sorted(incoming.get(node, [])):
            approaches[in_lane] = 0 if din in ("E", "W") else 1
            p1 = tuple(lanes[in_lane]["centerline"][-1])
            h1 = DIRS[din]
            for dout, out_lane in sorted(outgoing.get(node, [])):
                if dout == OPPOSITE[din]:
                    continue  # no U-turns
                p2 = tuple(lanes[out_lane]["centerline"][0])
                h2 = DIRS[dout]
                cid = connector_id(node, din, dout)
                lanes[cid] = {
                    "lane_id": cid,
                    "centerline": [list(p) for p in connector_polyline(p1, h1, p2, h2)],
                    "successors": [out_lane],
                    "speed_limit": CONNECTOR_SPEED,
                }
                lanes[in_lane]["successors"].append(cid)
                members.append(cid)
        if not members:
            continue
        junctions.append({
            "junction_id": f"X_{node[0]}{node[1]}",
            "members": members,
            "signalized": node in SIGNALIZED,
            "approaches": approaches,
            "center": list(node_pos(node)),
        })

    doc = {
        "town": "Town01-lite",
        "lanes": [lanes[k] for k in sorted(lanes)],
        "junctions": junctions,
    }
    return doc


def connector_polyline(p1, h1, p2, h2):
    if h1 == h2:
        return [p1, p2]
    # Quarter arc: center sits on the perpendicular through each endpoint.
    cx = p1[0] if h1[0] != 0 else p2[0]
    cy = p1[1] if h1[1] != 0 else p2[1]
    r = math.hypot(p1[0] - cx, p1[1] - cy)
    a0 = math.atan2(p1[1] - cy, p1[0] - cx)
    sweep = math.pi / 2 if (h1[0] * h2[1] - h1[1] * h2[0]) > 0 else -math.pi / 2
    n = max(3, int(math.ceil(r * math.pi / 2)))  # ~1 m sampling
    pts = [p1]
    for k in range(1, n):
        a = a0 + sweep * k / n
        pts.append((cx + r * math.cos(a), cy + r * math.sin(a)))
    pts.append(p2)
    return pts


def main():
    out = Path(__file__).resolve().parents[1] / "src" / "scenosearch" / "data" / "Town01-lite.map.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(canonical_dumps(build()))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
