"""Oriented-rectangle collision and clearance primitives.

Poses are (x, y, heading) with heading counterclockwise from +x; extents
are (length, width) with length along the heading.
"""

from __future__ import annotations

import math

Pose = tuple[float, float, float]
Extent = tuple[float, float]
Point = tuple[float, float]


def obb_corners(pose: Pose, extent: Extent) -> tuple[Point, Point, Point, Point]:
    x, y, heading = pose
    hl, hw = extent[0] / 2.0, extent[1] / 2.0
    ux, uy = math.cos(heading), math.sin(heading)
    vx, vy = -uy, ux
    return (
        (x + hl * ux + hw * vx, y + hl * uy + hw * vy),
        (x - hl * ux + hw * vx, y - hl * uy + hw * vy),
        (x - hl * ux - hw * vx, y - hl * uy - hw * vy),
        (x + hl * ux - hw * vx, y + hl * uy - hw * vy),
    )


def obb_intersects(pose_a: Pose, extent_a: Extent, pose_b: Pose, extent_b: Extent) -> bool:
    """Separating-axis test over the 4 face normals; touching counts as overlap."""
    ca = obb_corners(pose_a, extent_a)
    cb = obb_corners(pose_b, extent_b)
    for heading in (pose_a[2], pose_a[2] + math.pi / 2, pose_b[2], pose_b[2] + math.pi / 2):
        ax, ay = math.cos(heading), math.sin(heading)
        min_a = min_b = math.inf
        max_a = max_b = -math.inf
        for px, py in ca:
            proj = px * ax + py * ay
            min_a = min(min_a, proj)
            max_a = max(max_a, proj)
        for px, py in cb:
            proj = px * ax + py * ay
            min_b = min(min_b, proj)
            max_b = max(max_b, proj)
        if min_a > max_b or min_b > max_a:
            return False
    return True


def _segment_closest_points(p1: Point, p2: Point, q1: Point, q2: Point) -> float:
    """Minimum distance between two segments via clamped closest parameters."""
    d1x, d1y = p2[0] - p1[0], p2[1] - p1[1]
    d2x, d2y = q2[0] - q1[0], q2[1] - q1[1]
    rx, ry = p1[0] - q1[0], p1[1] - q1[1]
    a = d1x * d1x + d1y * d1y
    e = d2x * d2x + d2y * d2y
    f = d2x * rx + d2y * ry
    if a == 0.0 and e == 0.0:
        return math.hypot(rx, ry)
    if a == 0.0:
        t = min(max(f / e, 0.0), 1.0)
        s = 0.0
    else:
        c = d1x * rx + d1y * ry
        if e == 0.0:
            t = 0.0
            s = min(max(-c / a, 0.0), 1.0)
        else:
            b = d1x * d2x + d1y * d2y
            denom = a * e - b * b
            s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom != 0.0 else 0.0
            t = b * s + f
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > e:
                t = 1.0
                s = min(max((b - c) / a, 0.0), 1.0)
            else:
                t /= e
    cpx = p1[0] + d1x * s - (q1[0] + d2x * t)
    cpy = p1[1] + d1y * s - (q1[1] + d2y * t)
    return math.hypot(cpx, cpy)


def obb_distance(pose_a: Pose, extent_a: Extent, pose_b: Pose, extent_b: Extent) -> float:
    """Minimum Euclidean distance between two rectangles; 0 iff they intersect."""
    if obb_intersects(pose_a, extent_a, pose_b, extent_b):
        return 0.0
    ca = obb_corners(pose_a, extent_a)
    cb = obb_corners(pose_b, extent_b)
    best = math.inf
    for i in range(4):
        a1, a2 = ca[i], ca[(i + 1) % 4]
        for j in range(4):
            b1, b2 = cb[j], cb[(j + 1) % 4]
            best = min(best, _segment_closest_points(a1, a2, b1, b2))
    return best
