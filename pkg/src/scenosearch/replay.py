"""Render recorded traces to static vector frames (map, actors, lights)."""

from __future__ import annotations

import math
from pathlib import Path

from .engine import oracle_collision, oracle_completion, oracle_stuck
from .errors import MapIntegrityError
from .geometry import obb_corners
from .roadnet import RoadNetwork, load_town
from .traces import KIND_TRAFFIC_LIGHT, SceneObs, Trace, parse_trace

ACTOR_COLORS = {
    "ego": "tab:blue",
    "npc_vehicle": "tab:orange",
    "walker": "tab:green",
    "obstacle": "dimgray",
}
PHASE_COLORS = {"green": "limegreen", "yellow": "gold", "red": "red"}


def _bounds(net: RoadNetwork | None, trace: Trace) -> tuple[float, float, float, float]:
    xs, ys = [], []
    if net is not None:
        for lane in net.lanes.values():
            for x, y in lane.centerline:
                xs.append(x)
                ys.append(y)
    for obs in trace.observations:
        for actor in (*obs.egos, *obs.other_actors):
            xs.append(actor.x)
            ys.append(actor.y)
    pad = 10.0
    return min(xs) - pad, max(xs) + pad, min(ys) - pad, max(ys) + pad


def _draw_frame(ax, net: RoadNetwork | None, obs: SceneObs,
                bounds: tuple[float, float, float, float]) -> None:
    from matplotlib.patches import Circle, Polygon

    if net is not None:
        for lane in net.lanes.values():
            xs = [p[0] for p in lane.centerline]
            ys = [p[1] for p in lane.centerline]
            ax.plot(xs, ys, color="0.85", linewidth=0.8, zorder=1)
    for actor in (*obs.egos, *obs.other_actors):
        if actor.kind == KIND_TRAFFIC_LIGHT:
            offset = -3.0 if actor.id.endswith("#g0") else 3.0
            ax.add_patch(Circle((actor.x + offset, actor.y), radius=1.5,
                                color=PHASE_COLORS.get(actor.phase, "gray"), zorder=3))
            continue
        corners = obb_corners(actor.pose, actor.extent)
        ax.add_patch(Polygon(corners, closed=True,
                             facecolor=ACTOR_COLORS.get(actor.kind, "black"),
                             edgecolor="black", linewidth=0.4, zorder=4))
        if actor.kind == "ego":
            ax.annotate(actor.id, (actor.x, actor.y),
                        textcoords="offset points", xytext=(4, 4), fontsize=6, zorder=5)
    ax.set_xlim(bounds[0], bounds[1])
    ax.set_ylim(bounds[2], bounds[3])
    ax.set_aspect("equal")
    ax.set_title(f"step {obs.step}  t={obs.timestamp:.2f} s", fontsize=9)


def render_trace(trace_path: str | Path, out_dir: str | Path,
                 frame_stride: int = 20) -> list[Path]:
    """One SVG frame per frame_stride steps plus a violation summary frame.

    Always emits the first and the final recorded step, so an oversized
    stride yields exactly two frames plus the summary.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if frame_stride < 1:
        raise ValueError("frame_stride must be >= 1")
    trace = parse_trace(Path(trace_path).read_text())
    try:
        net = load_town(trace.town)
    except MapIntegrityError:
        net = None  # trace from an unbundled map still renders actors
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bounds = _bounds(net, trace)

    selected = [obs for i, obs in enumerate(trace.observations)
                if obs.step % frame_stride == 0 or i in (0, len(trace.observations) - 1)]
    seen = set()
    frames = []
    for obs in selected:
        if obs.step in seen:
            continue
        seen.add(obs.step)
        fig, ax = plt.subplots(figsize=(7, 7))
        _draw_frame(ax, net, obs, bounds)
        path = out_dir / f"frame_{obs.step:06d}.svg"
        fig.savefig(path)
        plt.close(fig)
        frames.append(path)

    # Summary: final frame plus violation markers from the oracles.
    fig, ax = plt.subplots(figsize=(7, 7))
    final = trace.observations[-1]
    _draw_frame(ax, net, final, bounds)
    labels = []
    for verdict in (oracle_collision(trace), oracle_stuck(trace), oracle_completion(trace)):
        if not verdict.violated:
            continue
        d = verdict.detail
        ax.plot([d.x], [d.y], marker="x", markersize=14, markeredgewidth=3,
                color="crimson", zorder=6)
        ax.annotate(f"{verdict.oracle}: {', '.join(d.actors)}", (d.x, d.y),
                    textcoords="offset points", xytext=(6, -10),
                    fontsize=7, color="crimson", zorder=6)
        labels.append(verdict.oracle)
    suffix = f"violations: {', '.join(labels)}" if labels else "no violations"
    ax.set_title(f"{trace.scenario_id}  termination={trace.termination}  {suffix}",
                 fontsize=9)
    path = out_dir / "summary.svg"
    fig.savefig(path)
    plt.close(fig)
    frames.append(path)
    return frames
