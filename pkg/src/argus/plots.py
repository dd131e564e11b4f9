"""SVG plot export for run traces (write-only, no interactive UI)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Polygon as MplPolygon  # noqa: E402

from .geometry import OrientedBox, Pose2  # noqa: E402
from .world import STATIC_OBSTACLE, Scenario, signal_region  # noqa: E402

OWNER_COLORS = {"ADS": "#1f77b4", "MITIGATOR": "#ff7f0e"}


def _draw_box(ax, box: OrientedBox, **kwargs):
    ax.add_patch(MplPolygon(box.corners(), closed=True, **kwargs))


def plot_overhead(scenario: Scenario, records: list[dict], path: str | Path) -> Path:
    """Top-down view: map, actors' final poses and trails, and the ego path
    colored by control ownership."""
    fig, ax = plt.subplots(figsize=(12, 4))
    for lane in scenario.road.lanes.values():
        pts = lane.centerline.points
        ax.plot(pts[:, 0], pts[:, 1], color="#cccccc", lw=lane.width * 2.0,
                alpha=0.4, zorder=0, solid_capstyle="butt")
        ax.plot(pts[:, 0], pts[:, 1], color="#999999", lw=0.6, ls="--", zorder=1)
    for b in scenario.road.boundaries:
        ax.plot(b.points[:, 0], b.points[:, 1], color="black", lw=1.2, zorder=2)
    for sig in scenario.signals:
        region = signal_region(sig, scenario.road)
        if region is not None:
            _draw_box(ax, region, facecolor="red", alpha=0.25, edgecolor="red")
            ax.plot(sig.pose.x, sig.pose.y, "rv", ms=6)

    by_owner: dict[str, list[list[float]]] = {}
    for rec in records:
        by_owner.setdefault(rec["owner"], []).append(rec["ego"][:2])
    for owner, pts in by_owner.items():
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.plot(xs, ys, ".", ms=2.0, color=OWNER_COLORS.get(owner, "gray"),
                label=f"ego ({owner.lower()})")

    actor_specs = {a.actor_id: a for a in scenario.actors}
    if records:
        last = records[-1]
        for aid, x, y, theta, _v in last["others"]:
            spec = actor_specs.get(aid)
            if spec is None:
                continue
            color = "#444444" if spec.kind == STATIC_OBSTACLE else "#2ca02c"
            _draw_box(ax, OrientedBox(Pose2(x, y, theta), spec.length,
                                      spec.width or 0.5),
                      facecolor=color, alpha=0.6, edgecolor="black", lw=0.5)
        trails: dict[str, list[list[float]]] = {}
        for rec in records:
            for aid, x, y, *_ in rec["others"]:
                trails.setdefault(aid, []).append([x, y])
        for aid, pts in trails.items():
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            ax.plot(xs, ys, "-", lw=0.5, color="#2ca02c", alpha=0.5)

    for rec in records:
        if rec.get("takeover"):
            ax.plot(rec["ego"][0], rec["ego"][1], "x", color="red", ms=8, mew=2)

    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"{scenario.name} — overhead")
    ax.legend(loc="upper right", fontsize=7)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    return path


def plot_timeseries(scenario: Scenario, records: list[dict], path: str | Path) -> Path:
    """Speed and leading-gap time series with takeover spans shaded."""
    dt = scenario.dt
    t = [rec["frame"] * dt for rec in records]
    v = [rec["ego"][3] for rec in records]
    desired = [rec["desired_speed"] for rec in records]
    gap = [min((l[1] for l in rec["leads"]), default=None) if "leads" in rec else None
           for rec in records]

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(10, 5), sharex=True)
    ax1.plot(t, v, label="speed", color="#1f77b4")
    ax1.plot(t, desired, label="desired", color="#ff7f0e", lw=0.8, ls="--")
    ax1.set_ylabel("speed [m/s]")
    ax1.legend(loc="upper right", fontsize=7)

    ax2.plot(t, [g if g is not None else float("nan") for g in gap],
             color="#2ca02c", label="min leading gap")
    ax2.set_ylabel("gap [m]")
    ax2.set_xlabel("time [s]")
    ax2.legend(loc="upper right", fontsize=7)

    in_takeover = False
    t_start = 0.0
    for rec in records + [None]:
        active = rec is not None and rec["owner"] == "MITIGATOR"
        now = rec["frame"] * dt if rec is not None else (t[-1] if t else 0.0)
        if active and not in_takeover:
            in_takeover, t_start = True, now
        elif not active and in_takeover:
            in_takeover = False
            for ax in (ax1, ax2):
                ax.axvspan(t_start, now, color="#ff7f0e", alpha=0.15)
    for rec in records:
        for kind, *_ in rec.get("violations", []):
            ax1.axvline(rec["frame"] * dt, color="red", lw=1.0, ls=":")

    ax1.set_title(f"{scenario.name} — speed / gap")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    return path
