"""Ground-truth worlds (discs and axis-aligned boxes) and their costmap
rasterization. Rendering is exact against the analytic geometry: a cell is
occupied iff its center lies inside an obstacle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..grids import OccupancyGrid
from ..neural.dataset import ObservationSpec

WORLD_BOUND = 3.5   # world is [-3.5, 3.5]^2 (the 6x6 m costmap is a local view)
DEFAULT_START = (-2.8, -2.8)
DEFAULT_GOAL = (2.8, 2.8)
OBSTACLE_BOX = 2.7  # obstacle centers sampled in [-2.7, 2.7]^2
MIN_CLEARANCE = 0.3
TREE_SEPARATION = 0.3  # min surface-to-surface distance between trees


@dataclass(frozen=True)
class Disc:
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class Rect:
    center: tuple[float, float]
    half_extents: tuple[float, float]


@dataclass(frozen=True)
class Environment:
    bound: float
    discs: tuple[Disc, ...]
    rects: tuple[Rect, ...]
    start: tuple[float, float]
    goal: tuple[float, float]
    seed: int = 0

    def collides(self, p) -> bool:
        x, y = float(p[0]), float(p[1])
        for d in self.discs:
            if (x - d.center[0]) ** 2 + (y - d.center[1]) ** 2 <= d.radius ** 2:
                return True
        for r in self.rects:
            if (abs(x - r.center[0]) <= r.half_extents[0]
                    and abs(y - r.center[1]) <= r.half_extents[1]):
                return True
        return False

    def clearance(self, p) -> float:
        """Distance from p to the nearest obstacle surface (negative inside)."""
        x, y = float(p[0]), float(p[1])
        best = np.inf
        for d in self.discs:
            best = min(best, np.hypot(x - d.center[0], y - d.center[1]) - d.radius)
        for r in self.rects:
            dx = abs(x - r.center[0]) - r.half_extents[0]
            dy = abs(y - r.center[1]) - r.half_extents[1]
            outside = np.hypot(max(dx, 0.0), max(dy, 0.0))
            inside = min(max(dx, dy), 0.0)
            best = min(best, outside + inside)
        return float(best)


def generate_forest(seed: int, n_obstacles: int = 10,
                    radius_range: tuple[float, float] = (0.5, 0.5),
                    start: tuple[float, float] = DEFAULT_START,
                    goal: tuple[float, float] = DEFAULT_GOAL,
                    clearance: float = MIN_CLEARANCE,
                    obstacle_box: float = OBSTACLE_BOX,
                    separation: float = TREE_SEPARATION,
                    max_rejections: int = 10_000) -> Environment:
    """Disc forest with rejection sampling.

    Deterministic per seed. Trees are disjoint with at least `separation`
    meters of surface-to-surface distance (a physical forest; deep overlaps
    would create closed pockets no local filter can escape), and every disc
    keeps `clearance` meters from both the start and the goal.
    """
    lo, hi = radius_range
    if not (0 < lo <= hi <= 1.5):
        raise ValueError("radius range must lie within (0, 1.5]")
    rng = np.random.default_rng(seed)
    discs: list[Disc] = []
    rejections = 0
    while len(discs) < n_obstacles:
        c = rng.uniform(-obstacle_box, obstacle_box, size=2)
        r = rng.uniform(lo, hi)
        ok = (np.hypot(*(c - np.asarray(start))) - r >= clearance
              and np.hypot(*(c - np.asarray(goal))) - r >= clearance
              and all(np.hypot(c[0] - d.center[0], c[1] - d.center[1])
                      >= r + d.radius + separation for d in discs))
        if ok:
            discs.append(Disc((float(c[0]), float(c[1])), float(r)))
        else:
            rejections += 1
            if rejections > max_rejections:
                raise RuntimeError(f"forest sampling failed after {max_rejections} "
                                   f"rejections (seed {seed})")
    return Environment(bound=WORLD_BOUND, discs=tuple(discs), rects=(),
                       start=start, goal=goal, seed=seed)


def warehouse_environment(seed: int = 0) -> Environment:
    """Fixed aisle-style layout: shelf rows plus a few stray discs."""
    rng = np.random.default_rng(seed)
    rects = (
        Rect((-1.2, -0.6), (0.3, 1.9)),
        Rect((1.4, 0.9), (0.3, 1.7)),
        Rect((0.0, 2.6), (1.6, 0.25)),
    )
    discs = tuple(Disc((float(x), float(y)), 0.3)
                  for x, y in rng.uniform(-2.0, 2.0, size=(3, 2))
                  if not (abs(x) < 0.5 and abs(y) < 0.5))
    return Environment(bound=WORLD_BOUND, discs=discs, rects=rects,
                       start=DEFAULT_START, goal=DEFAULT_GOAL, seed=seed)


def render_local_costmap(env: Environment, center, obs: ObservationSpec) -> OccupancyGrid:
    """Square occupancy grid of side `obs.size` centered at `center`."""
    cx, cy = float(center[0]), float(center[1])
    if abs(cx) > env.bound or abs(cy) > env.bound:
        raise ValueError("costmap center outside world bounds")
    n, res = obs.size, obs.resolution
    origin = (cx - obs.extent / 2, cy - obs.extent / 2)
    xs = origin[0] + (np.arange(n) + 0.5) * res
    ys = origin[1] + (np.arange(n) + 0.5) * res
    gx, gy = np.meshgrid(xs, ys)  # [iy, ix]
    occupied = np.zeros((n, n), dtype=bool)
    for d in env.discs:
        occupied |= (gx - d.center[0]) ** 2 + (gy - d.center[1]) ** 2 <= d.radius ** 2
    for r in env.rects:
        occupied |= ((np.abs(gx - r.center[0]) <= r.half_extents[0])
                     & (np.abs(gy - r.center[1]) <= r.half_extents[1]))
    return OccupancyGrid(n, n, res, origin, occupied.astype(np.uint8))


def render_world_costmap(env: Environment, obs_resolution: float) -> OccupancyGrid:
    """Full-world rasterization (for ground-truth HJ solves)."""
    n = int(round(2 * env.bound / obs_resolution))
    origin = (-env.bound, -env.bound)
    xs = origin[0] + (np.arange(n) + 0.5) * obs_resolution
    gx, gy = np.meshgrid(xs, xs)
    occupied = np.zeros((n, n), dtype=bool)
    for d in env.discs:
        occupied |= (gx - d.center[0]) ** 2 + (gy - d.center[1]) ** 2 <= d.radius ** 2
    for r in env.rects:
        occupied |= ((np.abs(gx - r.center[0]) <= r.half_extents[0])
                     & (np.abs(gy - r.center[1]) <= r.half_extents[1]))
    return OccupancyGrid(n, n, obs_resolution, origin, occupied.astype(np.uint8))
