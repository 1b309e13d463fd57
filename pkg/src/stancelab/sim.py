"""Deterministic differential-drive simulation: grid A* planning, string-pulled
paths, and a rotate-then-drive pursuit controller with fixed-step Euler
integration. Everything is seed- and input-deterministic by construction."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .model import Pose, normalize_angle
from .world import OccupancyGrid, WorldSpec, rasterize


class SimError(Exception):
    code = "sim_error"


class UnreachableGoalError(SimError):
    code = "unreachable_goal"


class NoPathError(SimError):
    code = "no_path"


@dataclass(frozen=True)
class NavConfig:
    v_max: float = 0.26
    omega_max: float = 1.82
    dt: float = 0.05
    arrival_tolerance: float = 0.15
    robot_radius: float = 0.22
    planning_margin: float = 0.20
    switch_radius: float = 0.15
    rotate_threshold: float = 0.30
    k_omega: float = 2.5
    resolution: float = 0.10
    odometry_noise: bool = False
    noise_sigma_xy: float = 0.02
    noise_sigma_theta: float = 0.01


@dataclass(frozen=True)
class KinematicState:
    pose: Pose
    v: float = 0.0
    omega: float = 0.0


@dataclass(frozen=True)
class NavPlan:
    goal: Pose
    path: tuple[tuple[float, float], ...]  # string-pulled waypoints, start..goal
    arrival_tolerance: float
    grid_length: float  # optimal 8-connected grid cost in meters (pre-smoothing)

    @property
    def length(self) -> float:
        return sum(
            math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(self.path, self.path[1:])
        )


@dataclass(frozen=True)
class PlanExecution:
    """A NavPlan plus pursuit cursor state; advanced immutably by step()."""

    plan: NavPlan
    cursor: int = 1  # index of the waypoint currently pursued
    initial_length: float = 0.0
    max_progress: float = 0.0

    @classmethod
    def start(cls, plan: NavPlan) -> "PlanExecution":
        return cls(plan=plan, cursor=min(1, len(plan.path) - 1),
                   initial_length=max(plan.length, 1e-9))


# Fixed neighbor ordering: E, N, W, S, NE, NW, SW, SE.
_NEIGHBORS = ((1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (-1, -1), (1, -1))
_SQRT2 = math.sqrt(2.0)


def _octile(ax: int, ay: int, bx: int, by: int) -> float:
    dx, dy = abs(ax - bx), abs(ay - by)
    return (dx + dy) + (_SQRT2 - 2.0) * min(dx, dy)


def _nearest_free_cell(grid: OccupancyGrid, ix: int, iy: int,
                       max_radius_cells: int = 4) -> Optional[tuple[int, int]]:
    if grid.in_grid(ix, iy) and not grid.is_occupied_cell(ix, iy):
        return ix, iy
    for r in range(1, max_radius_cells + 1):
        candidates = []
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if max(abs(dx), abs(dy)) != r:
                    continue
                jx, jy = ix + dx, iy + dy
                if grid.in_grid(jx, jy) and not grid.is_occupied_cell(jx, jy):
                    candidates.append((dx * dx + dy * dy, jy * grid.nx + jx, jx, jy))
        if candidates:
            candidates.sort()
            return candidates[0][2], candidates[0][3]
    return None


def grid_path(grid: OccupancyGrid, start_cell: tuple[int, int],
              goal_cell: tuple[int, int]) -> tuple[list[tuple[int, int]], float]:
    """A* over the occupancy grid; returns (cell path, cost in meters).

    Deterministic: fixed neighbor order, heap ties broken by cell index.
    Diagonal moves are blocked when either adjacent orthogonal cell is occupied.
    """
    nx = grid.nx
    occ = grid.occupied
    sx, sy = start_cell
    gx, gy = goal_cell
    start_idx = sy * nx + sx
    goal_idx = gy * nx + gx

    g_score: dict[int, float] = {start_idx: 0.0}
    came_from: dict[int, int] = {}
    open_heap: list[tuple[float, int]] = [(_octile(sx, sy, gx, gy), start_idx)]
    closed: set[int] = set()

    while open_heap:
        _, current = heapq.heappop(open_heap)
        if current in closed:
            continue
        if current == goal_idx:
            break
        closed.add(current)
        cx, cy = current % nx, current // nx
        base_g = g_score[current]
        for dx, dy in _NEIGHBORS:
            jx, jy = cx + dx, cy + dy
            if not grid.in_grid(jx, jy) or occ[jy, jx]:
                continue
            if dx != 0 and dy != 0 and (occ[cy, jx] or occ[jy, cx]):
                continue  # no corner cutting
            neighbor = jy * nx + jx
            tentative = base_g + (_SQRT2 if dx and dy else 1.0)
            if tentative < g_score.get(neighbor, math.inf) - 1e-12:
                g_score[neighbor] = tentative
                came_from[neighbor] = current
                f = tentative + _octile(jx, jy, gx, gy)
                heapq.heappush(open_heap, (f, neighbor))
    else:
        raise NoPathError("no path between start and goal on this grid")

    if goal_idx not in g_score:
        raise NoPathError("no path between start and goal on this grid")

    cells = [goal_idx]
    while cells[-1] != start_idx:
        cells.append(came_from[cells[-1]])
    cells.reverse()
    return [(c % nx, c // nx) for c in cells], g_score[goal_idx] * grid.resolution


def _segment_free(grid: OccupancyGrid, a: tuple[float, float], b: tuple[float, float]) -> bool:
    dist = math.hypot(b[0] - a[0], b[1] - a[1])
    steps = max(1, int(math.ceil(dist / (grid.resolution * 0.5))))
    for i in range(steps + 1):
        t = i / steps
        if grid.is_occupied_xy(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])):
            return False
    return True


def _string_pull(grid: OccupancyGrid, points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    if len(points) <= 2:
        return points
    out = [points[0]]
    i = 0
    while i < len(points) - 1:
        j = len(points) - 1
        while j > i + 1 and not _segment_free(grid, points[i], points[j]):
            j -= 1
        out.append(points[j])
        i = j
    return out


def plan(grid: OccupancyGrid, start: Pose, goal: Pose,
         arrival_tolerance: float = 0.15) -> NavPlan:
    """Plan a collision-free path from start to goal over the grid."""
    six, siy = grid.cell_of(start.x, start.y)
    gix, giy = grid.cell_of(goal.x, goal.y)
    if not grid.in_grid(six, siy) or not grid.in_grid(gix, giy):
        raise SimError("start and goal must lie inside the world bounds")
    if grid.is_occupied_cell(gix, giy):
        raise UnreachableGoalError(
            f"goal ({goal.x:.2f}, {goal.y:.2f}) lies inside an inflated obstacle"
        )
    snapped = _nearest_free_cell(grid, six, siy)
    if snapped is None:
        raise UnreachableGoalError("start pose is blocked on every side")

    cells, cost = grid_path(grid, snapped, (gix, giy))
    points = [(start.x, start.y)] + [grid.center(ix, iy) for ix, iy in cells]
    points.append((goal.x, goal.y))
    path = _string_pull(grid, points)
    # collapse duplicate consecutive points (start may coincide with a center)
    deduped = [path[0]]
    for p in path[1:]:
        if math.hypot(p[0] - deduped[-1][0], p[1] - deduped[-1][1]) > 1e-9:
            deduped.append(p)
    if len(deduped) == 1:
        deduped.append((goal.x, goal.y))
    return NavPlan(goal=goal, path=tuple(deduped), arrival_tolerance=arrival_tolerance,
                   grid_length=cost)


def pursuit_command(pose: Pose, target: tuple[float, float],
                    config: NavConfig = NavConfig()) -> tuple[float, float]:
    """Rotate-then-drive command (v, omega) toward a target point."""
    heading = math.atan2(target[1] - pose.y, target[0] - pose.x)
    err = normalize_angle(heading - pose.theta)
    omega = max(-config.omega_max, min(config.omega_max, config.k_omega * err))
    v = 0.0 if abs(err) > config.rotate_threshold else config.v_max
    return v, omega


def _remaining_length(ex: PlanExecution, pose: Pose) -> float:
    path = ex.plan.path
    total = pose.distance_to(path[ex.cursor])
    for a, b in zip(path[ex.cursor:], path[ex.cursor + 1:]):
        total += math.hypot(b[0] - a[0], b[1] - a[1])
    return total


def step(ex: PlanExecution, k: KinematicState, dt: float,
         config: NavConfig = NavConfig()) -> tuple[PlanExecution, KinematicState, float, bool]:
    """Advance one control step; returns (execution, kinematics, progress, reached).

    Euler integration with the pre-step heading; progress is
    1 - remaining/initial, clamped and monotone along the plan.
    """
    if dt <= 0:
        raise SimError("dt must be positive")
    pose = k.pose
    goal = ex.plan.goal
    tol = ex.plan.arrival_tolerance

    if pose.distance_to(goal) <= tol:
        ex = replace(ex, max_progress=1.0)
        return ex, KinematicState(pose=pose, v=0.0, omega=0.0), 1.0, True

    path = ex.plan.path
    cursor = ex.cursor
    while cursor < len(path) - 1 and pose.distance_to(path[cursor]) <= config.switch_radius:
        cursor += 1

    v, omega = pursuit_command(pose, path[cursor], config)
    new_pose = Pose(
        x=pose.x + v * math.cos(pose.theta) * dt,
        y=pose.y + v * math.sin(pose.theta) * dt,
        theta=normalize_angle(pose.theta + omega * dt),
    )

    reached = new_pose.distance_to(goal) <= tol
    ex = replace(ex, cursor=cursor)
    progress = 1.0 if reached else max(
        0.0, min(1.0, 1.0 - _remaining_length(ex, new_pose) / ex.initial_length)
    )
    progress = max(progress, ex.max_progress)
    ex = replace(ex, max_progress=progress)
    if reached:
        return ex, KinematicState(pose=new_pose, v=0.0, omega=0.0), 1.0, True
    return ex, KinematicState(pose=new_pose, v=v, omega=omega), progress, False


def odometry(k: KinematicState, noise_seed: Optional[int] = None,
             config: NavConfig = NavConfig()) -> Pose:
    """Measured pose: the true pose, plus seeded Gaussian noise when enabled."""
    if noise_seed is None or not config.odometry_noise:
        return k.pose
    rng = np.random.default_rng(noise_seed)
    dx, dy = rng.normal(0.0, config.noise_sigma_xy, size=2)
    dth = rng.normal(0.0, config.noise_sigma_theta)
    return Pose(k.pose.x + dx, k.pose.y + dy, normalize_angle(k.pose.theta + dth))


def planning_grid(world: WorldSpec, config: NavConfig = NavConfig()) -> OccupancyGrid:
    """Grid used for planning: physical radius plus a pursuit safety margin."""
    return rasterize(world, config.robot_radius + config.planning_margin, config.resolution)


def safety_grid(world: WorldSpec, config: NavConfig = NavConfig()) -> OccupancyGrid:
    """Grid used to check trajectories: physical robot radius only."""
    return rasterize(world, config.robot_radius, config.resolution)
