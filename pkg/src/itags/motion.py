"""Motion layer: feasibility and path-length queries between 2D
configurations, with plan memoization per (start, goal, space signature)."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .domain import ConfigurationSpace, Point2, ProblemDomain, Robot

SQRT2 = math.sqrt(2.0)

# Coordinates are quantized to this grain for cache keys so floating-point
# endpoints hash reliably.
QUANTUM = 1e-6


class PlannerTimeout(Exception):
    """The motion planner ran out of time for one query."""


@dataclass(frozen=True)
class MotionPlan:
    waypoints: tuple[Point2, ...]
    length: float


def _path_length(points: Sequence[Point2]) -> float:
    return float(
        sum(math.dist(points[i], points[i + 1]) for i in range(len(points) - 1))
    )


def plan_grid(
    start: Point2,
    goal: Point2,
    space: ConfigurationSpace,
    resolution: float,
) -> Optional[MotionPlan]:
    """Deterministic A* over an 8-connected lattice anchored at the start.

    Lattice points must be free (in bounds, outside all obstacles) and every
    traversed segment is collision-checked. The goal is snapped to the
    nearest lattice point; the residual snap segment is appended to the path.
    Returns None when no route exists.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if not (space.point_free(start) and space.point_free(goal)):
        return None

    def pos(cell: tuple[int, int]) -> Point2:
        return (start[0] + cell[0] * resolution, start[1] + cell[1] * resolution)

    goal_cell = (
        round((goal[0] - start[0]) / resolution),
        round((goal[1] - start[1]) / resolution),
    )
    goal_snap = pos(goal_cell)
    if not (space.point_free(goal_snap) and space.segment_free(goal_snap, goal)):
        return None

    free_cache: dict[tuple[int, int], bool] = {}

    def free(cell: tuple[int, int]) -> bool:
        cached = free_cache.get(cell)
        if cached is None:
            cached = space.point_free(pos(cell))
            free_cache[cell] = cached
        return cached

    def octile(cell: tuple[int, int]) -> float:
        dx = abs(cell[0] - goal_cell[0])
        dy = abs(cell[1] - goal_cell[1])
        return resolution * (max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy))

    steps = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    origin = (0, 0)
    best: dict[tuple[int, int], float] = {origin: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    frontier: list[tuple[float, float, tuple[int, int]]] = [(octile(origin), 0.0, origin)]
    while frontier:
        _, cost, cell = heapq.heappop(frontier)
        if cost > best.get(cell, math.inf):
            continue
        if cell == goal_cell:
            path = [cell]
            while path[-1] in parent:
                path.append(parent[path[-1]])
            waypoints = [pos(c) for c in reversed(path)]
            if waypoints[-1] != goal:
                waypoints.append(goal)
            return MotionPlan(waypoints=tuple(waypoints), length=_path_length(waypoints))
        for dx, dy in steps:
            nxt = (cell[0] + dx, cell[1] + dy)
            if not free(nxt):
                continue
            if not space.segment_free(pos(cell), pos(nxt)):
                continue
            step = resolution * (SQRT2 if dx and dy else 1.0)
            new_cost = cost + step
            if new_cost < best.get(nxt, math.inf) - 1e-12:
                best[nxt] = new_cost
                parent[nxt] = cell
                heapq.heappush(frontier, (new_cost + octile(nxt), new_cost, nxt))
    return None


def plan_lazy_prm(
    start: Point2,
    goal: Point2,
    space: ConfigurationSpace,
    samples: int = 500,
    radius: Optional[float] = None,
    seed: int = 0,
    timeout: Optional[float] = None,
) -> Optional[MotionPlan]:
    """Lazy probabilistic roadmap: sample a seeded roadmap, then repeatedly
    extract candidate shortest paths and validate their edges lazily until a
    fully valid path survives or the roadmap is exhausted.

    Raises PlannerTimeout when the deadline passes; returns None when no
    roadmap path connects start and goal.
    """
    if samples <= 0:
        raise ValueError("samples must be positive")
    deadline = None if timeout is None else time.monotonic() + timeout

    def check_deadline() -> None:
        if deadline is not None and time.monotonic() >= deadline:
            raise PlannerTimeout(f"lazy PRM exceeded {timeout} s")

    check_deadline()
    if radius is None:
        radius = 0.2 * space.diagonal
    if not (space.point_free(start) and space.point_free(goal)):
        return None

    rng = np.random.default_rng(seed)
    x_min, y_min, x_max, y_max = space.bounds
    raw = rng.uniform((x_min, y_min), (x_max, y_max), size=(samples, 2))
    nodes: list[Point2] = [start, goal]
    nodes.extend((float(x), float(y)) for x, y in raw if space.point_free((float(x), float(y))))

    tree = cKDTree(np.asarray(nodes))
    pairs = tree.query_pairs(radius, output_type="ndarray")
    adjacency: dict[int, list[tuple[int, float]]] = {i: [] for i in range(len(nodes))}
    for i, j in pairs:
        d = math.dist(nodes[i], nodes[j])
        adjacency[int(i)].append((int(j), d))
        adjacency[int(j)].append((int(i), d))

    invalid: set[tuple[int, int]] = set()
    valid: set[tuple[int, int]] = set()

    def edge_key(i: int, j: int) -> tuple[int, int]:
        return (i, j) if i < j else (j, i)

    while True:
        check_deadline()
        # Shortest path over edges not yet proven invalid.
        dist = {0: 0.0}
        parent: dict[int, int] = {}
        frontier = [(0.0, 0)]
        while frontier:
            cost, node = heapq.heappop(frontier)
            if cost > dist.get(node, math.inf):
                continue
            if node == 1:
                break
            for nbr, d in adjacency[node]:
                if edge_key(node, nbr) in invalid:
                    continue
                nc = cost + d
                if nc < dist.get(nbr, math.inf) - 1e-12:
                    dist[nbr] = nc
                    parent[nbr] = node
                    heapq.heappush(frontier, (nc, nbr))
        if 1 not in dist:
            return None
        path = [1]
        while path[-1] != 0:
            path.append(parent[path[-1]])
        path.reverse()
        # Validate the candidate's edges; drop the first invalid one.
        all_valid = True
        for a, b in zip(path, path[1:]):
            check_deadline()
            key = edge_key(a, b)
            if key in valid:
                continue
            if space.segment_free(nodes[a], nodes[b]):
                valid.add(key)
            else:
                invalid.add(key)
                all_valid = False
                break
        if all_valid:
            waypoints = tuple(nodes[i] for i in path)
            return MotionPlan(waypoints=waypoints, length=_path_length(waypoints))


def quantize(p: Point2) -> tuple[int, int]:
    return (round(p[0] / QUANTUM), round(p[1] / QUANTUM))


@dataclass(frozen=True)
class MotionQuery:
    start: Point2
    goal: Point2
    space_signature: tuple[str, ...]

    @property
    def cache_key(self):
        return (quantize(self.start), quantize(self.goal), self.space_signature)


class PlanCache:
    """Memo of plan outcomes keyed on quantized endpoints and space
    signature. Feasible and infeasible outcomes are cached; timeouts are
    raised through and never stored."""

    def __init__(self):
        self._entries: dict = {}

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, key):
        return self._entries.get(key, _MISS)

    def store(self, key, outcome) -> None:
        self._entries.setdefault(key, outcome)


_MISS = object()


def memoized_plan(
    query: MotionQuery,
    cache: PlanCache,
    planner: Callable[[MotionQuery], Optional[MotionPlan]],
) -> Optional[MotionPlan]:
    key = query.cache_key
    hit = cache.lookup(key)
    if hit is not _MISS:
        return hit
    outcome = planner(query)  # PlannerTimeout propagates uncached
    cache.store(key, outcome)
    return outcome


def coalition_signature(members: Sequence[Robot]) -> tuple[str, ...]:
    """Canonical signature of a coalition's combined free space: the set of
    member robot types (duplicates collapse)."""
    if not members:
        raise ValueError("coalition must be non-empty")
    return tuple(sorted({r.type_id for r in members}))


def coalition_space(
    spaces: dict[str, ConfigurationSpace], signature: tuple[str, ...]
) -> ConfigurationSpace:
    """Intersection of the member types' free spaces: intersected bounds and
    the union of their obstacle sets."""
    members = [spaces[t] for t in signature]
    bounds = (
        max(s.bounds[0] for s in members),
        max(s.bounds[1] for s in members),
        min(s.bounds[2] for s in members),
        min(s.bounds[3] for s in members),
    )
    obstacles: list = []
    seen = set()
    for s in members:
        for poly in s.obstacles:
            if poly not in seen:
                seen.add(poly)
                obstacles.append(poly)
    return ConfigurationSpace(
        type_id="+".join(signature), bounds=bounds, obstacles=tuple(obstacles)
    )


class MotionLayer:
    """Bundles a domain's configuration spaces with a planner choice and a
    shared plan cache. Safe to query concurrently: cache races on one key
    write identical outcomes."""

    def __init__(
        self,
        domain: ProblemDomain,
        planner: str = "grid",
        resolution: Optional[float] = None,
        prm_samples: int = 500,
        prm_radius: Optional[float] = None,
        prm_timeout: Optional[float] = 10.0,
        seed: int = 0,
    ):
        if planner not in ("grid", "prm"):
            raise ValueError(f"unknown planner '{planner}'")
        self.domain = domain
        self.planner = planner
        self.resolution = resolution
        self.prm_samples = prm_samples
        self.prm_radius = prm_radius
        self.prm_timeout = prm_timeout
        self.seed = seed
        self.cache = PlanCache()
        self.invocations = 0
        self._spaces: dict[tuple[str, ...], ConfigurationSpace] = {}

    def space_for(self, signature: tuple[str, ...]) -> ConfigurationSpace:
        space = self._spaces.get(signature)
        if space is None:
            if len(signature) == 1:
                space = self.domain.spaces[signature[0]]
            else:
                space = coalition_space(dict(self.domain.spaces), signature)
            self._spaces[signature] = space
        return space

    def _plan(self, query: MotionQuery) -> Optional[MotionPlan]:
        self.invocations += 1
        space = self.space_for(query.space_signature)
        if self.planner == "grid":
            resolution = self.resolution or space.diagonal / 100.0
            return plan_grid(query.start, query.goal, space, resolution)
        return plan_lazy_prm(
            query.start,
            query.goal,
            space,
            samples=self.prm_samples,
            radius=self.prm_radius,
            seed=self.seed,
            timeout=self.prm_timeout,
        )

    def plan_between(
        self, signature: tuple[str, ...], start: Point2, goal: Point2
    ) -> Optional[MotionPlan]:
        query = MotionQuery(start=start, goal=goal, space_signature=signature)
        return memoized_plan(query, self.cache, self._plan)

    def robot_plan(self, robot: Robot, start: Point2, goal: Point2) -> Optional[MotionPlan]:
        return self.plan_between((robot.type_id,), start, goal)

    def coalition_plan(
        self, members: Sequence[Robot], start: Point2, goal: Point2
    ) -> Optional[MotionPlan]:
        return self.plan_between(coalition_signature(members), start, goal)
