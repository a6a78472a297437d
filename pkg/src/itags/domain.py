"""Problem data model: robots, tasks, task network, configuration spaces,
allocations, solutions, plus validation and JSON (de)serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Any, Mapping, Optional, Sequence

import numpy as np
import shapely
from shapely.geometry import LineString, Polygon

if TYPE_CHECKING:
    from .scheduler import Schedule

Point2 = tuple[float, float]


class ProblemFormatError(ValueError):
    """Raised when a problem document cannot be parsed."""


class DomainValidationError(ValueError):
    """Raised when a parsed problem violates domain invariants."""

    def __init__(self, violations: Sequence[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class Robot:
    id: int
    traits: tuple[float, ...]
    speed: float
    type_id: str
    initial_config: Point2


@dataclass(frozen=True)
class Task:
    id: int
    requirements: tuple[float, ...]
    static_duration: float
    initial_config: Point2
    terminal_config: Point2


@dataclass(frozen=True)
class TaskNetwork:
    tasks: tuple[Task, ...]
    precedence_edges: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.tasks)

    @cached_property
    def successors(self) -> dict[int, tuple[int, ...]]:
        succ: dict[int, list[int]] = {m: [] for m in range(len(self.tasks))}
        for i, j in self.precedence_edges:
            succ[i].append(j)
        return {m: tuple(v) for m, v in succ.items()}

    def is_dag(self) -> bool:
        # Kahn's algorithm over the precedence edges.
        m = len(self.tasks)
        indeg = [0] * m
        for _, j in self.precedence_edges:
            indeg[j] += 1
        stack = [v for v in range(m) if indeg[v] == 0]
        seen = 0
        while stack:
            v = stack.pop()
            seen += 1
            for w in self.successors[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    stack.append(w)
        return seen == m

    @cached_property
    def precedence_closure(self) -> frozenset[tuple[int, int]]:
        """All ordered pairs (i, j) such that task i transitively precedes j."""
        closure: set[tuple[int, int]] = set()
        for i in range(len(self.tasks)):
            stack = list(self.successors[i])
            while stack:
                j = stack.pop()
                if (i, j) not in closure:
                    closure.add((i, j))
                    stack.extend(self.successors[j])
        return frozenset(closure)


@dataclass(frozen=True)
class ConfigurationSpace:
    type_id: str
    bounds: tuple[float, float, float, float]  # x_min, y_min, x_max, y_max
    obstacles: tuple[tuple[Point2, ...], ...]

    @property
    def width(self) -> float:
        return self.bounds[2] - self.bounds[0]

    @property
    def height(self) -> float:
        return self.bounds[3] - self.bounds[1]

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.width, self.height))

    @cached_property
    def _obstacle_polys(self) -> tuple[Polygon, ...]:
        return tuple(Polygon(o) for o in self.obstacles)

    @cached_property
    def _obstacle_union(self):
        union = shapely.union_all(list(self._obstacle_polys))
        shapely.prepare(union)
        return union

    @cached_property
    def _obstacle_boxes(self) -> Optional[np.ndarray]:
        """Per-obstacle bounding boxes (x_min, y_min, x_max, y_max) for a
        cheap reject test before any shapely call."""
        if not self.obstacles:
            return None
        return np.array([poly.bounds for poly in self._obstacle_polys])

    def in_bounds(self, p: Point2) -> bool:
        x_min, y_min, x_max, y_max = self.bounds
        return x_min <= p[0] <= x_max and y_min <= p[1] <= y_max

    def point_free(self, p: Point2) -> bool:
        """True iff p is inside bounds and outside every obstacle."""
        if not self.in_bounds(p):
            return False
        boxes = self._obstacle_boxes
        if boxes is None:
            return True
        hit = (
            (boxes[:, 0] <= p[0])
            & (p[0] <= boxes[:, 2])
            & (boxes[:, 1] <= p[1])
            & (p[1] <= boxes[:, 3])
        )
        if not hit.any():
            return True
        return not bool(shapely.intersects_xy(self._obstacle_union, p[0], p[1]))

    def segment_free(self, a: Point2, b: Point2) -> bool:
        """True iff the closed segment a-b stays in bounds and does not
        penetrate any obstacle interior (touching a boundary point is free)."""
        if not (self.in_bounds(a) and self.in_bounds(b)):
            return False
        boxes = self._obstacle_boxes
        if boxes is None:
            return True
        lo_x, hi_x = (a[0], b[0]) if a[0] <= b[0] else (b[0], a[0])
        lo_y, hi_y = (a[1], b[1]) if a[1] <= b[1] else (b[1], a[1])
        hit = (
            (boxes[:, 0] <= hi_x)
            & (lo_x <= boxes[:, 2])
            & (boxes[:, 1] <= hi_y)
            & (lo_y <= boxes[:, 3])
        )
        if not hit.any():
            return True
        if a == b:
            return self.point_free(a)
        line = LineString([a, b])
        union = self._obstacle_union
        if not union.intersects(line):
            return True
        return union.intersection(line).length <= 1e-12


@dataclass(frozen=True)
class ProblemDomain:
    network: TaskNetwork
    robots: tuple[Robot, ...]
    spaces: Mapping[str, ConfigurationSpace]
    trait_names: tuple[str, ...]

    @property
    def num_robots(self) -> int:
        return len(self.robots)

    @property
    def num_tasks(self) -> int:
        return len(self.network.tasks)

    @property
    def num_traits(self) -> int:
        return len(self.trait_names)

    @cached_property
    def robot_traits(self) -> np.ndarray:
        """N x U matrix; row i is robot i's trait vector."""
        q = np.array([r.traits for r in self.robots], dtype=float)
        q.setflags(write=False)
        return q

    @cached_property
    def desired_traits(self) -> np.ndarray:
        """M x U matrix; row m is task m's requirement vector."""
        y = np.array([t.requirements for t in self.network.tasks], dtype=float)
        y.setflags(write=False)
        return y

    def space_of(self, robot: Robot) -> ConfigurationSpace:
        return self.spaces[robot.type_id]


class Allocation:
    """Immutable M x N binary matrix; A[m][n] = 1 iff robot n works task m.

    Hashable on the matrix contents so the search's closed set can
    deduplicate allocations reached along different paths.
    """

    __slots__ = ("entries", "_key")

    def __init__(self, entries):
        arr = np.ascontiguousarray(entries, dtype=np.uint8)
        if arr.ndim != 2:
            raise ValueError("allocation must be a 2-D matrix")
        if arr.max(initial=0) > 1:
            raise ValueError("allocation entries must be 0 or 1")
        arr.setflags(write=False)
        self.entries = arr
        self._key = (arr.shape, arr.tobytes())

    @classmethod
    def empty(cls, num_tasks: int, num_robots: int) -> "Allocation":
        return cls(np.zeros((num_tasks, num_robots), dtype=np.uint8))

    def assign(self, task: int, robot: int) -> "Allocation":
        arr = np.array(self.entries)
        arr[task, robot] = 1
        return Allocation(arr)

    @property
    def num_tasks(self) -> int:
        return self.entries.shape[0]

    @property
    def num_robots(self) -> int:
        return self.entries.shape[1]

    @property
    def depth(self) -> int:
        return int(self.entries.sum())

    def coalition(self, task: int) -> tuple[int, ...]:
        return tuple(int(n) for n in np.flatnonzero(self.entries[task]))

    def tasks_of(self, robot: int) -> tuple[int, ...]:
        return tuple(int(m) for m in np.flatnonzero(self.entries[:, robot]))

    def __hash__(self) -> int:
        return hash(self._key)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Allocation) and self._key == other._key

    def __repr__(self) -> str:
        return f"Allocation({self.entries.tolist()!r})"


@dataclass(frozen=True)
class SolutionPlan:
    """One motion plan of a solution: who moves, why, and along what path."""

    robot_ids: tuple[int, ...]
    kind: str  # "approach" | "execution"
    task: int
    waypoints: tuple[Point2, ...]
    length: float


@dataclass(frozen=True)
class Solution:
    allocation: Allocation
    motion_plans: tuple[SolutionPlan, ...]
    schedule: "Schedule"


def validate_domain(domain: ProblemDomain) -> list[str]:
    """Collect every invariant violation; an empty list means admissible."""
    violations: list[str] = []
    m, n, u = domain.num_tasks, domain.num_robots, domain.num_traits

    for i, j in domain.network.precedence_edges:
        if not (0 <= i < m and 0 <= j < m):
            violations.append(f"precedence edge ({i}, {j}) references an unknown task")
        elif i == j:
            violations.append(f"precedence edge ({i}, {j}) is a self-loop")
    if not domain.network.is_dag():
        violations.append("task network contains a precedence cycle")

    for robot in domain.robots:
        if len(robot.traits) != u:
            violations.append(f"robot {robot.id} has {len(robot.traits)} traits, expected {u}")
        if any(t < 0 for t in robot.traits):
            violations.append(f"robot {robot.id} has a negative trait value")
        if robot.speed <= 0:
            violations.append(f"robot {robot.id} speed must be positive")
        if robot.type_id not in domain.spaces:
            violations.append(f"robot {robot.id} references unknown type_id '{robot.type_id}'")
        else:
            space = domain.spaces[robot.type_id]
            if not space.point_free(robot.initial_config):
                violations.append(
                    f"robot {robot.id} initial configuration is outside its free space"
                )

    for task in domain.network.tasks:
        if len(task.requirements) != u:
            violations.append(
                f"task {task.id} has {len(task.requirements)} requirements, expected {u}"
            )
        if any(r < 0 for r in task.requirements):
            violations.append(f"task {task.id} has a negative requirement value")
        if task.static_duration < 0:
            violations.append(f"task {task.id} has a negative duration")

    if m > 0 and u > 0 and not any(r > 0 for t in domain.network.tasks for r in t.requirements):
        violations.append("desired trait matrix is all zeros")

    for type_id, space in domain.spaces.items():
        x_min, y_min, x_max, y_max = space.bounds
        if x_max <= x_min or y_max <= y_min:
            violations.append(f"space '{type_id}' has degenerate bounds")
        for k, obstacle in enumerate(space.obstacles):
            if len(obstacle) < 3:
                violations.append(f"space '{type_id}' obstacle {k} has fewer than 3 vertices")
                continue
            if not all(space.in_bounds(v) for v in obstacle):
                violations.append(f"space '{type_id}' obstacle {k} has a vertex outside bounds")
            if not Polygon(obstacle).is_valid:
                violations.append(f"space '{type_id}' obstacle {k} is not a simple polygon")

    return violations


def _require(mapping: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in mapping:
        raise ProblemFormatError(f"{where}: missing required field '{key}'")
    return mapping[key]


def _point(value: Any, where: str) -> Point2:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ProblemFormatError(f"{where}: expected a 2-element [x, y] point")
    return float(value[0]), float(value[1])


def load_problem(text: str) -> ProblemDomain:
    """Parse and validate a problem JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProblemFormatError("top level: expected a JSON object")

    trait_names = tuple(str(t) for t in _require(doc, "traits", "top level"))

    spaces: dict[str, ConfigurationSpace] = {}
    for type_id, raw in _require(doc, "spaces", "top level").items():
        where = f"spaces['{type_id}']"
        bounds = _require(raw, "bounds", where)
        if not isinstance(bounds, (list, tuple)) or len(bounds) != 4:
            raise ProblemFormatError(f"{where}: bounds must be [x_min, y_min, x_max, y_max]")
        obstacles = tuple(
            tuple(_point(v, f"{where}.obstacles[{k}]") for v in poly)
            for k, poly in enumerate(_require(raw, "obstacles", where))
        )
        spaces[type_id] = ConfigurationSpace(
            type_id=type_id, bounds=tuple(float(b) for b in bounds), obstacles=obstacles
        )

    robots = []
    for i, raw in enumerate(_require(doc, "robots", "top level")):
        where = f"robots[{i}]"
        robots.append(
            Robot(
                id=i,
                traits=tuple(float(t) for t in _require(raw, "traits", where)),
                speed=float(_require(raw, "speed", where)),
                type_id=str(_require(raw, "type_id", where)),
                initial_config=_point(_require(raw, "initial_config", where), where),
            )
        )

    tasks = []
    for i, raw in enumerate(_require(doc, "tasks", "top level")):
        where = f"tasks[{i}]"
        tasks.append(
            Task(
                id=i,
                requirements=tuple(float(r) for r in _require(raw, "requirements", where)),
                static_duration=float(_require(raw, "duration", where)),
                initial_config=_point(_require(raw, "initial_config", where), where),
                terminal_config=_point(_require(raw, "terminal_config", where), where),
            )
        )

    precedence = tuple(
        (int(e[0]), int(e[1])) for e in _require(doc, "precedence", "top level")
    )

    domain = ProblemDomain(
        network=TaskNetwork(tasks=tuple(tasks), precedence_edges=precedence),
        robots=tuple(robots),
        spaces=spaces,
        trait_names=trait_names,
    )
    violations = validate_domain(domain)
    if violations:
        raise DomainValidationError(violations)
    return domain


def save_problem(domain: ProblemDomain) -> str:
    """Serialize a domain back to the problem JSON format (byte-stable)."""
    doc = {
        "traits": list(domain.trait_names),
        "robots": [
            {
                "type_id": r.type_id,
                "speed": r.speed,
                "traits": list(r.traits),
                "initial_config": list(r.initial_config),
            }
            for r in domain.robots
        ],
        "tasks": [
            {
                "duration": t.static_duration,
                "requirements": list(t.requirements),
                "initial_config": list(t.initial_config),
                "terminal_config": list(t.terminal_config),
            }
            for t in domain.network.tasks
        ],
        "precedence": [list(e) for e in domain.network.precedence_edges],
        "spaces": {
            type_id: {
                "bounds": list(space.bounds),
                "obstacles": [[list(v) for v in poly] for poly in space.obstacles],
            }
            for type_id, space in sorted(domain.spaces.items())
        },
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def save_solution(solution: Solution, metrics) -> str:
    """Serialize a solution plus run metrics with deterministic key order."""
    schedule = solution.schedule
    plans = sorted(
        solution.motion_plans, key=lambda p: (p.task, p.kind, p.robot_ids)
    )
    doc = {
        "allocation": solution.allocation.entries.tolist(),
        "schedule": [
            {"task": m, "start": schedule.start[m], "end": schedule.end[m]}
            for m in range(len(schedule.start))
        ],
        "makespan": schedule.makespan,
        "plans": [
            {
                "robot_ids": list(p.robot_ids),
                "kind": p.kind,
                "task": p.task,
                "waypoints": [list(w) for w in p.waypoints],
                "length": p.length,
            }
            for p in plans
        ],
        "metrics": {
            "compute_seconds": metrics.compute_seconds,
            "nodes_expanded": metrics.nodes_expanded,
            "nodes_visited": metrics.nodes_visited,
            "makespan": metrics.makespan,
        },
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def load_solution(text: str) -> tuple[Solution, dict]:
    """Parse a solution document; inverse of save_solution."""
    from .scheduler import Schedule  # local import to avoid a module cycle

    doc = json.loads(text)
    rows = sorted(doc["schedule"], key=lambda r: r["task"])
    start = tuple(float(r["start"]) for r in rows)
    end = tuple(float(r["end"]) for r in rows)
    schedule = Schedule(start=start, end=end, makespan=float(doc["makespan"]))
    plans = tuple(
        SolutionPlan(
            robot_ids=tuple(int(r) for r in p["robot_ids"]),
            kind=str(p["kind"]),
            task=int(p["task"]),
            waypoints=tuple((float(w[0]), float(w[1])) for w in p["waypoints"]),
            length=float(p["length"]),
        )
        for p in doc["plans"]
    )
    solution = Solution(
        allocation=Allocation(np.array(doc["allocation"], dtype=np.uint8)),
        motion_plans=plans,
        schedule=schedule,
    )
    return solution, doc["metrics"]
