"""Greedy best-first search over the incremental task-allocation graph,
its sequential allocate-then-schedule baseline, and a replay validator for
returned solutions."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, replace
from typing import Optional

from . import heuristics
from .domain import Allocation, ProblemDomain, Solution
from .motion import MotionLayer, coalition_signature, coalition_space
from .scheduler import (
    ScheduleBundle,
    TabuParams,
    allocation_seed,
    schedule_allocation,
)


@dataclass(frozen=True)
class SearchConfig:
    alpha: float = 0.5
    node_limit: int = 100_000
    time_limit: float = 300.0
    planner: str = "grid"
    resolution: Optional[float] = None
    prm_samples: int = 500
    prm_radius: Optional[float] = None
    prm_timeout: Optional[float] = 10.0
    tabu: TabuParams = TabuParams()
    seed: int = 0
    epsilon: float = heuristics.APR_EPSILON


@dataclass
class RunMetrics:
    compute_seconds: float = 0.0
    nodes_expanded: int = 0
    nodes_visited: int = 0
    nodes_pruned: int = 0
    makespan: Optional[float] = None
    solved: bool = False


@dataclass(frozen=True)
class SearchNode:
    allocation: Allocation
    apr: float
    nsq: float
    tetaq: float
    bundle: ScheduleBundle
    depth: int
    parent: Optional["SearchNode"] = None


@dataclass(frozen=True)
class SearchResult:
    solution: Optional[Solution]
    metrics: RunMetrics
    reason: Optional[str] = None  # exhausted | node_limit | time_limit

    @property
    def solved(self) -> bool:
        return self.solution is not None


def generate_successors(
    node: SearchNode, domain: ProblemDomain, closed: set
) -> list[Allocation]:
    """Children differing by one extra assignment, in ascending (task, robot)
    order, skipping allocations already in the closed set."""
    children: list[Allocation] = []
    entries = node.allocation.entries
    for m in range(domain.num_tasks):
        for n in range(domain.num_robots):
            if entries[m, n]:
                continue
            child = node.allocation.assign(m, n)
            if child in closed:
                continue
            children.append(child)
    return children


def _make_motion_layer(domain: ProblemDomain, config: SearchConfig) -> MotionLayer:
    return MotionLayer(
        domain,
        planner=config.planner,
        resolution=config.resolution,
        prm_samples=config.prm_samples,
        prm_radius=config.prm_radius,
        prm_timeout=config.prm_timeout,
        seed=config.seed,
    )


def _evaluate(
    allocation: Allocation,
    domain: ProblemDomain,
    motion: MotionLayer,
    config: SearchConfig,
) -> SearchNode:
    apr_value = heuristics.apr(allocation, domain.robot_traits, domain.desired_traits)
    bundle = schedule_allocation(
        allocation,
        domain,
        motion,
        tabu=config.tabu,
        seed=allocation_seed(allocation, config.seed),
    )
    nsq_value = heuristics.nsq(bundle.makespan_bar, bundle.s_best.makespan, bundle.c_worst)
    tetaq_value = heuristics.tetaq(apr_value, nsq_value, config.alpha)
    return SearchNode(
        allocation=allocation,
        apr=apr_value,
        nsq=nsq_value,
        tetaq=tetaq_value,
        bundle=bundle,
        depth=allocation.depth,
    )


def _solution_from(node: SearchNode) -> Solution:
    return Solution(
        allocation=node.allocation,
        motion_plans=node.bundle.plans,
        schedule=node.bundle.s_bar,
    )


def itags(
    domain: ProblemDomain, alpha: Optional[float] = None, config: SearchConfig = SearchConfig()
) -> SearchResult:
    """Interleaved solver: pops the lowest combined-heuristic allocation,
    returns it once the trait requirements are met and the schedule is
    feasible, and prunes children that cannot be scheduled."""
    if alpha is not None:
        config = replace(config, alpha=alpha)
    return _search(domain, config, sequential=False)


def itags_sequential(
    domain: ProblemDomain, alpha: Optional[float] = None, config: SearchConfig = SearchConfig()
) -> SearchResult:
    """Baseline that searches on trait mismatch alone and only then attempts
    scheduling and motion planning; on infeasibility it resumes the search."""
    if alpha is not None:
        config = replace(config, alpha=alpha)
    return _search(domain, config, sequential=True)


def _search(domain: ProblemDomain, config: SearchConfig, sequential: bool) -> SearchResult:
    t0 = time.perf_counter()
    motion = _make_motion_layer(domain, config)
    metrics = RunMetrics()
    counter = 0

    def elapsed() -> float:
        return time.perf_counter() - t0

    def finish(
        solution: Optional[Solution], reason: Optional[str], makespan: Optional[float]
    ) -> SearchResult:
        metrics.compute_seconds = elapsed()
        metrics.solved = solution is not None
        metrics.makespan = makespan
        return SearchResult(solution=solution, metrics=metrics, reason=reason)

    root_alloc = Allocation.empty(domain.num_tasks, domain.num_robots)
    closed: set[Allocation] = {root_alloc}
    open_list: list[tuple] = []

    def push(node: SearchNode) -> None:
        nonlocal counter
        counter += 1
        key = node.apr if sequential else node.tetaq
        heapq.heappush(open_list, (key, -node.depth, counter, node))

    if sequential:
        root = _apr_only_node(root_alloc, domain)
    else:
        root = _evaluate(root_alloc, domain, motion, config)
    metrics.nodes_visited += 1
    push(root)

    while open_list:
        if metrics.nodes_visited >= config.node_limit:
            return finish(None, "node_limit", None)
        if elapsed() > config.time_limit:
            return finish(None, "time_limit", None)
        _, _, _, node = heapq.heappop(open_list)

        if node.apr <= config.epsilon:
            if sequential:
                # Allocation first, then schedule; keep searching on failure.
                full = _evaluate(node.allocation, domain, motion, config)
                if math.isfinite(full.nsq):
                    return finish(
                        _solution_from(full), None, full.bundle.s_bar.makespan
                    )
            elif math.isfinite(node.nsq):
                return finish(_solution_from(node), None, node.bundle.s_bar.makespan)

        metrics.nodes_expanded += 1
        for child_alloc in generate_successors(node, domain, closed):
            closed.add(child_alloc)
            if sequential:
                child = _apr_only_node(child_alloc, domain)
            else:
                child = _evaluate(child_alloc, domain, motion, config)
                if math.isinf(child.nsq):
                    metrics.nodes_pruned += 1
                    continue
            metrics.nodes_visited += 1
            push(child)

    return finish(None, "exhausted", None)


def _apr_only_node(allocation: Allocation, domain: ProblemDomain) -> SearchNode:
    apr_value = heuristics.apr(allocation, domain.robot_traits, domain.desired_traits)
    return SearchNode(
        allocation=allocation,
        apr=apr_value,
        nsq=math.nan,
        tetaq=apr_value,
        bundle=None,
        depth=allocation.depth,
    )


def verify_solution(
    solution: Solution, domain: ProblemDomain, epsilon: float = heuristics.APR_EPSILON
) -> list[str]:
    """Replay check of a solution against the domain: trait satisfaction,
    duration and precedence consistency, per-robot serialization with travel
    times, plan presence, and collision-free plan segments."""
    violations: list[str] = []
    tol = 1e-6
    allocation = solution.allocation
    schedule = solution.schedule
    network = domain.network

    apr_value = heuristics.apr(allocation, domain.robot_traits, domain.desired_traits)
    if apr_value > epsilon:
        violations.append(f"trait requirements unmet: residual mismatch {apr_value}")

    exec_plans = {p.task: p for p in solution.motion_plans if p.kind == "execution"}
    approach_plans = {
        (p.robot_ids[0], p.task): p for p in solution.motion_plans if p.kind == "approach"
    }

    for m, task in enumerate(network.tasks):
        if schedule.start[m] < -tol:
            violations.append(f"task {m} starts before time zero")
        coalition = allocation.coalition(m)
        duration = task.static_duration
        if coalition:
            plan = exec_plans.get(m)
            if plan is None:
                violations.append(f"task {m} has no execution plan")
            else:
                duration += plan.length / min(domain.robots[n].speed for n in coalition)
        if abs((schedule.end[m] - schedule.start[m]) - duration) > tol:
            violations.append(f"task {m} interval does not match its total duration")

    for i, j in network.precedence_edges:
        if schedule.end[i] > schedule.start[j] + tol:
            violations.append(f"precedence violated: task {i} ends after task {j} starts")

    for n, robot in enumerate(domain.robots):
        tasks = sorted(allocation.tasks_of(n), key=lambda m: schedule.start[m])
        prev = None
        for m in tasks:
            plan = approach_plans.get((n, m))
            if plan is None:
                violations.append(f"robot {n} has no approach plan into task {m}")
                prev = m
                continue
            origin = (
                robot.initial_config if prev is None else network.tasks[prev].terminal_config
            )
            if plan.waypoints and (
                plan.waypoints[0] != origin
                or plan.waypoints[-1] != network.tasks[m].initial_config
            ):
                violations.append(f"robot {n} approach plan into task {m} has wrong endpoints")
            available = 0.0 if prev is None else schedule.end[prev]
            if schedule.start[m] + tol < available + plan.length / robot.speed:
                violations.append(
                    f"robot {n} cannot reach task {m} before its scheduled start"
                )
            prev = m

    for plan in solution.motion_plans:
        if plan.kind == "execution":
            members = [domain.robots[n] for n in plan.robot_ids]
            space = coalition_space(dict(domain.spaces), coalition_signature(members))
        else:
            space = domain.spaces[domain.robots[plan.robot_ids[0]].type_id]
        for a, b in zip(plan.waypoints, plan.waypoints[1:]):
            if not space.segment_free(a, b):
                violations.append(
                    f"{plan.kind} plan for task {plan.task} has a colliding segment"
                )
                break

    if not math.isclose(schedule.makespan, max(schedule.end, default=0.0), abs_tol=tol):
        violations.append("makespan does not equal the latest task end")

    return violations
