"""Simple-temporal-network scheduling: builds STNs from the task network
and an allocation, resolves disjunctive constraints with tabu search,
injects motion durations, and computes minimum-makespan schedules plus the
best/worst bounds consumed by the schedule-quality heuristic."""

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .domain import Allocation, ProblemDomain, SolutionPlan, TaskNetwork
from .motion import MotionLayer, PlannerTimeout

logger = logging.getLogger(__name__)

X0 = 0  # the temporal origin time point


def start_tp(task: int) -> int:
    return 1 + 2 * task


def end_tp(task: int) -> int:
    return 2 + 2 * task


@dataclass(frozen=True)
class Stn:
    """Distance-graph encoding of difference constraints: an edge (u, v, w)
    means t_v - t_u <= w. A lower bound l <= t_v - t_u is stored as the
    edge (v, u, -l)."""

    num_tasks: int
    edges: tuple[tuple[int, int, float], ...]

    @property
    def num_time_points(self) -> int:
        return 1 + 2 * self.num_tasks

    def extended(self, extra: Sequence[tuple[int, int, float]]) -> "Stn":
        return Stn(num_tasks=self.num_tasks, edges=self.edges + tuple(extra))


@dataclass(frozen=True)
class Schedule:
    start: tuple[float, ...]
    end: tuple[float, ...]
    makespan: float


@dataclass(frozen=True)
class DisjunctiveConstraint:
    task_a: int
    task_b: int
    robot: int


@dataclass(frozen=True)
class TabuParams:
    tenure: int = 4
    max_iterations: int = 100
    max_non_improving: int = 25


@dataclass(frozen=True)
class ScheduleBundle:
    s_bar: Optional[Schedule]  # None marks an infeasible allocation
    s_best: Schedule
    c_worst: float
    plans: tuple[SolutionPlan, ...]
    reason: Optional[str] = None  # set when s_bar is None

    @property
    def feasible(self) -> bool:
        return self.s_bar is not None

    @property
    def makespan_bar(self) -> float:
        return self.s_bar.makespan if self.s_bar is not None else math.inf


def build_stn(network: TaskNetwork, durations: Optional[Sequence[float]] = None) -> Stn:
    """STN with per-task duration equalities, non-negative start times, and
    the network's precedence edges (end_i <= start_j, lower bound 0)."""
    if durations is None:
        durations = [t.static_duration for t in network.tasks]
    edges: list[tuple[int, int, float]] = []
    for m in range(len(network.tasks)):
        d = float(durations[m])
        edges.append((start_tp(m), end_tp(m), d))  # e - s <= d
        edges.append((end_tp(m), start_tp(m), -d))  # e - s >= d
        edges.append((start_tp(m), X0, 0.0))  # s >= X0
    for i, j in network.precedence_edges:
        edges.append((start_tp(j), end_tp(i), 0.0))  # s_j >= e_i
    return Stn(num_tasks=len(network.tasks), edges=tuple(edges))


def check_consistency(stn: Stn) -> bool:
    """True iff the distance graph has no negative cycle (Bellman-Ford with
    a virtual zero source and a final violation scan)."""
    n = stn.num_time_points
    dist = [0.0] * n
    for _ in range(n - 1):
        changed = False
        for u, v, w in stn.edges:
            if dist[u] + w < dist[v] - 1e-12:
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            return True
    for u, v, w in stn.edges:
        if dist[u] + w < dist[v] - 1e-9:
            return False
    return True


def earliest_schedule(stn: Stn) -> Schedule:
    """Minimal feasible assignment of every time point (longest path from
    the origin over lower-bound edges); minimizes the makespan because all
    constraints are lower bounds from the origin or fixed durations."""
    n = stn.num_time_points
    # t_v = -d(v -> X0); shortest paths to X0 are shortest paths from X0
    # over the reversed distance graph.
    redges = [(v, u, w) for u, v, w in stn.edges]
    dist = [math.inf] * n
    dist[X0] = 0.0
    for _ in range(n - 1):
        changed = False
        for u, v, w in redges:
            if dist[u] + w < dist[v] - 1e-12:
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            break
    else:
        for u, v, w in redges:
            if dist[u] + w < dist[v] - 1e-9:
                raise ValueError("earliest_schedule called on an inconsistent STN")
    times = [-d if math.isfinite(d) else 0.0 for d in dist]
    start = tuple(times[start_tp(m)] for m in range(stn.num_tasks))
    end = tuple(times[end_tp(m)] for m in range(stn.num_tasks))
    makespan = max(end) if end else 0.0
    return Schedule(start=start, end=end, makespan=makespan)


def build_best_schedule(network: TaskNetwork) -> tuple[Stn, Schedule]:
    """Schedule with static durations and precedence only: no allocation or
    motion constraints. Always consistent for a DAG."""
    stn = build_stn(network)
    return stn, earliest_schedule(stn)


def worst_makespan(network: TaskNetwork, z: float, w: float) -> float:
    """Over-estimate of the totally-ordered worst schedule: every task pays
    two longest-possible moves at the slowest speed plus its static
    duration: 2*M*z/w + sum of durations."""
    if w <= 0:
        raise ValueError("slowest speed must be positive")
    if z < 0:
        raise ValueError("longest path bound must be non-negative")
    m = len(network.tasks)
    return 2.0 * m * z / w + sum(t.static_duration for t in network.tasks)


def longest_path_bound(domain: ProblemDomain) -> float:
    """Cheap over-estimate of the longest possible path in any configuration
    space: twice the union bounding box's width-plus-height."""
    x_min = min(s.bounds[0] for s in domain.spaces.values())
    y_min = min(s.bounds[1] for s in domain.spaces.values())
    x_max = max(s.bounds[2] for s in domain.spaces.values())
    y_max = max(s.bounds[3] for s in domain.spaces.values())
    return 2.0 * ((x_max - x_min) + (y_max - y_min))


def derive_disjunctive_constraints(
    allocation: Allocation, network: TaskNetwork
) -> list[DisjunctiveConstraint]:
    """One constraint per (robot, unordered task pair) where the robot works
    both tasks and the precedence closure orders neither before the other."""
    closure = network.precedence_closure
    constraints: list[DisjunctiveConstraint] = []
    for robot in range(allocation.num_robots):
        tasks = allocation.tasks_of(robot)
        for i, a in enumerate(tasks):
            for b in tasks[i + 1 :]:
                if (a, b) in closure or (b, a) in closure:
                    continue
                constraints.append(DisjunctiveConstraint(task_a=a, task_b=b, robot=robot))
    return constraints


TransitionBound = Callable[[int, Optional[int], int], float]


@dataclass(frozen=True)
class ResolvedOrdering:
    stn: Stn
    schedule: Schedule
    sequences: dict[int, list[int]]


def resolve_orderings_tabu(
    base: Stn,
    disjunctives: Sequence[DisjunctiveConstraint],
    transition_bound: TransitionBound,
    robot_tasks: Mapping[int, Sequence[int]],
    precedence_closure: frozenset[tuple[int, int]],
    initial_starts: Sequence[float],
    params: TabuParams = TabuParams(),
    seed: int = 0,
) -> Optional[ResolvedOrdering]:
    """Tabu search over the two orderings of each disjunctive constraint,
    minimizing the earliest-schedule makespan.

    Each candidate serializes every robot's tasks into a total order, adds a
    travel lower bound between consecutive tasks (and from the robot's start
    into its first task), and keeps the STN only if consistent. Returns the
    best explored consistent ordering, or None when none is consistent.
    """
    rng = np.random.default_rng(seed)
    k = len(disjunctives)
    num_tasks = base.num_tasks
    robots = sorted(robot_tasks)

    # Recover per-task durations and precedence pairs from the base STN so
    # candidate makespans can be computed directly on task start times.
    durations = [0.0] * num_tasks
    precedence_pairs: list[tuple[int, int]] = []
    for u, v, w in base.edges:
        if u % 2 == 1 and v == u + 1:
            durations[(u - 1) // 2] = w
        elif u % 2 == 1 and v % 2 == 0 and v != X0 and v != u + 1:
            precedence_pairs.append(((v - 2) // 2, (u - 1) // 2))  # i before j

    # Per robot: orderings fixed by precedence, the disjunctive choices that
    # touch it, and a table of transition lower bounds (row 0 = from the
    # robot's start, row i+1 = from its i-th task's end).
    tasks_of: dict[int, list[int]] = {r: list(robot_tasks[r]) for r in robots}
    fixed_counts: dict[int, list[int]] = {}
    choice_pairs: dict[int, list[tuple[int, int, int]]] = {r: [] for r in robots}
    bounds: dict[int, list[list[float]]] = {}
    for robot in robots:
        tasks = tasks_of[robot]
        pos = {task: i for i, task in enumerate(tasks)}
        counts = [0] * len(tasks)
        for i, a in enumerate(tasks):
            for b in tasks[i + 1 :]:
                if (a, b) in precedence_closure:
                    counts[pos[b]] += 1
                elif (b, a) in precedence_closure:
                    counts[pos[a]] += 1
        fixed_counts[robot] = counts
        bounds[robot] = [[transition_bound(robot, None, t) for t in tasks]] + [
            [transition_bound(robot, prev, t) if prev != t else math.inf for t in tasks]
            for prev in tasks
        ]
    for idx, dc in enumerate(disjunctives):
        tasks = tasks_of[dc.robot]
        choice_pairs[dc.robot].append((idx, tasks.index(dc.task_a), tasks.index(dc.task_b)))

    def sequences_for(choices: tuple[bool, ...]) -> Optional[dict[int, list[int]]]:
        """Per-robot execution order (as positions into the robot's task
        list). A robot's tasks form a tournament, so a total order exists iff
        the predecessor counts are a permutation of 0..t-1."""
        sequences: dict[int, list[int]] = {}
        for robot in robots:
            counts = list(fixed_counts[robot])
            for idx, a_pos, b_pos in choice_pairs[robot]:
                counts[b_pos if choices[idx] else a_pos] += 1
            t = len(counts)
            order: list[Optional[int]] = [None] * t
            for i, c in enumerate(counts):
                if c >= t or order[c] is not None:
                    return None  # the chosen orderings cycle within this robot
                order[c] = i
            sequences[robot] = order
        return sequences

    eval_cache: dict[tuple[bool, ...], tuple[float, Optional[dict[int, list[int]]]]] = {}

    def evaluate(choices: tuple[bool, ...]) -> tuple[float, Optional[dict[int, list[int]]]]:
        """Makespan of the earliest schedule under this choice vector, or
        +inf. Bounded fixpoint sweeps over task start times replace a full
        STN solve; non-convergence marks a cross-robot ordering cycle."""
        hit = eval_cache.get(choices)
        if hit is not None:
            return hit
        result: tuple[float, Optional[dict[int, list[int]]]] = (math.inf, None)
        sequences = sequences_for(choices)
        if sequences is not None:
            chains: list[tuple[Optional[int], int, float]] = []
            feasible = True
            for robot, order in sequences.items():
                tasks = tasks_of[robot]
                table = bounds[robot]
                prev: Optional[int] = None
                for i in order:
                    bound = table[0 if prev is None else prev + 1][i]
                    if bound == math.inf:
                        feasible = False
                        break
                    chains.append((None if prev is None else tasks[prev], tasks[i], bound))
                    prev = i
                if not feasible:
                    break
            if feasible:
                start = [0.0] * num_tasks
                for prev_task, task, bound in chains:
                    if prev_task is None and start[task] < bound:
                        start[task] = bound
                for _ in range(num_tasks + 1):
                    changed = False
                    for i, j in precedence_pairs:
                        floor = start[i] + durations[i]
                        if start[j] < floor - 1e-12:
                            start[j] = floor
                            changed = True
                    for prev_task, task, bound in chains:
                        if prev_task is None:
                            continue
                        floor = start[prev_task] + durations[prev_task] + bound
                        if start[task] < floor - 1e-12:
                            start[task] = floor
                            changed = True
                    if not changed:
                        makespan = max(
                            (start[m] + durations[m] for m in range(num_tasks)),
                            default=0.0,
                        )
                        result = (makespan, sequences)
                        break
                # no convergence: orderings cycle across robots -> infeasible
        eval_cache[choices] = result
        return result

    def materialize(choices: tuple[bool, ...]) -> Optional[ResolvedOrdering]:
        """Full STN and schedule for a candidate already known feasible."""
        cost, sequences = evaluate(choices)
        if sequences is None:
            return None
        task_sequences = {
            robot: [tasks_of[robot][i] for i in order]
            for robot, order in sequences.items()
        }
        extra: list[tuple[int, int, float]] = []
        for robot, seq in task_sequences.items():
            prev: Optional[int] = None
            for task in seq:
                bound = transition_bound(robot, prev, task)
                src = X0 if prev is None else end_tp(prev)
                extra.append((start_tp(task), src, -bound))
                prev = task
        stn = base.extended(extra)
        return ResolvedOrdering(
            stn=stn, schedule=earliest_schedule(stn), sequences=task_sequences
        )

    # Initial ordering: ascending unconstrained start times, ties by index.
    def start_key(task: int) -> tuple[float, int]:
        return (initial_starts[task], task)

    current = tuple(
        start_key(dc.task_a) <= start_key(dc.task_b) for dc in disjunctives
    )
    best_cost, _ = evaluate(current)
    best_choices: Optional[tuple[bool, ...]] = (
        current if math.isfinite(best_cost) else None
    )
    if k == 0:
        return materialize(current) if best_choices is not None else None

    tabu_until = [0] * k
    non_improving = 0
    for iteration in range(1, params.max_iterations + 1):
        moves: list[tuple[float, int, tuple[bool, ...]]] = []
        for i in range(k):
            neighbor = current[:i] + (not current[i],) + current[i + 1 :]
            cost, _ = evaluate(neighbor)
            if tabu_until[i] >= iteration and cost >= best_cost:
                continue  # tabu without aspiration
            moves.append((cost, i, neighbor))
        if not moves:
            break
        lowest = min(cost for cost, _, _ in moves)
        ties = [m for m in moves if m[0] == lowest]
        cost, flipped, chosen = ties[int(rng.integers(len(ties)))]
        current = chosen
        tabu_until[flipped] = iteration + params.tenure
        if cost < best_cost:
            best_cost, best_choices = cost, chosen
            non_improving = 0
        else:
            non_improving += 1
            if non_improving >= params.max_non_improving:
                break
    return materialize(best_choices) if best_choices is not None else None


def schedule_allocation(
    allocation: Allocation,
    domain: ProblemDomain,
    motion: MotionLayer,
    tabu: TabuParams = TabuParams(),
    seed: int = 0,
) -> ScheduleBundle:
    """Three-part scheduling of one allocation: the unconstrained best
    schedule, disjunctive-ordering resolution with motion-derived travel
    bounds, and execution durations from coalition motion plans."""
    network = domain.network
    best_stn = build_stn(network)
    if not check_consistency(best_stn):
        s_best = Schedule(start=(), end=(), makespan=math.inf)
        return ScheduleBundle(
            s_bar=None, s_best=s_best, c_worst=math.inf, plans=(), reason="inconsistent_base"
        )
    s_best = earliest_schedule(best_stn)
    z = longest_path_bound(domain)
    slowest = min(r.speed for r in domain.robots)
    c_worst = worst_makespan(network, z=z, w=slowest)

    if allocation.depth == 0:
        return ScheduleBundle(s_bar=s_best, s_best=s_best, c_worst=c_worst, plans=())

    # Execution plans extend each allocated task's duration; a coalition
    # moves through the intersection of its members' free spaces at its
    # slowest member's speed.
    durations = [t.static_duration for t in network.tasks]
    exec_plans: list[SolutionPlan] = []
    try:
        for m, task in enumerate(network.tasks):
            coalition = allocation.coalition(m)
            if not coalition:
                continue
            members = [domain.robots[n] for n in coalition]
            plan = motion.coalition_plan(members, task.initial_config, task.terminal_config)
            if plan is None:
                return ScheduleBundle(
                    s_bar=None,
                    s_best=s_best,
                    c_worst=c_worst,
                    plans=(),
                    reason="motion_infeasible",
                )
            speed = min(r.speed for r in members)
            durations[m] += plan.length / speed
            exec_plans.append(
                SolutionPlan(
                    robot_ids=coalition,
                    kind="execution",
                    task=m,
                    waypoints=plan.waypoints,
                    length=plan.length,
                )
            )

        robot_tasks = {
            n: list(allocation.tasks_of(n))
            for n in range(allocation.num_robots)
            if allocation.tasks_of(n)
        }

        bound_cache: dict[tuple[int, Optional[int], int], float] = {}

        def transition(robot: int, pred: Optional[int], task: int) -> float:
            key = (robot, pred, task)
            bound = bound_cache.get(key)
            if bound is not None:
                return bound
            origin = (
                domain.robots[robot].initial_config
                if pred is None
                else network.tasks[pred].terminal_config
            )
            plan = motion.robot_plan(
                domain.robots[robot], origin, network.tasks[task].initial_config
            )
            bound = math.inf if plan is None else plan.length / domain.robots[robot].speed
            bound_cache[key] = bound
            return bound

        disjunctives = derive_disjunctive_constraints(allocation, network)
        resolved = resolve_orderings_tabu(
            base=build_stn(network, durations),
            disjunctives=disjunctives,
            transition_bound=transition,
            robot_tasks=robot_tasks,
            precedence_closure=network.precedence_closure,
            initial_starts=s_best.start,
            params=tabu,
            seed=seed,
        )
    except PlannerTimeout:
        return ScheduleBundle(
            s_bar=None, s_best=s_best, c_worst=c_worst, plans=(), reason="motion_timeout"
        )
    if resolved is None:
        return ScheduleBundle(
            s_bar=None, s_best=s_best, c_worst=c_worst, plans=(), reason="no_ordering"
        )

    approach_plans: list[SolutionPlan] = []
    for robot, seq in sorted(resolved.sequences.items()):
        prev: Optional[int] = None
        for task in seq:
            origin = (
                domain.robots[robot].initial_config
                if prev is None
                else network.tasks[prev].terminal_config
            )
            plan = motion.robot_plan(
                domain.robots[robot], origin, network.tasks[task].initial_config
            )
            assert plan is not None  # the resolved ordering already required it
            approach_plans.append(
                SolutionPlan(
                    robot_ids=(robot,),
                    kind="approach",
                    task=task,
                    waypoints=plan.waypoints,
                    length=plan.length,
                )
            )
            prev = task

    s_bar = resolved.schedule
    if s_bar.makespan > c_worst:
        logger.warning(
            "schedule makespan %.3f exceeds worst-case estimate %.3f; "
            "normalized quality will exceed 1",
            s_bar.makespan,
            c_worst,
        )
    return ScheduleBundle(
        s_bar=s_bar,
        s_best=s_best,
        c_worst=c_worst,
        plans=tuple(exec_plans + approach_plans),
    )


def allocation_seed(allocation: Allocation, base_seed: int) -> int:
    """Deterministic per-allocation seed for tabu tie-breaking."""
    return zlib.crc32(allocation.entries.tobytes()) ^ (base_seed & 0xFFFFFFFF)
