"""Random emergency-response problem generation, benchmark execution, and
the ablation harness over the heuristic weighting."""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, replace
from importlib import resources
from typing import Optional, Sequence

import numpy as np
import shapely
from scipy import ndimage
from shapely.geometry import Polygon

from .domain import (
    ConfigurationSpace,
    Point2,
    ProblemDomain,
    Robot,
    Task,
    TaskNetwork,
    validate_domain,
)
from .search import RunMetrics, SearchConfig, itags, itags_sequential

GROUND = "ground"
AERIAL = "aerial"

METRIC_COLUMNS = ("compute_seconds", "nodes_expanded", "nodes_visited", "makespan")


class GenerationError(RuntimeError):
    """Raised when no admissible problem could be placed within the retry
    budget."""


@dataclass(frozen=True)
class Archetype:
    name: str
    type_id: str
    speed: float
    traits: dict[str, float]


def load_archetypes(path: Optional[str] = None) -> tuple[tuple[str, ...], tuple[Archetype, ...]]:
    """Archetype table: trait names plus named robot types. Defaults to the
    packaged emergency-response table."""
    if path is None:
        raw = resources.files("itags.data").joinpath("archetypes.json").read_text()
    else:
        with open(path, encoding="utf-8") as handle:
            raw = handle.read()
    doc = json.loads(raw)
    traits = tuple(doc["traits"])
    archetypes = tuple(
        Archetype(
            name=a["name"],
            type_id=a["type_id"],
            speed=float(a["speed"]),
            traits={k: float(v) for k, v in a["traits"].items()},
        )
        for a in doc["archetypes"]
    )
    return traits, archetypes


@dataclass(frozen=True)
class GeneratorParams:
    robots_min: int = 4
    robots_max: int = 6
    tasks_min: int = 6
    tasks_max: int = 12
    map_width: float = 100.0
    map_height: float = 100.0
    obstacles_min: int = 3
    obstacles_max: int = 7
    obstacle_size_min: float = 5.0
    obstacle_size_max: float = 14.0
    pockets_min: int = 0
    pockets_max: int = 2
    seed: int = 0
    archetype_path: Optional[str] = None

    def validated(self) -> "GeneratorParams":
        if self.robots_min > self.robots_max or self.tasks_min > self.tasks_max:
            raise ValueError("min must not exceed max")
        if self.robots_min <= 0 or self.tasks_min <= 0:
            raise ValueError("counts must be positive")
        return self


def _pocket_walls(x0: float, y0: float, x1: float, y1: float, th: float):
    """Four wall rectangles fully enclosing the inner box (x0, y0, x1, y1)."""
    rects = [
        (x0 - th, y0 - th, x0, y1 + th),  # left
        (x1, y0 - th, x1 + th, y1 + th),  # right
        (x0, y0 - th, x1, y0),  # bottom
        (x0, y1, x1, y1 + th),  # top
    ]
    return [
        ((a, b), (c, b), (c, d), (a, d))
        for a, b, c, d in rects
    ]


def _components(space: ConfigurationSpace, cell: float = 1.0):
    """Connected-component labels of the space's free cells."""
    x_min, y_min, x_max, y_max = space.bounds
    xs = np.arange(x_min + cell / 2, x_max, cell)
    ys = np.arange(y_min + cell / 2, y_max, cell)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    if space.obstacles:
        union = shapely.union_all([Polygon(o) for o in space.obstacles])
        blocked = shapely.intersects_xy(union, gx.ravel(), gy.ravel()).reshape(gx.shape)
    else:
        blocked = np.zeros(gx.shape, dtype=bool)
    labels, _ = ndimage.label(~blocked, structure=np.ones((3, 3), dtype=int))

    def label_of(p: Point2) -> int:
        i = int(np.clip((p[0] - x_min) / cell, 0, len(xs) - 1))
        j = int(np.clip((p[1] - y_min) / cell, 0, len(ys) - 1))
        return int(labels[i, j])

    return label_of


def _connected(space: ConfigurationSpace, points: Sequence[Point2]) -> bool:
    if len(points) < 2:
        return True
    label_of = _components(space)
    labels = {label_of(p) for p in points}
    return 0 not in labels and len(labels) == 1


def generate_problem(params: GeneratorParams) -> ProblemDomain:
    """Seeded, deterministic emergency-response domain: survivors to rescue
    (some inside collapsed zones only aerial robots can enter), medicine
    deliveries ordered after rescues, fires, and damaged buildings. Every
    problem carries a satisfying allocation by construction."""
    params = params.validated()
    trait_names, archetypes = load_archetypes(params.archetype_path)
    last_error = "no attempt"
    for attempt in range(25):
        rng = np.random.default_rng((params.seed, attempt))
        domain = _generate_once(params, trait_names, archetypes, rng)
        if domain is None:
            last_error = "placement failure"
            continue
        violations = validate_domain(domain)
        if violations:
            last_error = "; ".join(violations)
            continue
        return domain
    raise GenerationError(f"could not generate an admissible problem: {last_error}")


def _generate_once(params, trait_names, archetypes, rng) -> Optional[ProblemDomain]:
    w, h = params.map_width, params.map_height
    margin = 2.0

    def sample_point(lo_x, lo_y, hi_x, hi_y) -> Point2:
        return (float(rng.uniform(lo_x, hi_x)), float(rng.uniform(lo_y, hi_y)))

    # Pockets: enclosed zones reachable only by aerial robots.
    n_pockets = int(rng.integers(params.pockets_min, params.pockets_max + 1))
    thickness = 2.0
    pocket_inner: list[tuple[float, float, float, float]] = []
    walls: list = []
    for _ in range(n_pockets):
        for _try in range(50):
            side = float(rng.uniform(9.0, 14.0))
            if (
                w - margin - thickness - side <= margin + thickness
                or h - margin - thickness - side <= margin + thickness
            ):
                continue  # the pocket cannot fit on this map
            x0 = float(rng.uniform(margin + thickness, w - margin - thickness - side))
            y0 = float(rng.uniform(margin + thickness, h - margin - thickness - side))
            box = (x0, y0, x0 + side, y0 + side)
            outer = (box[0] - thickness - 2, box[1] - thickness - 2,
                     box[2] + thickness + 2, box[3] + thickness + 2)
            if all(
                outer[2] < p[0] - thickness - 2 or outer[0] > p[2] + thickness + 2
                or outer[3] < p[1] - thickness - 2 or outer[1] > p[3] + thickness + 2
                for p in pocket_inner
            ):
                pocket_inner.append(box)
                walls.extend(_pocket_walls(*box, thickness))
                break
        else:
            return None
    n_pockets = len(pocket_inner)

    def in_pocket(p: Point2) -> bool:
        return any(
            b[0] - thickness <= p[0] <= b[2] + thickness
            and b[1] - thickness <= p[1] <= b[3] + thickness
            for b in pocket_inner
        )

    # Plain rectangular obstacles, kept clear of the pockets.
    n_obstacles = int(rng.integers(params.obstacles_min, params.obstacles_max + 1))
    rects: list = []
    for _ in range(n_obstacles):
        for _try in range(50):
            ow = float(rng.uniform(params.obstacle_size_min, params.obstacle_size_max))
            oh = float(rng.uniform(params.obstacle_size_min, params.obstacle_size_max))
            x0 = float(rng.uniform(margin, w - margin - ow))
            y0 = float(rng.uniform(margin, h - margin - oh))
            corners = ((x0, y0), (x0 + ow, y0), (x0 + ow, y0 + oh), (x0, y0 + oh))
            if not any(in_pocket(c) for c in corners):
                rects.append(corners)
                break
        else:
            return None

    aerial_rects = [r for r in rects if rng.random() < 0.3]
    bounds = (0.0, 0.0, w, h)
    spaces = {
        GROUND: ConfigurationSpace(GROUND, bounds, tuple(rects) + tuple(walls)),
        AERIAL: ConfigurationSpace(AERIAL, bounds, tuple(aerial_rects)),
    }

    def free_point(space: ConfigurationSpace, exclude_pockets: bool) -> Optional[Point2]:
        for _try in range(200):
            p = sample_point(margin, margin, w - margin, h - margin)
            if not space.point_free(p):
                continue
            if exclude_pockets and in_pocket(p):
                continue
            return p
        return None

    def pocket_point(box) -> Optional[Point2]:
        for _try in range(100):
            p = sample_point(box[0] + 1, box[1] + 1, box[2] - 1, box[3] - 1)
            if spaces[AERIAL].point_free(p):
                return p
        return None

    # Robots: ground archetypes first (index order matters for APR-greedy
    # tie-breaking), at least one aerial scout when pockets exist.
    n_robots = int(rng.integers(params.robots_min, params.robots_max + 1))
    picks = [archetypes[int(rng.integers(len(archetypes)))] for _ in range(n_robots)]
    if n_pockets and not any(a.type_id == AERIAL for a in picks):
        picks[-1] = next(a for a in archetypes if a.type_id == AERIAL)
    if not any(a.type_id == GROUND for a in picks):
        picks[0] = next(a for a in archetypes if a.type_id == GROUND)
    picks.sort(key=lambda a: (a.type_id != GROUND,))

    robots: list[Robot] = []
    for i, arch in enumerate(picks):
        jitter = rng.uniform(0.8, 1.2, size=len(trait_names))
        traits = tuple(
            float(arch.traits.get(name, 0.0) * jitter[u])
            for u, name in enumerate(trait_names)
        )
        start = free_point(spaces[arch.type_id], exclude_pockets=True)
        if start is None:
            return None
        robots.append(
            Robot(
                id=i,
                traits=traits,
                speed=float(arch.speed * rng.uniform(0.8, 1.2)),
                type_id=arch.type_id,
                initial_config=start,
            )
        )
    aerial_ids = [r.id for r in robots if r.type_id == AERIAL]
    ground_ids = [r.id for r in robots if r.type_id == GROUND]
    q = np.array([r.traits for r in robots])
    trait_index = {name: u for u, name in enumerate(trait_names)}

    # Task mix: survivors contribute a rescue -> deliver pair.
    n_tasks = int(rng.integers(params.tasks_min, params.tasks_max + 1))
    max_surv = n_tasks // 2
    n_surv = int(rng.integers(1, max_surv + 1)) if max_surv >= 1 else 0
    n_pockets = min(n_pockets, n_surv)
    rest = n_tasks - 2 * n_surv
    n_fires = int(rng.integers(0, rest + 1))
    n_buildings = rest - n_fires

    hospital = free_point(spaces[GROUND], exclude_pockets=True)
    if hospital is None:
        return None

    def witness_requirement(member_ids: Sequence[int]) -> tuple[float, ...]:
        scale = float(rng.uniform(0.4, 0.9))
        total = q[list(member_ids)].sum(axis=0) * scale
        return tuple(float(v) for v in total)

    def witness_with(preferred: str) -> list[int]:
        pool = [r.id for r in robots if q[r.id][trait_index[preferred]] > 0]
        anchor = int(pool[int(rng.integers(len(pool)))]) if pool else int(rng.integers(n_robots))
        size = int(rng.integers(1, min(3, n_robots) + 1))
        extra = [int(i) for i in rng.permutation(n_robots)[: size - 1] if int(i) != anchor]
        return [anchor] + extra

    tasks: list[Task] = []
    precedence: list[tuple[int, int]] = []
    kinds: list[tuple[str, ...]] = (
        [("rescue", "deliver")] * n_surv + [("extinguish",)] * n_fires + [("rebuild",)] * n_buildings
    )

    survivor_idx = 0
    for entity in kinds:
        if entity[0] == "rescue":
            pocketed = survivor_idx < n_pockets
            if pocketed:
                site = pocket_point(pocket_inner[survivor_idx])
            else:
                site = free_point(spaces[GROUND], exclude_pockets=True)
            if site is None:
                return None
            if pocketed and aerial_ids:
                # Coverable by any medical robot on traits, but only aerial
                # robots can physically enter the pocket.
                med = trait_index["medical"]
                cap = min(q[i][med] for i in aerial_ids)
                req = [0.0] * len(trait_names)
                req[med] = float(rng.uniform(0.3, 0.8) * cap)
                rescue_req = tuple(req)
                deliver_req = tuple(req)
            else:
                members = witness_with("medical")
                rescue_req = witness_requirement(members)
                deliver_req = witness_requirement(members[:1])
            rescue_id = len(tasks)
            tasks.append(
                Task(
                    id=rescue_id,
                    requirements=rescue_req,
                    static_duration=float(rng.uniform(2.0, 8.0)),
                    initial_config=site,
                    terminal_config=site,
                )
            )
            deliver_id = len(tasks)
            tasks.append(
                Task(
                    id=deliver_id,
                    requirements=deliver_req,
                    static_duration=float(rng.uniform(1.0, 4.0)),
                    initial_config=site,
                    terminal_config=hospital,
                )
            )
            precedence.append((rescue_id, deliver_id))
            survivor_idx += 1
        else:
            preferred = "water" if entity[0] == "extinguish" else "repair"
            site = free_point(spaces[GROUND], exclude_pockets=True)
            if site is None:
                return None
            tasks.append(
                Task(
                    id=len(tasks),
                    requirements=witness_requirement(witness_with(preferred)),
                    static_duration=float(rng.uniform(2.0, 10.0)),
                    initial_config=site,
                    terminal_config=site,
                )
            )

    domain = ProblemDomain(
        network=TaskNetwork(tasks=tuple(tasks), precedence_edges=tuple(precedence)),
        robots=tuple(robots),
        spaces=spaces,
        trait_names=trait_names,
    )

    # Reachability: ground robots must reach every out-of-pocket config;
    # aerial robots must reach everything.
    ground_points = [robots[i].initial_config for i in ground_ids] + [
        p
        for t in tasks
        for p in (t.initial_config, t.terminal_config)
        if not in_pocket(p)
    ]
    if not _connected(spaces[GROUND], ground_points):
        return None
    aerial_points = [robots[i].initial_config for i in aerial_ids] + [
        p for t in tasks for p in (t.initial_config, t.terminal_config)
    ]
    if aerial_ids and not _connected(spaces[AERIAL], aerial_points):
        return None
    return domain


@dataclass(frozen=True)
class BenchConfig:
    name: str
    search: SearchConfig = SearchConfig()
    sequential: bool = False


@dataclass
class BenchmarkReport:
    rows: list[dict]
    baseline: Optional[str]
    notes: tuple[str, ...] = ()

    def aggregates(self) -> dict[str, dict[str, dict[str, float]]]:
        """Per-config mean and median of each metric over solved rows."""
        out: dict[str, dict[str, dict[str, float]]] = {}
        configs = sorted({row["config"] for row in self.rows})
        for config in configs:
            solved = [r for r in self.rows if r["config"] == config and r["solved"]]
            out[config] = {"solved": {"count": float(len(solved))}}
            for metric in METRIC_COLUMNS:
                values = [r[metric] for r in solved if r[metric] is not None]
                if values:
                    out[config][metric] = {
                        "mean": statistics.fmean(values),
                        "median": statistics.median(values),
                    }
        return out

    def to_csv(self) -> str:
        columns = ["problem", "config", "solved"]
        columns += list(METRIC_COLUMNS)
        columns += [f"normalized_{m}" for m in METRIC_COLUMNS]
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row)
        return buffer.getvalue()


def run_benchmark(
    problems: Sequence[tuple[str, ProblemDomain]],
    configs: Sequence[BenchConfig],
    baseline: Optional[str] = None,
    notes: tuple[str, ...] = (),
) -> BenchmarkReport:
    """Run each config on each problem; failures become unsolved rows.
    Normalized columns are metric / baseline - 1 where both rows solved."""
    rows: list[dict] = []
    for problem_name, domain in problems:
        for config in configs:
            solver = itags_sequential if config.sequential else itags
            try:
                result = solver(domain, config=config.search)
                metrics = result.metrics
                solved = result.solved
            except Exception:  # a single failing run must not abort the batch
                metrics = RunMetrics()
                solved = False
            rows.append(
                {
                    "problem": problem_name,
                    "config": config.name,
                    "solved": solved,
                    "compute_seconds": metrics.compute_seconds,
                    "nodes_expanded": metrics.nodes_expanded,
                    "nodes_visited": metrics.nodes_visited,
                    "makespan": metrics.makespan,
                }
            )
    if baseline is not None:
        base_rows = {
            row["problem"]: row for row in rows if row["config"] == baseline
        }
        for row in rows:
            base = base_rows.get(row["problem"])
            for metric in METRIC_COLUMNS:
                key = f"normalized_{metric}"
                if (
                    base is not None
                    and base["solved"]
                    and row["solved"]
                    and base[metric]
                    and row[metric] is not None
                ):
                    row[key] = row[metric] / base[metric] - 1.0
                else:
                    row[key] = None
    return BenchmarkReport(rows=rows, baseline=baseline, notes=notes)


def run_ablation(
    problems: Sequence[tuple[str, ProblemDomain]],
    alphas: Sequence[float],
    base: SearchConfig = SearchConfig(),
) -> BenchmarkReport:
    """Benchmark over solver variants differing only in the heuristic weight
    alpha (the weight on the trait-mismatch term; 1 - alpha weighs the
    schedule-quality term)."""
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise ValueError("alphas must lie in [0, 1]")
    configs = [
        BenchConfig(name=f"alpha={a:g}", search=replace(base, alpha=float(a)))
        for a in alphas
    ]
    baseline_alpha = min(alphas, key=lambda a: (abs(a - 0.5), a))
    def label(a: float) -> str:
        if a > 0.5:
            return "trait-mismatch-heavy"
        if a < 0.5:
            return "schedule-quality-heavy"
        return "balanced"

    notes = tuple(
        f"alpha={a:g} ({label(a)}): trait mismatch weighted {a:g}, "
        f"schedule quality weighted {1 - a:g}"
        for a in alphas
    )
    return run_benchmark(
        problems, configs, baseline=f"alpha={baseline_alpha:g}", notes=notes
    )
