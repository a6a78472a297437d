"""Command-line interface: solve, generate, bench, and ablate."""

from __future__ import annotations

import json
import pathlib
import sys
from typing import Optional

import click

from . import bench as bench_mod
from .domain import (
    DomainValidationError,
    ProblemFormatError,
    load_problem,
    save_problem,
    save_solution,
)
from .scheduler import TabuParams
from .search import SearchConfig, itags, itags_sequential

EXIT_SOLVED = 0
EXIT_ERROR = 1
EXIT_UNSOLVED = 2


def _parse_range(value: str, name: str, minimum: int = 1) -> tuple[int, int]:
    parts = value.split(":")
    if len(parts) == 1:
        lo = hi = int(parts[0])
    elif len(parts) == 2:
        lo, hi = int(parts[0]), int(parts[1])
    else:
        raise click.BadParameter(f"{name} must be N or A:B")
    if lo > hi or lo < minimum:
        raise click.BadParameter(f"{name} range {lo}:{hi} is invalid")
    return lo, hi


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        click.echo(text)
    else:
        pathlib.Path(path).write_text(text, encoding="utf-8")


def _load_problems(directory: str) -> list[tuple[str, object]]:
    paths = sorted(pathlib.Path(directory).glob("*.json"))
    if not paths:
        raise click.ClickException(f"no .json problems found in {directory}")
    return [(p.stem, load_problem(p.read_text(encoding="utf-8"))) for p in paths]


@click.group()
def cli() -> None:
    """Trait-based multi-robot task allocation with interleaved scheduling
    and motion planning."""


@cli.command()
@click.argument("problem", type=click.Path(exists=True, dir_okay=False))
@click.option("--alpha", type=float, default=0.5, show_default=True,
              help="Weight on the trait-mismatch heuristic; 1 - alpha weighs "
                   "schedule quality.")
@click.option("--planner", type=click.Choice(["grid", "prm"]), default="grid",
              show_default=True)
@click.option("--planner-timeout", type=float, default=10.0, show_default=True,
              help="Per-query motion planning timeout (prm only).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--node-limit", type=int, default=100_000, show_default=True)
@click.option("--time-limit", type=float, default=300.0, show_default=True,
              help="Wall-clock limit in seconds.")
@click.option("--sequential", is_flag=True,
              help="Allocate first, then schedule (baseline mode).")
@click.option("--tabu-tenure", type=int, default=4, show_default=True,
              help="Iterations a flipped ordering choice stays tabu.")
@click.option("--tabu-iterations", type=int, default=100, show_default=True,
              help="Maximum tabu search iterations per allocation.")
@click.option("--tabu-non-improving", type=int, default=25, show_default=True,
              help="Stop tabu search after this many non-improving moves.")
@click.option("--no-timing", is_flag=True,
              help="Write compute_seconds as 0.0 so output is byte-stable.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None)
def solve(problem, alpha, planner, planner_timeout, seed, node_limit, time_limit,
          sequential, tabu_tenure, tabu_iterations, tabu_non_improving,
          no_timing, output) -> int:
    """Solve one problem JSON file; exit 0 when solved, 2 when unsolved."""
    domain = load_problem(pathlib.Path(problem).read_text(encoding="utf-8"))
    config = SearchConfig(
        alpha=alpha,
        node_limit=node_limit,
        time_limit=time_limit,
        planner=planner,
        prm_timeout=planner_timeout,
        tabu=TabuParams(
            tenure=tabu_tenure,
            max_iterations=tabu_iterations,
            max_non_improving=tabu_non_improving,
        ),
        seed=seed,
    )
    solver = itags_sequential if sequential else itags
    result = solver(domain, config=config)
    if not result.solved:
        click.echo(f"unsolved ({result.reason}); visited {result.metrics.nodes_visited} nodes",
                   err=True)
        return EXIT_UNSOLVED
    if no_timing:
        result.metrics.compute_seconds = 0.0
    _write(output, save_solution(result.solution, result.metrics))
    return EXIT_SOLVED


@cli.command()
@click.option("--robots", default="4:6", show_default=True, help="Robot count N or A:B.")
@click.option("--tasks", default="6:12", show_default=True, help="Task count N or A:B.")
@click.option("--pockets", default="0:2", show_default=True,
              help="Aerial-only enclosed zones, N or A:B.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--archetypes", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Override the packaged robot archetype table.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None)
def generate(robots, tasks, pockets, seed, archetypes, output) -> int:
    """Generate a random emergency-response problem."""
    r_lo, r_hi = _parse_range(robots, "--robots")
    t_lo, t_hi = _parse_range(tasks, "--tasks")
    p_lo, p_hi = _parse_range(pockets, "--pockets", minimum=0)
    params = bench_mod.GeneratorParams(
        robots_min=r_lo, robots_max=r_hi,
        tasks_min=t_lo, tasks_max=t_hi,
        pockets_min=p_lo, pockets_max=p_hi,
        seed=seed, archetype_path=archetypes,
    )
    domain = bench_mod.generate_problem(params)
    _write(output, save_problem(domain))
    return EXIT_SOLVED


def _config_from_dict(raw: dict) -> bench_mod.BenchConfig:
    search = SearchConfig(
        alpha=float(raw.get("alpha", 0.5)),
        node_limit=int(raw.get("node_limit", 100_000)),
        time_limit=float(raw.get("time_limit", 300.0)),
        planner=str(raw.get("planner", "grid")),
        seed=int(raw.get("seed", 0)),
    )
    return bench_mod.BenchConfig(
        name=str(raw["name"]),
        search=search,
        sequential=bool(raw.get("sequential", False)),
    )


@cli.command(name="bench")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--configs", "configs_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON list of solver configurations.")
@click.option("--baseline", default=None, help="Config name to normalize against.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None)
def bench_cmd(directory, configs_path, baseline, output) -> int:
    """Run every config against every problem JSON in DIRECTORY."""
    raw = json.loads(pathlib.Path(configs_path).read_text(encoding="utf-8"))
    configs = [_config_from_dict(c) for c in raw]
    if baseline is None and configs:
        baseline = configs[0].name
    problems = _load_problems(directory)
    report = bench_mod.run_benchmark(problems, configs, baseline=baseline)
    _write(output, report.to_csv())
    return EXIT_SOLVED


@cli.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--alphas", default="0,0.25,0.5,0.75,1", show_default=True,
              help="Comma-separated heuristic weights.")
@click.option("--node-limit", type=int, default=100_000, show_default=True)
@click.option("--time-limit", type=float, default=300.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None)
def ablate(directory, alphas, node_limit, time_limit, seed, output) -> int:
    """Sweep the heuristic weight alpha over all problems in DIRECTORY."""
    values = [float(a) for a in alphas.split(",") if a.strip() != ""]
    problems = _load_problems(directory)
    base = SearchConfig(node_limit=node_limit, time_limit=time_limit, seed=seed)
    report = bench_mod.run_ablation(problems, values, base=base)
    for note in report.notes:
        click.echo(f"# {note}", err=True)
    _write(output, report.to_csv())
    return EXIT_SOLVED


def main(argv=None) -> int:
    try:
        rc = cli.main(args=argv, standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return EXIT_ERROR
    except click.exceptions.Abort:
        return EXIT_ERROR
    except (ProblemFormatError, DomainValidationError, bench_mod.GenerationError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_ERROR
    return rc if isinstance(rc, int) else EXIT_SOLVED


def entry() -> None:
    sys.exit(main())
