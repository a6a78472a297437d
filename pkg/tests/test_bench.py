from __future__ import annotations

import dataclasses

import pytest

from itags.bench import (
    AERIAL,
    GROUND,
    BenchConfig,
    GenerationError,
    GeneratorParams,
    generate_problem,
    load_archetypes,
    run_ablation,
    run_benchmark,
)
from itags.domain import load_problem, save_problem, validate_domain
from itags.search import SearchConfig


SMALL = GeneratorParams(
    robots_min=2,
    robots_max=3,
    tasks_min=3,
    tasks_max=5,
    obstacles_min=1,
    obstacles_max=3,
    pockets_min=0,
    pockets_max=1,
)


class TestArchetypes:
    def test_packaged_table_loads(self):
        traits, archetypes = load_archetypes()
        assert len(traits) >= 3
        assert len(archetypes) >= 3
        type_ids = {a.type_id for a in archetypes}
        assert type_ids == {GROUND, AERIAL}
        for arch in archetypes:
            assert arch.speed > 0
            assert set(arch.traits) <= set(traits)


class TestGenerator:
    def test_output_passes_validation(self):
        domain = generate_problem(dataclasses.replace(SMALL, seed=1))
        assert validate_domain(domain) == []

    def test_respects_size_ranges(self):
        domain = generate_problem(dataclasses.replace(SMALL, seed=2))
        assert 2 <= domain.num_robots <= 3
        assert 3 <= domain.num_tasks <= 5

    def test_deterministic_per_seed(self):
        params = dataclasses.replace(SMALL, seed=9)
        assert save_problem(generate_problem(params)) == save_problem(
            generate_problem(params)
        )

    def test_different_seeds_differ(self):
        a = generate_problem(dataclasses.replace(SMALL, seed=5))
        b = generate_problem(dataclasses.replace(SMALL, seed=6))
        assert save_problem(a) != save_problem(b)

    def test_round_trips_through_the_problem_format(self):
        domain = generate_problem(dataclasses.replace(SMALL, seed=3))
        text = save_problem(domain)
        assert save_problem(load_problem(text)) == text

    def test_pockets_force_an_aerial_robot(self):
        params = dataclasses.replace(SMALL, pockets_min=1, pockets_max=1, seed=4)
        domain = generate_problem(params)
        assert any(r.type_id == AERIAL for r in domain.robots)

    def test_rescue_precedes_delivery(self):
        domain = generate_problem(dataclasses.replace(SMALL, seed=7))
        # Generated networks pair each rescue with a later delivery.
        assert domain.network.is_dag()
        for i, j in domain.network.precedence_edges:
            assert i < j

    def test_invalid_ranges_rejected(self):
        with pytest.raises(ValueError):
            generate_problem(dataclasses.replace(SMALL, robots_min=5, robots_max=2))
        with pytest.raises(ValueError):
            generate_problem(dataclasses.replace(SMALL, tasks_min=0, tasks_max=0))

    def test_generation_error_carries_a_reason(self):
        # A map too small to hold a pocket exhausts the retry budget.
        params = dataclasses.replace(
            SMALL,
            map_width=10.0,
            map_height=10.0,
            pockets_min=2,
            pockets_max=2,
            seed=0,
        )
        with pytest.raises(GenerationError):
            generate_problem(params)


def _problem_set(n=2):
    return [
        (f"p{seed}", generate_problem(dataclasses.replace(SMALL, seed=seed)))
        for seed in range(n)
    ]


class TestBenchmark:
    def test_rows_cover_every_pair(self):
        problems = _problem_set(2)
        configs = [
            BenchConfig(name="interleaved", search=SearchConfig(resolution=5.0)),
            BenchConfig(name="sequential", search=SearchConfig(resolution=5.0), sequential=True),
        ]
        report = run_benchmark(problems, configs, baseline="interleaved")
        assert len(report.rows) == 4
        assert {r["config"] for r in report.rows} == {"interleaved", "sequential"}

    def test_baseline_normalization_is_relative(self):
        problems = _problem_set(1)
        configs = [
            BenchConfig(name="a", search=SearchConfig(resolution=5.0)),
            BenchConfig(name="b", search=SearchConfig(resolution=5.0)),
        ]
        report = run_benchmark(problems, configs, baseline="a")
        by_config = {r["config"]: r for r in report.rows}
        if by_config["a"]["solved"]:
            assert by_config["a"]["normalized_makespan"] == pytest.approx(0.0)
            # identical configs: b matches a exactly
            assert by_config["b"]["normalized_makespan"] == pytest.approx(0.0)

    def test_node_limited_runs_become_unsolved_rows(self):
        problems = _problem_set(1)
        configs = [BenchConfig(name="tiny", search=SearchConfig(node_limit=1, resolution=5.0))]
        report = run_benchmark(problems, configs)
        assert report.rows[0]["solved"] is False

    def test_csv_has_header_and_normalized_columns(self):
        problems = _problem_set(1)
        configs = [BenchConfig(name="a", search=SearchConfig(resolution=5.0))]
        text = run_benchmark(problems, configs, baseline="a").to_csv()
        header = text.splitlines()[0].split(",")
        assert header[:3] == ["problem", "config", "solved"]
        assert "normalized_makespan" in header
        assert len(text.splitlines()) == 2

    def test_aggregates_summarize_solved_rows(self):
        problems = _problem_set(2)
        configs = [BenchConfig(name="a", search=SearchConfig(resolution=5.0))]
        report = run_benchmark(problems, configs)
        agg = report.aggregates()
        assert "a" in agg
        solved = agg["a"]["solved"]["count"]
        assert solved == sum(1 for r in report.rows if r["solved"])
        if solved:
            assert agg["a"]["makespan"]["mean"] > 0


class TestAblation:
    def test_varies_only_alpha(self):
        problems = _problem_set(1)
        report = run_ablation(problems, [0.25, 0.75], base=SearchConfig(resolution=5.0))
        assert {r["config"] for r in report.rows} == {"alpha=0.25", "alpha=0.75"}
        assert report.baseline == "alpha=0.25"
        assert any("0.25" in note for note in report.notes)

    def test_rejects_out_of_range_alpha(self):
        with pytest.raises(ValueError, match="alpha"):
            run_ablation([], [0.5, 1.5])
