from __future__ import annotations

import math
import random

import pytest

from conftest import empty_space, make_domain
from itags.domain import ConfigurationSpace, Robot
from itags.motion import (
    MotionLayer,
    MotionQuery,
    PlanCache,
    PlannerTimeout,
    coalition_signature,
    coalition_space,
    memoized_plan,
    plan_grid,
    plan_lazy_prm,
    quantize,
)
from oracles import uniform_cost_grid


def _random_space(rng: random.Random) -> ConfigurationSpace:
    obstacles = []
    for _ in range(rng.randint(0, 4)):
        x = rng.uniform(5, 80)
        y = rng.uniform(5, 80)
        w = rng.uniform(3, 15)
        h = rng.uniform(3, 15)
        obstacles.append(((x, y), (x + w, y), (x + w, y + h), (x, y + h)))
    return ConfigurationSpace("t", (0.0, 0.0, 100.0, 100.0), obstacles=tuple(obstacles))


def _free_point(space: ConfigurationSpace, rng: random.Random):
    while True:
        p = (rng.uniform(0, 100), rng.uniform(0, 100))
        if space.point_free(p):
            return p


class TestPlanGrid:
    def test_straight_line(self):
        plan = plan_grid((0.0, 0.0), (3.0, 0.0), empty_space(), resolution=1.0)
        assert plan is not None
        assert plan.length == pytest.approx(3.0)
        assert plan.waypoints[0] == (0.0, 0.0)
        assert plan.waypoints[-1] == (3.0, 0.0)

    def test_diagonal_uses_octile_distance(self):
        plan = plan_grid((0.0, 0.0), (3.0, 3.0), empty_space(), resolution=1.0)
        assert plan.length == pytest.approx(3.0 * math.sqrt(2.0))

    def test_off_lattice_goal_gets_residual_segment(self):
        plan = plan_grid((0.0, 0.0), (3.4, 0.0), empty_space(), resolution=1.0)
        assert plan.waypoints[-1] == (3.4, 0.0)
        assert plan.length == pytest.approx(3.4)

    def test_routes_around_an_obstacle(self):
        space = ConfigurationSpace(
            "t", (0.0, 0.0, 20.0, 20.0), obstacles=(((4.5, 8.0), (5.5, 8.0), (5.5, 20.0), (4.5, 20.0)),)
        )
        plan = plan_grid((0.0, 10.0), (10.0, 10.0), space, resolution=1.0)
        assert plan is not None
        assert plan.length > 10.0
        for a, b in zip(plan.waypoints, plan.waypoints[1:]):
            assert space.segment_free(a, b)

    def test_disconnected_goal_returns_none(self):
        wall = ((5.0, -1.0), (6.0, -1.0), (6.0, 21.0), (5.0, 21.0))
        space = ConfigurationSpace("t", (0.0, 0.0, 20.0, 20.0), obstacles=(wall,))
        assert plan_grid((0.0, 10.0), (15.0, 10.0), space, resolution=1.0) is None

    def test_start_inside_obstacle_returns_none(self):
        space = ConfigurationSpace(
            "t", (0.0, 0.0, 20.0, 20.0), obstacles=(((1.0, 1.0), (3.0, 1.0), (3.0, 3.0), (1.0, 3.0)),)
        )
        assert plan_grid((2.0, 2.0), (10.0, 10.0), space, resolution=1.0) is None

    def test_zero_resolution_rejected(self):
        with pytest.raises(ValueError, match="resolution"):
            plan_grid((0.0, 0.0), (1.0, 0.0), empty_space(), resolution=0.0)

    def test_matches_uniform_cost_oracle_on_random_maps(self):
        rng = random.Random(19)
        for _ in range(40):
            space = _random_space(rng)
            start = _free_point(space, rng)
            goal = _free_point(space, rng)
            plan = plan_grid(start, goal, space, resolution=2.5)
            oracle = uniform_cost_grid(start, goal, space, resolution=2.5)
            if oracle is None:
                assert plan is None
            else:
                assert plan is not None
                assert plan.length == pytest.approx(oracle, abs=1e-9)

    def test_deterministic(self):
        space = _random_space(random.Random(5))
        plans = [plan_grid((1.0, 1.0), (90.0, 77.0), space, resolution=2.0) for _ in range(2)]
        assert plans[0] == plans[1]


class TestLazyPrm:
    def test_connects_in_open_space(self):
        plan = plan_lazy_prm((5.0, 5.0), (90.0, 90.0), empty_space(), seed=1)
        assert plan is not None
        assert plan.length >= math.dist((5.0, 5.0), (90.0, 90.0)) - 1e-9

    def test_path_edges_are_collision_free(self):
        space = _random_space(random.Random(23))
        start = _free_point(space, random.Random(1))
        goal = _free_point(space, random.Random(2))
        plan = plan_lazy_prm(start, goal, space, samples=800, seed=3)
        if plan is not None:
            for a, b in zip(plan.waypoints, plan.waypoints[1:]):
                assert space.segment_free(a, b)

    def test_disconnected_returns_none(self):
        wall = ((5.0, -1.0), (6.0, -1.0), (6.0, 101.0), (5.0, 101.0))
        space = ConfigurationSpace("t", (0.0, 0.0, 100.0, 100.0), obstacles=(wall,))
        assert plan_lazy_prm((1.0, 50.0), (50.0, 50.0), space, samples=300, seed=4) is None

    def test_seed_determinism(self):
        plans = [
            plan_lazy_prm((5.0, 5.0), (90.0, 90.0), empty_space(), seed=9)
            for _ in range(2)
        ]
        assert plans[0] == plans[1]

    def test_timeout_raises(self):
        with pytest.raises(PlannerTimeout):
            plan_lazy_prm((5.0, 5.0), (90.0, 90.0), empty_space(), samples=2000, timeout=0.0)


class TestMemoization:
    def test_cache_hit_skips_planner(self):
        calls = []
        cache = PlanCache()
        query = MotionQuery((0.0, 0.0), (1.0, 0.0), ("t",))

        def planner(q):
            calls.append(q)
            return plan_grid(q.start, q.goal, empty_space(), resolution=1.0)

        first = memoized_plan(query, cache, planner)
        second = memoized_plan(query, cache, planner)
        assert first == second
        assert len(calls) == 1
        assert len(cache) == 1

    def test_infeasible_outcomes_are_cached(self):
        calls = []
        cache = PlanCache()
        query = MotionQuery((0.0, 0.0), (1.0, 0.0), ("t",))

        def planner(q):
            calls.append(q)
            return None

        assert memoized_plan(query, cache, planner) is None
        assert memoized_plan(query, cache, planner) is None
        assert len(calls) == 1

    def test_timeouts_are_not_cached(self):
        calls = []
        cache = PlanCache()
        query = MotionQuery((0.0, 0.0), (1.0, 0.0), ("t",))

        def planner(q):
            calls.append(q)
            raise PlannerTimeout("boom")

        for _ in range(2):
            with pytest.raises(PlannerTimeout):
                memoized_plan(query, cache, planner)
        assert len(calls) == 2
        assert len(cache) == 0

    def test_nearby_floats_share_a_key(self):
        a = MotionQuery((0.1 + 0.2, 0.0), (1.0, 0.0), ("t",))
        b = MotionQuery((0.3, 0.0), (1.0, 0.0), ("t",))
        assert a.cache_key == b.cache_key

    def test_quantize_distinguishes_distinct_points(self):
        assert quantize((0.5, 0.5)) != quantize((0.5, 0.500001))


class TestCoalitionSpace:
    def test_signature_sorts_and_deduplicates(self):
        robots = [
            Robot(0, (1.0,), 1.0, "ground", (0.0, 0.0)),
            Robot(1, (1.0,), 1.0, "aerial", (0.0, 0.0)),
            Robot(2, (1.0,), 1.0, "ground", (0.0, 0.0)),
        ]
        assert coalition_signature(robots) == ("aerial", "ground")

    def test_empty_coalition_rejected(self):
        with pytest.raises(ValueError):
            coalition_signature([])

    def test_intersection_of_bounds_union_of_obstacles(self):
        box = ((10.0, 10.0), (20.0, 10.0), (20.0, 20.0), (10.0, 20.0))
        spaces = {
            "a": ConfigurationSpace("a", (0.0, 0.0, 50.0, 50.0), obstacles=(box,)),
            "b": ConfigurationSpace("b", (5.0, 5.0, 100.0, 100.0), obstacles=()),
        }
        combined = coalition_space(spaces, ("a", "b"))
        assert combined.bounds == (5.0, 5.0, 50.0, 50.0)
        assert combined.obstacles == (box,)
        assert not combined.point_free((15.0, 15.0))
        assert not combined.point_free((2.0, 2.0))  # outside b's bounds
        assert combined.point_free((30.0, 30.0))


class TestMotionLayer:
    def _domain(self):
        box = ((40.0, 40.0), (60.0, 40.0), (60.0, 60.0), (40.0, 60.0))
        spaces = {
            "ground": ConfigurationSpace("ground", (0.0, 0.0, 100.0, 100.0), obstacles=(box,)),
            "aerial": ConfigurationSpace("aerial", (0.0, 0.0, 100.0, 100.0), obstacles=()),
        }
        return make_domain(
            robots=[
                {"traits": [1], "type_id": "ground"},
                {"traits": [1], "type_id": "aerial"},
            ],
            tasks=[{"req": [1]}],
            spaces=spaces,
        )

    def test_counts_planner_invocations_once_per_distinct_query(self):
        layer = MotionLayer(self._domain(), planner="grid", resolution=5.0)
        robot = layer.domain.robots[0]
        for _ in range(3):
            layer.robot_plan(robot, (0.0, 0.0), (10.0, 0.0))
        assert layer.invocations == 1
        layer.robot_plan(robot, (0.0, 0.0), (20.0, 0.0))
        assert layer.invocations == 2

    def test_same_endpoints_different_types_plan_separately(self):
        layer = MotionLayer(self._domain(), planner="grid", resolution=5.0)
        ground, aerial = layer.domain.robots
        g = layer.robot_plan(ground, (30.0, 50.0), (70.0, 50.0))
        a = layer.robot_plan(aerial, (30.0, 50.0), (70.0, 50.0))
        assert layer.invocations == 2
        assert a.length == pytest.approx(40.0)
        assert g.length > a.length  # the ground robot detours around the box

    def test_coalition_plan_respects_the_stricter_member(self):
        layer = MotionLayer(self._domain(), planner="grid", resolution=5.0)
        plan = layer.coalition_plan(list(layer.domain.robots), (30.0, 50.0), (70.0, 50.0))
        assert plan.length > 40.0

    def test_unknown_planner_rejected(self):
        with pytest.raises(ValueError, match="planner"):
            MotionLayer(self._domain(), planner="rrt")
