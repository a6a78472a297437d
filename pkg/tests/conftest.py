from __future__ import annotations

from typing import Optional, Sequence

import pytest

from itags.domain import (
    ConfigurationSpace,
    ProblemDomain,
    Robot,
    Task,
    TaskNetwork,
)


def empty_space(type_id: str = "t", size: float = 100.0) -> ConfigurationSpace:
    return ConfigurationSpace(type_id=type_id, bounds=(0.0, 0.0, size, size), obstacles=())


def make_domain(
    robots: Sequence[dict],
    tasks: Sequence[dict],
    edges: Sequence[tuple[int, int]] = (),
    spaces: Optional[dict] = None,
    trait_names: Optional[Sequence[str]] = None,
) -> ProblemDomain:
    """Compact domain builder for tests. Robot dicts: traits, speed=1,
    type_id='t', at=(0, 0). Task dicts: req, duration=1, at=(0, 0),
    to=at."""
    if spaces is None:
        spaces = {"t": empty_space()}
    robot_objs = tuple(
        Robot(
            id=i,
            traits=tuple(float(v) for v in r["traits"]),
            speed=float(r.get("speed", 1.0)),
            type_id=r.get("type_id", "t"),
            initial_config=tuple(r.get("at", (0.0, 0.0))),
        )
        for i, r in enumerate(robots)
    )
    task_objs = tuple(
        Task(
            id=i,
            requirements=tuple(float(v) for v in t["req"]),
            static_duration=float(t.get("duration", 1.0)),
            initial_config=tuple(t.get("at", (0.0, 0.0))),
            terminal_config=tuple(t.get("to", t.get("at", (0.0, 0.0)))),
        )
        for i, t in enumerate(tasks)
    )
    if trait_names is None:
        n_traits = len(robot_objs[0].traits) if robot_objs else 0
        trait_names = tuple(f"trait{u}" for u in range(n_traits))
    return ProblemDomain(
        network=TaskNetwork(tasks=task_objs, precedence_edges=tuple(edges)),
        robots=robot_objs,
        spaces=spaces,
        trait_names=tuple(trait_names),
    )


@pytest.fixture
def two_by_two_domain() -> ProblemDomain:
    return make_domain(
        robots=[{"traits": [1, 0]}, {"traits": [1, 2]}],
        tasks=[{"req": [2, 1]}, {"req": [0, 3]}],
    )
