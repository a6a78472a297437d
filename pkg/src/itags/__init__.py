"""Trait-based time-extended multi-robot task allocation: interleaved
allocation search, simple-temporal-network scheduling, and 2D motion
planning."""

from .domain import (
    Allocation,
    ConfigurationSpace,
    ProblemDomain,
    Robot,
    Solution,
    Task,
    TaskNetwork,
    load_problem,
    save_problem,
    save_solution,
    validate_domain,
)
from .bench import (
    BenchConfig,
    GeneratorParams,
    generate_problem,
    run_ablation,
    run_benchmark,
)
from .heuristics import apr, nsq, tetaq
from .motion import MotionLayer, MotionPlan, PlanCache, PlannerTimeout
from .scheduler import Schedule, ScheduleBundle, Stn, TabuParams, schedule_allocation
from .search import RunMetrics, SearchConfig, SearchResult, itags, itags_sequential, verify_solution

__all__ = [
    "Allocation",
    "BenchConfig",
    "ConfigurationSpace",
    "GeneratorParams",
    "MotionLayer",
    "MotionPlan",
    "PlanCache",
    "PlannerTimeout",
    "ProblemDomain",
    "Robot",
    "RunMetrics",
    "Schedule",
    "ScheduleBundle",
    "SearchConfig",
    "SearchResult",
    "Solution",
    "Stn",
    "TabuParams",
    "Task",
    "TaskNetwork",
    "apr",
    "generate_problem",
    "itags",
    "itags_sequential",
    "load_problem",
    "nsq",
    "run_ablation",
    "run_benchmark",
    "save_problem",
    "save_solution",
    "schedule_allocation",
    "tetaq",
    "validate_domain",
    "verify_solution",
]

__version__ = "0.1.0"
