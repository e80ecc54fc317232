"""Weekly presence and test schedules that keep workplace infection risk low."""

from .constraints import ConstraintSet, Group, base_case_constraints, is_feasible, violation_count
from .ga import GaConfig, GaResult, InfeasibleError, Solution, evolve, random_feasible, solve_model1, solve_model2
from .graph import (
    ContactGraph,
    GraphError,
    assign_vaccination,
    build_from_interactions,
    gen_random_graph,
    load_edge_list,
    two_section_graph,
)
from .infection import EpidemicParams, RiskState, objective, risk, simulate
from .oracle import BudgetExceeded, NoFeasiblePoint, OracleBudget, enumerate_feasible_count, enumerate_optimum
from .problem import Problem

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded",
    "ConstraintSet",
    "ContactGraph",
    "EpidemicParams",
    "GaConfig",
    "GaResult",
    "GraphError",
    "Group",
    "InfeasibleError",
    "NoFeasiblePoint",
    "OracleBudget",
    "Problem",
    "RiskState",
    "Solution",
    "assign_vaccination",
    "base_case_constraints",
    "build_from_interactions",
    "enumerate_feasible_count",
    "enumerate_optimum",
    "evolve",
    "gen_random_graph",
    "is_feasible",
    "load_edge_list",
    "objective",
    "random_feasible",
    "risk",
    "simulate",
    "solve_model1",
    "solve_model2",
    "two_section_graph",
    "violation_count",
]
