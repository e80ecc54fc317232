"""Exhaustive ground truth for desk-sized instances.

The search walks the days in order, choosing one feasible presence column
(and, for Model 1, one test column) per day, and cuts branches whose
optimistic risk bound cannot beat the incumbent. Exact ties are resolved in
favour of the lexicographically smallest chromosome.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .constraints import ConstraintSet
from .problem import Problem


class OracleError(RuntimeError):
    pass


class BudgetExceeded(OracleError):
    pass


class NoFeasiblePoint(OracleError):
    pass


@dataclass(frozen=True)
class OracleBudget:
    max_states: int = 2**26

    def __post_init__(self):
        if self.max_states <= 0:
            raise ValueError("max_states must be positive")


@dataclass
class OracleResult:
    schedule: np.ndarray
    tests: np.ndarray | None
    risk: float
    states_visited: int
    genes: np.ndarray


def _all_columns(n: int) -> np.ndarray:
    if n > 20:
        raise OracleError(f"n={n} is far beyond what exhaustive search can handle")
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.uint8).reshape(-1, n)


def feasible_columns(cs: ConstraintSet) -> np.ndarray:
    """All presence columns meeting every per-day group bound."""
    cols = _all_columns(cs.n).astype(np.int64)
    ok = np.ones(len(cols), dtype=bool)
    for g in cs.lower_groups:
        ok &= cols[:, list(g.members)].sum(axis=1) >= g.bound
    for g in cs.upper_groups:
        ok &= cols[:, list(g.members)].sum(axis=1) <= g.bound
    return cols[ok].astype(np.uint8)


def enumerate_optimum(problem: Problem, budget: OracleBudget = OracleBudget(), slack: float = 1e-12) -> OracleResult:
    """Global minimum of the mean risk over all feasible assignments."""
    n, D = problem.n, problem.horizon
    cs = problem.constraints
    cols_x = feasible_columns(cs)
    # tests that use the most kits first: good incumbents early, more pruning
    if problem.with_tests:
        cols_t = _all_columns(n)
        cols_t = cols_t[np.argsort(-cols_t.sum(axis=1), kind="stable")]
    else:
        cols_t = np.zeros((1, n), dtype=np.uint8)
    if len(cols_x) == 0:
        raise NoFeasiblePoint("no presence column satisfies the daily group bounds")
    a = problem._arrays
    best, choice, ties, visited, status = _kernels.search_optimum(
        n, D, problem.with_tests, np.ascontiguousarray(cols_x), np.ascontiguousarray(cols_t),
        a["pi0"], problem.params.false_negative, float(problem.pr_test),
        a["indptr"], a["indices"], a["wbeta"], problem.mode == "linearized",
        a["min_days"], a["caps"], budget.max_states, slack,
    )
    if status == 1:
        raise BudgetExceeded(f"search visited more than {budget.max_states} states")
    if status == 2:
        raise NoFeasiblePoint("no feasible assignment exists")

    def genes_of(ch):
        x = np.stack([cols_x[ch[d, 0]] for d in range(D)], axis=1)
        t = np.stack([cols_t[ch[d, 1]] for d in range(D)], axis=1) if problem.with_tests else None
        return problem.encode(x, t)

    candidates = [genes_of(choice)] + [genes_of(c) for c in ties]
    genes = min(candidates, key=lambda g: g.tobytes())
    x, t = problem.decode(genes)
    return OracleResult(x, t, problem.risk_of(x, t), int(visited), genes)


def enumerate_feasible_count(cs: ConstraintSet, D: int, budget: OracleBudget = OracleBudget()) -> int:
    """Number of feasible presence matrices (tests ignored).

    Dynamic programming over days with per-employee day counts capped at
    their minimum, so it stays cheap for small ``n``.
    """
    cols = feasible_columns(cs).astype(np.int64)
    need = cs.min_days()
    if len(cols) == 0:
        return 0
    states = {tuple([0] * cs.n): 1}
    for _ in range(D):
        nxt: dict[tuple, int] = {}
        for s, c in states.items():
            base = np.array(s)
            for col in cols:
                key = tuple(np.minimum(base + col, need))
                nxt[key] = nxt.get(key, 0) + c
        states = nxt
        if len(states) * len(cols) > budget.max_states:
            raise BudgetExceeded("feasible count needs too many states")
    target = tuple(need)
    return int(states.get(target, 0))
