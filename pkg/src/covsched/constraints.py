"""Feasibility constraints on presence and test schedules.

Violations are counted per constraint instance: one per (group, day) whose
head count misses its bound, one per employee short of the minimum number
of on-site days, and one per employee over their test capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Group:
    members: tuple[int, ...]
    bound: int

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(int(m) for m in self.members))
        if self.bound < 0:
            raise ValueError("group bounds must be nonnegative")
        if len(set(self.members)) != len(self.members):
            raise ValueError("group members must be distinct")


@dataclass(frozen=True)
class ConstraintSet:
    """Daily lower/upper head-count groups plus per-employee limits.

    ``min_presence_days`` and ``test_capacity`` may be scalars (same for
    everyone) or per-employee sequences; ``None`` disables them.
    """

    n: int
    lower_groups: tuple[Group, ...] = ()
    upper_groups: tuple[Group, ...] = ()
    min_presence_days: object = 0
    test_capacity: object = None
    labels: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "lower_groups", tuple(self.lower_groups))
        object.__setattr__(self, "upper_groups", tuple(self.upper_groups))
        for g in self.lower_groups + self.upper_groups:
            if any(m < 0 or m >= self.n for m in g.members):
                raise ValueError(f"group members must be in 0..{self.n - 1}")
        for g in self.lower_groups:
            if g.bound > len(g.members):
                raise ValueError(f"lower bound {g.bound} exceeds group size {len(g.members)}")
        for name in ("min_presence_days", "test_capacity"):
            v = getattr(self, name)
            if v is not None and np.any(np.asarray(v) < 0):
                raise ValueError(f"{name} must be nonnegative")

    def min_days(self) -> np.ndarray:
        return _per_employee(self.min_presence_days, self.n, 0)

    def capacities(self) -> np.ndarray | None:
        if self.test_capacity is None:
            return None
        return _per_employee(self.test_capacity, self.n, 0)

    @property
    def instance_count(self) -> int:
        """Number of per-day group constraints (excluding per-employee ones)."""
        return len(self.lower_groups) + len(self.upper_groups)

    def permuted(self, perm: Sequence[int]) -> "ConstraintSet":
        """Constraint set for employees relabelled so new ``k`` is old ``perm[k]``."""
        inv = np.empty(len(perm), dtype=int)
        inv[np.asarray(perm)] = np.arange(len(perm))
        relabel = lambda gs: tuple(Group(sorted(int(inv[m]) for m in g.members), g.bound) for g in gs)
        caps = self.capacities()
        return ConstraintSet(
            self.n,
            relabel(self.lower_groups),
            relabel(self.upper_groups),
            self.min_days()[np.asarray(perm)],
            None if caps is None else caps[np.asarray(perm)],
        )


def _per_employee(v, n, default) -> np.ndarray:
    if v is None:
        return np.full(n, default, dtype=np.int64)
    arr = np.asarray(v, dtype=np.int64)
    if arr.ndim == 0:
        return np.full(n, int(arr), dtype=np.int64)
    if arr.shape != (n,):
        raise ValueError(f"expected {n} per-employee values, got {arr.shape}")
    return arr


def _check_shape(a, cs: ConstraintSet, what: str) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != cs.n:
        raise ValueError(f"{what} must be an n x D matrix with n={cs.n}, got shape {a.shape}")
    return a


def violation_count(sched, tests, cs: ConstraintSet) -> int:
    x = _check_shape(sched, cs, "schedule").astype(np.int64)
    count = 0
    for g in cs.lower_groups:
        heads = x[list(g.members)].sum(axis=0)
        count += int(np.count_nonzero(heads < g.bound))
    for g in cs.upper_groups:
        heads = x[list(g.members)].sum(axis=0)
        count += int(np.count_nonzero(heads > g.bound))
    count += int(np.count_nonzero(x.sum(axis=1) < cs.min_days()))
    if tests is not None:
        t = _check_shape(tests, cs, "test plan").astype(np.int64)
        if t.shape != x.shape:
            raise ValueError(f"test plan shape {t.shape} differs from schedule {x.shape}")
        caps = cs.capacities()
        if caps is not None:
            count += int(np.count_nonzero(t.sum(axis=1) > caps))
    return count


def is_feasible(sched, tests, cs: ConstraintSet) -> bool:
    return violation_count(sched, tests, cs) == 0


def build_occupancy_band(n: int, min_frac: float, max_frac: float, members=None) -> tuple[Group, Group]:
    """Daily occupancy band over ``members`` (default everyone).

    Bounds round conservatively: ceil for the minimum, floor for the maximum.
    """
    if not 0.0 <= min_frac <= max_frac <= 1.0:
        raise ValueError(f"need 0 <= min_frac <= max_frac <= 1, got {min_frac}, {max_frac}")
    members = tuple(range(n)) if members is None else tuple(members)
    size = len(members)
    lo = _ceil(min_frac * size)
    hi = _floor(max_frac * size)
    return Group(members, lo), Group(members, hi)


# guard against 0.3 * 10 == 3.0000000000000004 style noise
def _ceil(v: float) -> int:
    return math.ceil(round(v, 9))


def _floor(v: float) -> int:
    return math.floor(round(v, 9))


def section_minimum(members, frac: float) -> Group:
    """At least ``ceil(frac * |members|)`` of ``members`` on site every day."""
    return build_occupancy_band(0, frac, 1.0, members)[0]


def daily_headcount(sched, day: int) -> int:
    x = np.asarray(sched)
    if not 0 <= day < x.shape[1]:
        raise IndexError(f"day {day} outside 0..{x.shape[1] - 1}")
    return int(x[:, day].sum())


def base_case_constraints(
    n: int = 20,
    section_sizes: Sequence[int] = (12, 8),
    occupancy: tuple[float, float] = (0.5, 0.75),
    section_frac: float = 0.3,
    min_presence_days: int = 2,
    test_capacity: int | None = 2,
) -> ConstraintSet:
    """The small-office rule set: occupancy band, per-section minimum, 2 days each."""
    from .graph import sections

    lo, hi = build_occupancy_band(n, *occupancy)
    lower = [lo] + [section_minimum(m, section_frac) for m in sections(section_sizes)]
    return ConstraintSet(n, lower, [hi], min_presence_days, test_capacity)
