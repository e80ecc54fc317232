"""Day-by-day propagation of infection probabilities.

Each working day is a two-step update: the effect of (scheduled or random)
tests is applied to everyone, then employees on site pick up risk from the
colleagues they may meet. All functions are pure and operate on numpy
vectors; :class:`RiskState` is a thin immutable wrapper used for
trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import ContactGraph

# 300 weekly cases per 100k inhabitants spread over 7 days
DEFAULT_BACKGROUND_RISK = 300 / (7 * 100_000)

INITIAL_POLICIES = ("weekend_compounded", "model_spec")
MODES = ("exact", "linearized")


@dataclass(frozen=True)
class EpidemicParams:
    beta_base: float = 0.1
    vaccine_efficacy: float = 0.85
    false_negative: float = 0.2
    background_risk: float = DEFAULT_BACKGROUND_RISK
    horizon: int = 5
    initial_risk_policy: str = "weekend_compounded"

    def __post_init__(self):
        for name in ("beta_base", "vaccine_efficacy", "false_negative", "background_risk"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")
        if self.horizon < 1:
            raise ValueError("horizon must be at least one day")
        if self.initial_risk_policy not in INITIAL_POLICIES:
            raise ValueError(f"unknown initial risk policy {self.initial_risk_policy!r}")

    def susceptibility(self, vaccinated) -> np.ndarray:
        """Multiplier per employee: ``1 - efficacy`` if vaccinated, else 1."""
        vaccinated = np.asarray(vaccinated, dtype=bool)
        return np.where(vaccinated, 1.0 - self.vaccine_efficacy, 1.0)

    def beta(self, vaccinated) -> np.ndarray:
        """Per-contact transmission probability of each employee."""
        return self.beta_base * self.susceptibility(vaccinated)


@dataclass(frozen=True, eq=False)
class RiskState:
    day: int
    pi: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float)
        pi.flags.writeable = False
        object.__setattr__(self, "pi", pi)


def initial_risk(graph: ContactGraph, params: EpidemicParams) -> RiskState:
    """Infection probabilities at the start of the week (day 0)."""
    br = params.background_risk
    if params.initial_risk_policy == "model_spec":
        pi = params.beta(graph.vaccinated) * br
    else:
        # two weekend days of background exposure
        pi = params.susceptibility(graph.vaccinated) * (1.0 - (1.0 - br) ** 2)
    return RiskState(0, pi)


def apply_test_deterministic(pi_prev, tested, fn_rate):
    return pi_prev * (1 - tested) + pi_prev * tested * fn_rate


def apply_test_probabilistic(pi_prev, pr_test, fn_rate):
    return (1 - pr_test) * pi_prev + pr_test * pi_prev * fn_rate


def _pressure(pi_after_tests, presence, graph, params):
    x = np.asarray(presence, dtype=float)
    pi = np.asarray(pi_after_tests, dtype=float)
    # rate[i, j] = p_ij * beta_i * x_j * PI'_j
    return graph.weights * params.beta(graph.vaccinated)[:, None] * (x * pi)[None, :], x, pi


def _accumulate(rate, exact):
    """Fold the columns of ``rate`` left to right.

    Exact: ``q = 1 - prod(1 - r)`` built as ``q += r * (1 - q)``; every term is
    nonnegative, so risks around 1e-5 keep full relative precision (the
    textbook ``1 - (1 - a) * prod`` form cancels catastrophically there).
    Linearized: the plain running sum. Both fold in the same order, which
    keeps ``q <= sum`` exact under rounding.
    """
    acc = np.zeros(rate.shape[0])
    for j in range(rate.shape[1]):
        r = rate[:, j]
        acc = acc + r * (1.0 - acc) if exact else acc + r
    return acc


def contact_update_exact(state_after_tests, presence_today, graph: ContactGraph, params: EpidemicParams):
    """Contact step using the full product over colleagues.

    Accepts either a :class:`RiskState` or a bare vector and returns the
    same kind. Only employees on site are updated.
    """
    pi_in = state_after_tests.pi if isinstance(state_after_tests, RiskState) else state_after_tests
    rate, x, pi = _pressure(pi_in, presence_today, graph, params)
    q = _accumulate(rate, exact=True)
    # a + (1 - a) q  ==  1 - (1 - a) prod(1 - r)
    out = np.where(x > 0, pi + (1.0 - pi) * q, pi)
    return _wrap(state_after_tests, out)


def contact_update_linearized(state_after_tests, presence_today, graph: ContactGraph, params: EpidemicParams):
    """First-order version of :func:`contact_update_exact`, clamped to [0, 1]."""
    pi_in = state_after_tests.pi if isinstance(state_after_tests, RiskState) else state_after_tests
    rate, x, pi = _pressure(pi_in, presence_today, graph, params)
    s = _accumulate(rate, exact=False)
    out = np.where(x > 0, np.clip(pi + (1.0 - pi) * s, 0.0, 1.0), pi)
    return _wrap(state_after_tests, out)


def _wrap(like, pi):
    if isinstance(like, RiskState):
        return RiskState(like.day, pi)
    return pi


_CONTACT = {"exact": contact_update_exact, "linearized": contact_update_linearized}


def contact_update(state, presence, graph, params, mode="exact"):
    try:
        step = _CONTACT[mode]
    except KeyError:
        raise ValueError(f"unknown propagation mode {mode!r}") from None
    return step(state, presence, graph, params)


def update_day_model1(state: RiskState, x_day, t_day, graph, params, mode="exact") -> RiskState:
    """One day with a scheduled test plan: tests first, then contacts."""
    if state.day >= params.horizon:
        raise ValueError(f"day {state.day} is already at the horizon")
    tested = np.asarray(t_day, dtype=float)
    after = apply_test_deterministic(state.pi, tested, params.false_negative)
    pi = contact_update(after, x_day, graph, params, mode)
    return RiskState(state.day + 1, pi)


def update_day_model2(state: RiskState, x_day, pr_test, graph, params, mode="exact") -> RiskState:
    """One day where everyone tests with probability ``pr_test``."""
    if state.day >= params.horizon:
        raise ValueError(f"day {state.day} is already at the horizon")
    after = apply_test_probabilistic(state.pi, pr_test, params.false_negative)
    pi = contact_update(after, x_day, graph, params, mode)
    return RiskState(state.day + 1, pi)


def simulate(graph, params, x, t=None, pr_test=None, mode="exact", start: RiskState | None = None) -> list[RiskState]:
    """Trajectory for days 1..D of an ``n x D`` presence matrix.

    Give ``t`` for a scheduled test plan or ``pr_test`` for random testing
    (neither means no tests).
    """
    x = np.asarray(x)
    if x.shape != (graph.n, params.horizon):
        raise ValueError(f"presence matrix must be {(graph.n, params.horizon)}, got {x.shape}")
    if t is not None and pr_test is not None:
        raise ValueError("give either a test plan or a test probability, not both")
    state = start if start is not None else initial_risk(graph, params)
    traj = []
    for d in range(params.horizon):
        if pr_test is not None:
            state = update_day_model2(state, x[:, d], pr_test, graph, params, mode)
        else:
            t_day = np.zeros(graph.n) if t is None else np.asarray(t)[:, d]
            state = update_day_model1(state, x[:, d], t_day, graph, params, mode)
        traj.append(state)
    return traj


def objective(trajectory: Sequence[RiskState | np.ndarray]) -> float:
    """Mean infection probability over employees and days 1..D."""
    if len(trajectory) == 0:
        raise ValueError("empty trajectory")
    rows = np.array([s.pi if isinstance(s, RiskState) else s for s in trajectory], dtype=float)
    return float(rows.sum() / rows.size)


def risk(graph, params, x, t=None, pr_test=None, mode="exact") -> float:
    """Objective value of a schedule; shorthand for ``objective(simulate(...))``."""
    return objective(simulate(graph, params, x, t=t, pr_test=pr_test, mode=mode))
