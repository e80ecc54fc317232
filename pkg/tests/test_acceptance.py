"""End-to-end acceptance checks, one test per criterion.

Each test appends a ``[PASS]``/``[FAIL]`` line that is printed in the
terminal summary. The grid checks (criteria 3 and 4) share one run of the
12-cell office grid and take roughly 40 minutes on a single core.
"""

import time

import numpy as np
import pytest

from covsched.constraints import base_case_constraints, daily_headcount, is_feasible
from covsched.ga import GaConfig, evolve, random_feasible, solve_model1, solve_model2
from covsched.graph import ContactGraph, assign_vaccination, gen_random_graph, two_section_graph
from covsched.infection import (
    EpidemicParams,
    apply_test_deterministic,
    apply_test_probabilistic,
    contact_update_exact,
    contact_update_linearized,
)
from covsched.oracle import enumerate_optimum
from covsched.problem import Problem
from covsched.scenario import aggregate_reduction, report, run_grid
from tests.conftest import ACCEPTANCE_LINES, random_graph, tiny_instance


def record(number, name, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} ({detail})")


def test_c1_ga_matches_oracle():
    start = time.perf_counter()
    rel, lower = [], 0
    for seed in range(20):
        pr = tiny_instance(seed)
        exact = enumerate_optimum(pr).risk
        res = evolve(pr, GaConfig(seed=seed))
        assert res.violations == 0
        got = pr.risk_of(*pr.decode(res.best.genes))
        rel.append(abs(got - exact) / exact)
        lower += got < exact * (1 - 1e-12)
    elapsed = time.perf_counter() - start
    matched = sum(r <= 1e-12 for r in rel)
    ok = matched >= 18 and lower == 0 and elapsed < 300
    record(1, "GA matches exact optimum", ok, f"{matched}/20 within 1e-12, {lower} below optimum, {elapsed:.0f}s")
    assert ok


def test_c2_linearization_accuracy():
    rng = np.random.default_rng(2)
    p = EpidemicParams(beta_base=0.1)
    diffs = []
    below = 0
    for _ in range(100):
        g = random_graph(rng, 20, density=0.3, vaccinated=0.9)
        pi = rng.uniform(0.5e-5, 1.5e-5, 20)
        x = rng.integers(0, 2, 20)
        ex = contact_update_exact(pi, x, g, p)
        lin = contact_update_linearized(pi, x, g, p)
        diffs.append(np.abs(ex - lin).mean())
        below += int(np.any(lin < ex))
    mean = float(np.mean(diffs))
    ok = mean <= 1e-8 and below == 0
    record(2, "linearized update accuracy", ok, f"mean |exact - linearized| = {mean:.2e}, {below} states below exact")
    assert ok


OFFICE_GRID = {
    "name": "office-92",
    "seed": 0,
    "repetitions": 30,
    "graph": {"source": "random", "n": 92, "profile": "dense", "seed": 2013},
    "vaccination": {"fraction": 0.95, "seed": 2013},
    "params": {"false_negative": 0.2},
    "constraints": {"occupancy": [0.3, 0.7], "min_presence_days": 2, "test_capacity": 1},
    "grid": {
        "constraints.min_presence_days": [2, 3],
        "constraints.occupancy": [[0.3, 0.7], [0.4, 0.8]],
        "constraints.test_capacity": [1, 2, 3],
    },
}


@pytest.fixture(scope="module")
def office_grid():
    start = time.perf_counter()
    results = run_grid(OFFICE_GRID)
    elapsed = time.perf_counter() - start
    print("\n" + report(results))
    return results, elapsed


@pytest.mark.slow
def test_c3_model_ordering(office_grid):
    results, elapsed = office_grid
    failed = [r.cell for r in results if r.error]
    ordered = sum(r.error is None and r.mean("M1") < r.mean("M2") < r.mean("R") for r in results)
    ok = not failed and ordered == len(results) == 12 and elapsed <= 3600
    record(3, "M1 < M2 < R in every office cell", ok, f"{ordered}/12 cells ordered, {elapsed / 60:.1f} min")
    assert ok


@pytest.mark.slow
def test_c4_reduction_band(office_grid):
    results, _ = office_grid
    done = sum(r.error is None for r in results)
    red1 = aggregate_reduction(results, "M1")
    red2 = aggregate_reduction(results, "M2")
    ok = done == 12 and 0.25 <= red1 <= 0.70 and 0.10 <= red2 <= 0.40
    record(4, "aggregate reduction vs random", ok,
           f"M1 {red1:.1%} in [25%, 70%], M2 {red2:.1%} in [10%, 40%], over {done}/12 cells")
    assert ok


def test_c5_monotone_in_testing():
    g = two_section_graph()
    seeds = range(3)
    m1 = {}
    m2 = {}
    for fn in (0.1, 0.3):
        p = EpidemicParams(false_negative=fn)
        for tc in (1, 2, 3):
            cs = base_case_constraints(test_capacity=tc)
            m1[fn, tc] = [solve_model1(g, p, cs, GaConfig(seed=s)).risk for s in seeds]
        for pr in (0.2, 0.4, 0.6):
            m2[fn, pr] = [solve_model2(g, p, base_case_constraints(), pr, GaConfig(seed=s)).risk for s in seeds]
    bad = []
    for fn in (0.1, 0.3):
        for s in seeds:
            if not m1[fn, 1][s] >= m1[fn, 2][s] >= m1[fn, 3][s]:
                bad.append(f"M1 FN={fn} seed={s}")
            if not m2[fn, 0.2][s] >= m2[fn, 0.4][s] >= m2[fn, 0.6][s]:
                bad.append(f"M2 FN={fn} seed={s}")
    for tc in (1, 2, 3):
        for s in seeds:
            if not m1[0.1, tc][s] <= m1[0.3, tc][s]:
                bad.append(f"M1 FN order TC={tc} seed={s}")
    for pr in (0.2, 0.4, 0.6):
        for s in seeds:
            if not m2[0.1, pr][s] <= m2[0.3, pr][s]:
                bad.append(f"M2 FN order pr={pr} seed={s}")
    ok = not bad
    record(5, "risk monotone in tests and false negatives", ok, "all cells" if ok else ", ".join(bad))
    assert ok


def test_c6_base_case_structure():
    g = two_section_graph(seed=0)
    p = EpidemicParams(false_negative=0.2)
    cs = base_case_constraints()
    sols = []
    for s in range(3):
        sols.append(("M1", solve_model1(g, p, cs, GaConfig(seed=s))))
        sols.append(("M2", solve_model2(g, p, cs, 0.4, GaConfig(seed=s))))
        sols.append(("R", random_feasible(g, cs, GaConfig(seed=s))))
    problems = []
    for model, sol in sols:
        x = sol.schedule
        heads = [daily_headcount(x, d) for d in range(5)]
        if not all(10 <= h <= 15 for h in heads):
            problems.append(f"{model} headcount {heads}")
        if (x[:12].sum(axis=0) < 4).any() or (x[12:].sum(axis=0) < 3).any():
            problems.append(f"{model} section minimum")
        if (x.sum(axis=1) < 2).any():
            problems.append(f"{model} days on site")
        if model == "M1" and (sol.tests.sum(axis=1) > 2).any():
            problems.append("M1 test capacity")
        if not is_feasible(x, sol.tests if model == "M1" else None, cs):
            problems.append(f"{model} infeasible")
    ok = not problems
    record(6, "base-case schedules respect every rule", ok, f"{len(sols)} schedules" if ok else "; ".join(problems))
    assert ok


def test_c7_closure_and_fixed_points():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    cases = 0
    failures = []
    while cases < 10_000:
        n = int(rng.integers(1, 9))
        g = random_graph(rng, n, density=rng.random(), vaccinated=rng.random())
        p = EpidemicParams(beta_base=rng.random(), vaccine_efficacy=rng.random(), false_negative=rng.random())
        pi = rng.random(n) * rng.choice([1e-6, 1e-3, 1.0])
        x = rng.integers(0, 2, n)
        t = rng.integers(0, 2, n)
        outs = [
            apply_test_deterministic(pi, t, p.false_negative),
            apply_test_probabilistic(pi, rng.random(), p.false_negative),
            contact_update_exact(pi, x, g, p),
            contact_update_linearized(pi, x, g, p),
        ]
        if not all(np.all((o >= 0) & (o <= 1)) for o in outs):
            failures.append("closure")
        # no contacts and no tests leave every probability where it was
        empty = ContactGraph(np.zeros((n, n)), g.vaccinated)
        if not np.array_equal(contact_update_exact(pi, x, empty, p), pi):
            failures.append("fixed point (no contacts)")
        if not np.array_equal(contact_update_exact(pi, np.zeros(n), g, p), pi):
            failures.append("fixed point (nobody on site)")
        if not np.array_equal(apply_test_deterministic(pi, np.zeros(n), p.false_negative), pi):
            failures.append("fixed point (no tests)")
        cases += 1
    # feasibility dominance on evaluated chromosomes
    for seed in range(50):
        pr = tiny_instance(seed, n_range=(3, 9), days=(2, 6), cap=int(seed % 3))
        genes = np.random.default_rng(seed).integers(0, 2, (200, pr.gene_length)).astype(np.uint8)
        obj, viol = pr.evaluate(genes)
        fit = obj + viol
        if (viol == 0).any() and (viol > 0).any() and fit[viol == 0].max() > fit[viol > 0].min():
            failures.append(f"dominance seed {seed}")
        cases += len(genes)
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    record(7, "probability closure, fixed points, feasibility dominance", ok,
           f"{cases} cases, {len(failures)} failures, {elapsed:.0f}s")
    assert ok


def _fit_residual(xs, ts):
    slope, icpt = np.polyfit(xs, ts, 1)
    pred = slope * np.asarray(xs) + icpt
    return float(np.max(np.abs(np.asarray(ts) - pred) / pred)), slope


def test_c8_linear_scaling():
    g = assign_vaccination(gen_random_graph(40, "sparse", 8), 0.95, 8)
    pr = Problem(g, EpidemicParams(), base_case_constraints(n=40, section_sizes=(20, 20)))
    evolve(pr, GaConfig(population_size=10, max_generations=2))  # warm the kernels

    def timed(pop, gens):
        best = np.inf
        for _ in range(3):
            t0 = time.perf_counter()
            evolve(pr, GaConfig(population_size=pop, max_generations=gens, seed=1))
            best = min(best, time.perf_counter() - t0)
        return best

    sizes = [50, 100, 150, 200]
    t_pop = [timed(s, 100) for s in sizes]
    t_gen = [timed(100, s) for s in sizes]
    r_pop, s_pop = _fit_residual(sizes, t_pop)
    r_gen, s_gen = _fit_residual(sizes, t_gen)
    ok = r_pop <= 0.5 and r_gen <= 0.5 and s_pop > 0 and s_gen > 0
    record(8, "GA time linear in population and generations", ok,
           f"max residual {r_pop:.1%} (population), {r_gen:.1%} (generations)")
    assert ok
