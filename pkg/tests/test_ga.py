import numpy as np
import pytest

from covsched.constraints import ConstraintSet, Group, base_case_constraints, is_feasible
from covsched.ga import (
    Chromosome,
    GaConfig,
    InfeasibleError,
    evolve,
    fitness,
    random_feasible,
    single_point_crossover,
    solve_model1,
    solve_model2,
    swap_mutation,
    tournament_select,
)
from covsched.graph import ContactGraph, two_section_graph
from covsched.infection import EpidemicParams, risk
from covsched.problem import Problem
from tests.conftest import tiny_instance


class TestConfig:
    def test_defaults_scale_with_n(self):
        cfg = GaConfig().resolved(20)
        assert (cfg.population_size, cfg.max_generations, cfg.mutation_prob) == (140, 240, 0.05)

    def test_explicit_values_kept(self):
        cfg = GaConfig(population_size=10, max_generations=3, mutation_prob=0.2).resolved(50)
        assert (cfg.population_size, cfg.max_generations, cfg.mutation_prob) == (10, 3, 0.2)

    @pytest.mark.parametrize(
        "kw", [{"population_size": 1}, {"mutation_prob": 1.5}, {"crossover_prob": -0.1}, {"restarts": -1}]
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            GaConfig(**kw).resolved(5)


class TestOperators:
    def test_crossover_swaps_suffix(self):
        a = np.zeros(6, dtype=np.uint8)
        b = np.ones(6, dtype=np.uint8)
        c1, c2 = single_point_crossover(a, b, np.random.default_rng(0), cut=2)
        np.testing.assert_array_equal(c1, [0, 0, 1, 1, 1, 1])
        np.testing.assert_array_equal(c2, [1, 1, 0, 0, 0, 0])

    def test_crossover_cut_never_trivial(self):
        rng = np.random.default_rng(1)
        a = np.zeros(5, dtype=np.uint8)
        b = np.ones(5, dtype=np.uint8)
        for _ in range(200):
            c1, _ = single_point_crossover(a, b, rng)
            assert 0 < c1.sum() < 5 and c1[0] == 0 and c1[-1] == 1

    def test_crossover_probability_zero_copies(self):
        a = Chromosome(np.zeros(4, dtype=np.uint8))
        b = Chromosome(np.ones(4, dtype=np.uint8))
        c1, c2 = single_point_crossover(a, b, np.random.default_rng(0), crossover_prob=0.0)
        np.testing.assert_array_equal(c1.genes, a.genes)
        np.testing.assert_array_equal(c2.genes, b.genes)

    def test_crossover_length_mismatch(self):
        with pytest.raises(ValueError):
            single_point_crossover(np.zeros(3), np.zeros(4), np.random.default_rng(0))

    def test_swap_mutation_preserves_block_counts(self):
        rng = np.random.default_rng(2)
        g = rng.integers(0, 2, 40).astype(np.uint8)
        for _ in range(50):
            m = swap_mutation(g, 0.3, rng, blocks=[(0, 20), (20, 20)])
            assert m[:20].sum() == g[:20].sum() and m[20:].sum() == g[20:].sum()

    def test_swap_mutation_zero_probability(self):
        g = np.array([1, 0, 1, 1, 0], dtype=np.uint8)
        np.testing.assert_array_equal(swap_mutation(g, 0.0, np.random.default_rng(0)), g)

    def test_tournament_picks_best_of_draw(self):
        pop = [Chromosome(np.zeros(1), f) for f in (5.0, 1.0, 3.0)]
        rng = np.random.default_rng(0)
        picks = [tournament_select(pop, 3, rng).fitness for _ in range(300)]
        # the best member is missed only when it is never drawn
        assert np.mean(np.array(picks) == 1.0) == pytest.approx(1 - (2 / 3) ** 3, abs=0.07)
        assert tournament_select(pop, 50, rng).fitness == 1.0
        with pytest.raises(ValueError):
            tournament_select([], 2, rng)


class TestFitness:
    def test_hand_instance(self):
        # two employees in contact, two days, everyone present, tests on day 0 for e0
        g = ContactGraph(np.array([[0, 1.0], [1.0, 0]]), [False, False])
        p = EpidemicParams(horizon=2)
        cs = ConstraintSet(2, [Group((0, 1), 1)], [Group((0, 1), 1)], 0, 1)
        pr = Problem(g, p, cs)
        x = np.ones((2, 2))
        t = np.array([[1, 0], [0, 0]])
        pi0 = 1 - (1 - p.background_risk) ** 2
        a = np.array([pi0 * 0.2, pi0])
        d1 = 1 - (1 - a) * (1 - 0.1 * a[::-1])
        d2 = 1 - (1 - d1) * (1 - 0.1 * d1[::-1])
        expected_risk = (d1.sum() + d2.sum()) / 4
        # two person-days above the headcount bound of 1
        assert fitness(pr.encode(x, t), pr) == pytest.approx(expected_risk + 2, rel=1e-12)
        chrom = Chromosome(pr.encode(x, t))
        fitness(chrom, pr)
        assert chrom.fitness == pytest.approx(expected_risk + 2, rel=1e-12)

    def test_feasible_dominates_infeasible(self):
        pr = Problem(two_section_graph(), EpidemicParams(beta_base=1.0, background_risk=1.0),
                     base_case_constraints())
        rng = np.random.default_rng(3)
        genes = rng.integers(0, 2, (400, pr.gene_length)).astype(np.uint8)
        obj, viol = pr.evaluate(genes)
        fit = obj + viol
        # a feasible fitness is a mean probability, at most 1
        assert (viol > 0).any()
        assert obj.max() <= 1.0 <= fit[viol > 0].min()


class TestEvolve:
    def test_deterministic(self):
        pr = tiny_instance(4)
        a = evolve(pr, GaConfig(seed=7, max_generations=30))
        b = evolve(pr, GaConfig(seed=7, max_generations=30))
        np.testing.assert_array_equal(a.best.genes, b.best.genes)
        assert a.history == b.history

    def test_history_non_increasing(self):
        pr = Problem(two_section_graph(), EpidemicParams(), base_case_constraints())
        res = evolve(pr, GaConfig(seed=1, max_generations=60))
        assert len(res.history) == 61
        assert all(b <= a for a, b in zip(res.history, res.history[1:]))
        assert res.best.fitness == res.history[-1]

    def test_zero_generations_returns_best_initial(self):
        pr = tiny_instance(2)
        rng = np.random.default_rng(0)
        init = rng.integers(0, 2, (12, pr.gene_length)).astype(np.uint8)
        res = evolve(pr, GaConfig(max_generations=0), initial=init)
        obj, viol = pr.evaluate(init)
        assert res.best.fitness == pytest.approx((obj + viol).min())
        assert res.evaluations == 12

    def test_initial_shape_checked(self):
        pr = tiny_instance(2)
        with pytest.raises(ValueError):
            evolve(pr, GaConfig(), initial=np.zeros((4, 3)))


class TestSolvers:
    def test_base_case_models(self):
        g = two_section_graph()
        p = EpidemicParams()
        cs = base_case_constraints()
        cfg = GaConfig(seed=0, max_generations=120)
        m1 = solve_model1(g, p, cs, cfg)
        m2 = solve_model2(g, p, cs, 0.4, cfg)
        assert is_feasible(m1.schedule, m1.tests, cs) and is_feasible(m2.schedule, None, cs)
        assert m1.risk == pytest.approx(risk(g, p, m1.schedule, t=m1.tests), rel=1e-12)
        assert m2.risk == pytest.approx(risk(g, p, m2.schedule, pr_test=0.4), rel=1e-12)
        assert m2.tests is None

    def test_random_feasible_unconstrained_is_immediate(self):
        g = two_section_graph()
        sol = random_feasible(g, ConstraintSet(20), GaConfig(seed=3))
        assert sol.feasible and len(sol.history) == 1

    def test_random_feasible_base_case(self):
        cs = base_case_constraints()
        sol = random_feasible(two_section_graph(), cs, GaConfig(seed=4))
        heads = sol.schedule.sum(axis=0)
        assert ((heads >= 10) & (heads <= 15)).all()
        assert is_feasible(sol.schedule, None, cs)

    def test_restarts_use_fresh_deterministic_seeds(self, monkeypatch):
        import covsched.ga as ga_mod

        seeds = []
        real = ga_mod.evolve

        def spy(problem, config, **kw):
            seeds.append(config.seed)
            return real(problem, config, **kw)

        monkeypatch.setattr(ga_mod, "evolve", spy)
        cs = ConstraintSet(4, [Group((0, 1, 2), 3)], [Group((0, 1, 2), 2)])
        g = ContactGraph(np.zeros((4, 4)))
        for _ in range(2):
            with pytest.raises(InfeasibleError):
                solve_model2(g, EpidemicParams(), cs, 0.2, GaConfig(seed=5, max_generations=2, restarts=3))
        assert len(seeds) == 8 and seeds[0] == 5
        assert seeds[:4] == seeds[4:] and len(set(seeds[:4])) == 4

    def test_feasible_first_run_does_not_restart(self, monkeypatch):
        import covsched.ga as ga_mod

        calls = []
        real = ga_mod.evolve
        monkeypatch.setattr(ga_mod, "evolve", lambda *a, **kw: calls.append(1) or real(*a, **kw))
        solve_model2(two_section_graph(), EpidemicParams(), ConstraintSet(20), 0.4, GaConfig(max_generations=3))
        assert len(calls) == 1

    def test_contradictory_bounds_report(self):
        cs = ConstraintSet(4, [Group((0, 1, 2), 3)], [Group((0, 1, 2), 2)])
        g = ContactGraph(np.zeros((4, 4)))
        with pytest.raises(InfeasibleError) as err:
            random_feasible(g, cs, GaConfig(seed=0, max_generations=5))
        assert err.value.result is not None and err.value.result.violations > 0
