"""Canonical genetic algorithm with penalty fitness.

Chromosomes are the flattened binary decision matrices (presence, then the
test plan for Model 1). Fitness is the mean infection risk plus the number
of violated constraint instances, so any feasible chromosome beats any
infeasible one. Survivor selection is elitist: the best ``population_size``
of parents and children move on.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .constraints import ConstraintSet
from .graph import ContactGraph
from .infection import EpidemicParams
from .problem import Problem

log = logging.getLogger(__name__)


class InfeasibleError(RuntimeError):
    """No zero-penalty chromosome was found."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass
class Chromosome:
    genes: np.ndarray
    fitness: float | None = None

    def __len__(self):
        return len(self.genes)


@dataclass(frozen=True)
class GaConfig:
    population_size: int | None = None
    max_generations: int | None = None
    mutation_prob: float | None = None
    tournament_size: int = 2
    crossover_prob: float = 0.9
    seed: int = 0
    restarts: int = 2

    def resolved(self, n: int) -> "GaConfig":
        """Fill unset sizes with the defaults for ``n`` employees."""
        cfg = GaConfig(
            population_size=100 + 2 * n if self.population_size is None else self.population_size,
            max_generations=200 + 2 * n if self.max_generations is None else self.max_generations,
            mutation_prob=1.0 / n if self.mutation_prob is None else self.mutation_prob,
            tournament_size=self.tournament_size,
            crossover_prob=self.crossover_prob,
            seed=self.seed,
            restarts=self.restarts,
        )
        if cfg.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if cfg.max_generations < 0:
            raise ValueError("max_generations must be nonnegative")
        if cfg.tournament_size < 1:
            raise ValueError("tournament_size must be at least 1")
        if cfg.restarts < 0:
            raise ValueError("restarts must be nonnegative")
        for name in ("mutation_prob", "crossover_prob"):
            v = getattr(cfg, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")
        return cfg


@dataclass
class GaResult:
    best: Chromosome
    objective: float
    violations: int
    history: list[float]
    generations: int
    evaluations: int


@dataclass
class Solution:
    """Decoded schedule with its risk; ``tests`` is None for Model 2."""

    schedule: np.ndarray
    tests: np.ndarray | None
    risk: float
    violations: int
    history: list[float] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.violations == 0


def fitness(chrom, problem: Problem) -> float:
    """Mean risk plus violation count of one chromosome (lower is better)."""
    genes = chrom.genes if isinstance(chrom, Chromosome) else np.asarray(chrom)
    problem.decode(genes)  # shape and alphabet check
    obj, viol = problem.evaluate(genes[None, :])
    value = float(obj[0] + viol[0])
    if isinstance(chrom, Chromosome):
        chrom.fitness = value
    return value


def tournament_select(pop: Sequence[Chromosome], k: int, rng: np.random.Generator) -> Chromosome:
    """Best of ``k`` members drawn uniformly with replacement."""
    if len(pop) == 0:
        raise ValueError("empty population")
    idx = rng.integers(0, len(pop), size=k)
    fit = np.array([pop[i].fitness for i in idx], dtype=float)
    return pop[int(idx[np.argmin(fit)])]


def random_population(size: int, blocks, rng) -> np.ndarray:
    """Uniform random presence bits; test bits at a random density.

    Swap mutation never changes how many ones a block holds. Test plans are
    usually capped far below half the days, so each chromosome draws its own
    test density in [0, 1] to give crossover a spread of test counts.
    """
    length = sum(b for _, b in blocks)
    pop = rng.integers(0, 2, size=(size, length), dtype=np.uint8)
    for start, blen in blocks[1:]:
        density = rng.random((size, 1))
        pop[:, start:start + blen] = rng.random((size, blen)) < density
    return pop


def _tournament_indices(fit: np.ndarray, k: int, count: int, rng) -> np.ndarray:
    draws = rng.integers(0, fit.size, size=(count, k))
    return draws[np.arange(count), np.argmin(fit[draws], axis=1)]


def single_point_crossover(a, b, rng, crossover_prob: float = 1.0, cut: int | None = None):
    """Swap suffixes after a cut drawn uniformly from ``1..len-1``.

    With probability ``1 - crossover_prob`` the children are plain copies.
    """
    ga = a.genes if isinstance(a, Chromosome) else np.asarray(a)
    gb = b.genes if isinstance(b, Chromosome) else np.asarray(b)
    if ga.shape != gb.shape:
        raise ValueError(f"parents differ in length: {ga.shape} vs {gb.shape}")
    c1, c2 = ga.copy(), gb.copy()
    L = ga.size
    if L >= 2 and rng.random() < crossover_prob:
        if cut is None:
            cut = int(rng.integers(1, L))
        c1[cut:], c2[cut:] = gb[cut:], ga[cut:]
    if isinstance(a, Chromosome):
        return Chromosome(c1), Chromosome(c2)
    return c1, c2


def swap_mutation(chrom, mutation_prob: float, rng, blocks: Sequence[tuple[int, int]] | None = None):
    """Each gene, with probability ``mutation_prob``, trades places with a
    random gene of the same block. Returns a new chromosome.
    """
    genes = chrom.genes if isinstance(chrom, Chromosome) else np.asarray(chrom)
    out = genes.copy()[None, :]
    _mutate_rows(out, mutation_prob, rng, blocks or [(0, genes.size)])
    return Chromosome(out[0]) if isinstance(chrom, Chromosome) else out[0]


def _mutate_rows(genes: np.ndarray, prob: float, rng, blocks) -> None:
    if prob <= 0 or genes.size == 0:
        return
    block_len = blocks[0][1]
    if any(length != block_len for _, length in blocks):
        raise ValueError("mutation blocks must have equal length")
    triggers = rng.random(genes.shape) < prob
    partners = rng.integers(0, block_len, size=int(triggers.sum()))
    starts = np.array([s for s, _ in blocks], dtype=np.int64)
    _kernels.swap_mutate(genes, triggers, partners, starts, block_len)


def _crossover_rows(parents_a, parents_b, prob, rng):
    P, L = parents_a.shape
    c1 = parents_a.copy()
    c2 = parents_b.copy()
    if L < 2:
        return c1, c2
    do = rng.random(P) < prob
    cuts = rng.integers(1, L, size=P)
    mask = (np.arange(L)[None, :] >= cuts[:, None]) & do[:, None]
    c1[mask] = parents_b[mask]
    c2[mask] = parents_a[mask]
    return c1, c2


def evolve(problem: Problem, config: GaConfig, initial=None, feasibility_only: bool = False,
           stop_when_feasible: bool = False) -> GaResult:
    """Run the GA and return the best chromosome and per-generation history.

    ``history[g]`` is the best fitness after generation ``g`` (entry 0 is the
    initial population). With ``feasibility_only`` the fitness is the
    violation count alone; ``stop_when_feasible`` returns the first
    zero-penalty chromosome met.
    """
    cfg = config.resolved(problem.n)
    rng = np.random.default_rng(cfg.seed)
    P, L = cfg.population_size, problem.gene_length
    if initial is None:
        pop = random_population(P, problem.blocks, rng)
    else:
        pop = np.ascontiguousarray(initial, dtype=np.uint8)
        if pop.ndim != 2 or pop.shape[1] != L:
            raise ValueError(f"initial population must be (P, {L})")
        P = pop.shape[0]

    def score(genes):
        obj, viol = problem.evaluate(genes, score_risk=not feasibility_only)
        return obj + viol, obj, viol

    fit, obj, viol = score(pop)
    evaluations = P
    history = [float(fit.min())]
    if stop_when_feasible and (viol == 0).any():
        k = int(np.flatnonzero(viol == 0)[0])
        return _result(pop, fit, obj, viol, k, history, 0, evaluations)

    n_pairs = (P + 1) // 2
    gen = 0
    for gen in range(1, cfg.max_generations + 1):
        sel = _tournament_indices(fit, cfg.tournament_size, 2 * n_pairs, rng)
        c1, c2 = _crossover_rows(pop[sel[0::2]], pop[sel[1::2]], cfg.crossover_prob, rng)
        children = np.ascontiguousarray(np.concatenate([c1, c2])[:P])
        _mutate_rows(children, cfg.mutation_prob, rng, problem.blocks)
        cfit, cobj, cviol = score(children)
        evaluations += children.shape[0]
        if stop_when_feasible and (cviol == 0).any():
            k = int(np.flatnonzero(cviol == 0)[0])
            history.append(min(history[-1], float(cfit.min())))
            return _result(children, cfit, cobj, cviol, k, history, gen, evaluations)
        # children first: on equal fitness offspring win, so the search can
        # drift across plateaus of the integer penalty
        allg = np.concatenate([children, pop])
        allf = np.concatenate([cfit, fit])
        keep = np.argsort(allf, kind="stable")[:P]
        pop = allg[keep]
        fit = allf[keep]
        obj = np.concatenate([cobj, obj])[keep]
        viol = np.concatenate([cviol, viol])[keep]
        history.append(float(fit[0]))
    best = int(np.argmin(fit))
    if stop_when_feasible:
        gen = cfg.max_generations
    return _result(pop, fit, obj, viol, best, history, gen, evaluations)


def _result(pop, fit, obj, viol, k, history, gen, evaluations) -> GaResult:
    return GaResult(
        best=Chromosome(pop[k].copy(), float(fit[k])),
        objective=float(obj[k]),
        violations=int(viol[k]),
        history=history,
        generations=gen,
        evaluations=evaluations,
    )


def _attempt_seeds(config: GaConfig):
    """Seed of the first run, then one derived seed per restart."""
    yield config.seed
    for r in range(1, config.restarts + 1):
        yield int(np.random.SeedSequence([config.seed, r]).generate_state(1)[0])


def _solve(problem: Problem, config: GaConfig, what: str, **kw) -> Solution:
    """Run the GA; if it ends without a feasible chromosome, restart afresh.

    Swap mutation keeps the number of ones fixed, so a converged population
    can sit one violation away from feasibility with no way across. A new
    random population almost always avoids the same trap.
    """
    sol = None
    for attempt, seed in enumerate(_attempt_seeds(config)):
        res = evolve(problem, dataclasses.replace(config, seed=seed), **kw)
        x, t = problem.decode(res.best.genes)
        sol = Solution(x, t, problem.risk_of(x, t), res.violations, res.history)
        if sol.feasible:
            if attempt:
                log.info("%s: feasible after %d restart(s)", what, attempt)
            return sol
        log.info("%s: %d violation(s) left with seed %d", what, res.violations, seed)
    raise InfeasibleError(
        f"{what}: best chromosome still violates {sol.violations} constraint(s) "
        f"after {config.restarts + 1} run(s)",
        sol,
    )


def solve_model1(graph: ContactGraph, params: EpidemicParams, cs: ConstraintSet,
                 config: GaConfig = GaConfig(), mode: str = "exact") -> Solution:
    """Presence and test plan minimising mean risk."""
    problem = Problem(graph, params, cs, "M1", mode=mode)
    return _solve(problem, config, "Model 1")


def solve_model2(graph: ContactGraph, params: EpidemicParams, cs: ConstraintSet, pr_test: float,
                 config: GaConfig = GaConfig(), mode: str = "exact") -> Solution:
    """Presence plan minimising mean risk when everyone tests at random."""
    problem = Problem(graph, params, cs, "M2", pr_test=pr_test, mode=mode)
    return _solve(problem, config, "Model 2")


def random_feasible(graph: ContactGraph, cs: ConstraintSet, config: GaConfig = GaConfig(),
                    model: str = "M2", params: EpidemicParams | None = None) -> Solution:
    """First zero-penalty chromosome found by a violation-only GA.

    The returned ``risk`` is evaluated under ``params`` with no tests for
    Model 2 and with the sampled test plan for Model 1; callers wanting a
    different testing assumption re-evaluate the schedule themselves.
    """
    params = params or EpidemicParams()
    problem = Problem(graph, params, cs, model)
    return _solve(problem, config, "random feasible search", feasibility_only=True, stop_when_feasible=True)
