"""Command line entry point: ``covsched``.

Exit codes: 0 success, 1 no feasible schedule, 2 configuration error.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from .constraints import is_feasible
from .ga import InfeasibleError
from .graph import (
    GraphError,
    assign_vaccination,
    build_from_interactions,
    gen_random_graph,
    read_interaction_log,
    save_edge_list,
)
from .oracle import BudgetExceeded, NoFeasiblePoint, OracleBudget, enumerate_optimum
from .problem import Problem
from .scenario import (
    ConfigError,
    ScenarioConfig,
    grid_cells,
    load_config,
    report,
    run_grid,
    run_scenario,
)

EXIT_INFEASIBLE = 1
EXIT_CONFIG = 2


def _fail(msg: str, code: int):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _load(config, seed, mode, reps) -> dict:
    try:
        data = load_config(config)
    except ConfigError as exc:
        _fail(str(exc), EXIT_CONFIG)
    if seed is not None:
        data["seed"] = seed
    if mode is not None:
        data["mode"] = mode
    if reps is not None:
        data["repetitions"] = reps
    return data


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _schedule_text(sol) -> str:
    lines = []
    for i, row in enumerate(sol.schedule):
        cells = ["".join(map(str, row))]
        if sol.tests is not None:
            cells.append("".join(map(str, sol.tests[i])))
        lines.append(f"  e{i:<4d} " + "  ".join(cells))
    return "\n".join(lines)


common = [
    click.option("--config", "config", required=True, type=click.Path(dir_okay=False), help="Scenario YAML file."),
    click.option("--seed", type=int, default=None, help="Base seed (overrides the config)."),
    click.option("--mode", type=click.Choice(["exact", "linearized"]), default=None),
    click.option("--format", "fmt", type=click.Choice(["csv", "markdown"]), default="markdown"),
    click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write the table here."),
    click.option("--reps", type=int, default=None, help="Repetitions (overrides the config)."),
    click.option("--jobs", type=int, default=1, show_default=True, help="Worker processes."),
]


def with_common(f):
    for opt in reversed(common):
        f = opt(f)
    return f


@click.group()
@click.option("-v", "--verbose", count=True)
def main(verbose):
    """Presence and test scheduling that minimises infection risk."""
    logging.basicConfig(level=logging.WARNING - 10 * verbose, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@with_common
@click.option("--show-schedule", is_flag=True, help="Print the best schedule of each model.")
def solve(config, seed, mode, fmt, out, reps, jobs, show_schedule):
    """Run one scenario (every model, all repetitions)."""
    data = _load(config, seed, mode, reps)
    data.pop("grid", None)
    try:
        result = run_scenario(ScenarioConfig.from_dict(data), jobs=jobs)
    except ConfigError as exc:
        _fail(str(exc), EXIT_CONFIG)
    except InfeasibleError as exc:
        _fail(str(exc), EXIT_INFEASIBLE)
    _emit(report([result], fmt), out)
    if show_schedule:
        for model, runs in result.runs.items():
            click.echo(f"{model}: best risk {runs.best.risk:.4e} (presence{'; tests' if runs.best.tests is not None else ''})")
            click.echo(_schedule_text(runs.best))


@main.command()
@with_common
def grid(config, seed, mode, fmt, out, reps, jobs):
    """Run every cell of the config's ``grid`` section."""
    data = _load(config, seed, mode, reps)
    try:
        grid_cells(data)
        results = run_grid(data, jobs=jobs)
    except ConfigError as exc:
        _fail(str(exc), EXIT_CONFIG)
    _emit(report(results, fmt), out)
    if any(r.error for r in results):
        sys.exit(EXIT_INFEASIBLE)


@main.command()
@click.option("--config", "config", required=True, type=click.Path(dir_okay=False))
@click.option("--mode", type=click.Choice(["exact", "linearized"]), default=None)
@click.option("--model", type=click.Choice(["M1", "M2"]), default="M1", show_default=True)
@click.option("--max-states", type=int, default=OracleBudget().max_states, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write a JSON result here.")
def oracle(config, mode, model, max_states, out):
    """Exhaustively solve a tiny instance."""
    data = _load(config, None, mode, None)
    data.pop("grid", None)
    try:
        cfg = ScenarioConfig.from_dict(data)
        problem = Problem(cfg.graph, cfg.params, cfg.constraints, model, pr_test=cfg.pr_test, mode=cfg.mode)
    except (ConfigError, ValueError) as exc:
        _fail(str(exc), EXIT_CONFIG)
    try:
        res = enumerate_optimum(problem, OracleBudget(max_states))
    except NoFeasiblePoint as exc:
        _fail(str(exc), EXIT_INFEASIBLE)
    except BudgetExceeded as exc:
        _fail(str(exc), EXIT_CONFIG)
    assert is_feasible(res.schedule, res.tests, cfg.constraints)
    payload = {
        "model": model,
        "risk": res.risk,
        "states_visited": res.states_visited,
        "schedule": res.schedule.tolist(),
        "tests": None if res.tests is None else res.tests.tolist(),
    }
    text = json.dumps(payload, indent=2) + "\n"
    _emit(text, out)


@main.group()
def graph():
    """Create contact graphs."""


@graph.command("gen")
@click.option("--n", "n", type=int, required=True)
@click.option("--profile", type=click.Choice(["sparse", "dense"]), default="sparse", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--vaccinated", type=float, default=None, help="Fraction of vaccinated employees.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def graph_gen(n, profile, seed, vaccinated, out):
    """Random sparse/dense contact graph as an edge list."""
    try:
        g = gen_random_graph(n, profile, seed)
        if vaccinated is not None:
            g = assign_vaccination(g, vaccinated, seed)
    except GraphError as exc:
        _fail(str(exc), EXIT_CONFIG)
    save_edge_list(g, out)
    click.echo(f"wrote {out}: n={g.n}, {len(g.edges())} edges")


@graph.command("ingest")
@click.option("--log", "log_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--days", type=int, default=None, help="Observation days (default: distinct dates).")
@click.option("--vaccinated", type=float, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def graph_ingest(log_path, days, vaccinated, seed, out):
    """Contact probabilities from a ``t i j`` interaction log."""
    try:
        g, index = build_from_interactions(read_interaction_log(log_path, days))
        if vaccinated is not None:
            g = assign_vaccination(g, vaccinated, seed)
    except GraphError as exc:
        _fail(str(exc), EXIT_CONFIG)
    save_edge_list(g, out, id_map={str(k): v for k, v in index.items()})
    click.echo(f"wrote {out}: n={g.n}, {len(g.edges())} edges, mean p={np.mean([p for *_, p in g.edges()] or [0]):.3f}")


if __name__ == "__main__":
    main()
