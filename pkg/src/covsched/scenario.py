"""Config-driven experiments: single scenarios, grids and result tables.

A scenario is a YAML mapping (see ``README.md`` for the full schema)::

    name: base-case
    seed: 0               # repetition i runs with seed + i
    repetitions: 30
    models: [R, M2, M1]
    graph: {source: random, n: 40, profile: sparse, seed: 7}
    vaccination: {fraction: 0.95, seed: 7}
    params: {false_negative: 0.3}
    constraints: {occupancy: [0.5, 0.75], min_presence_days: 3, test_capacity: 2}
    grid:
      constraints.test_capacity: [1, 2, 3]

Grid axes are dotted paths into the mapping; every combination of their
values is one cell.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import io
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .constraints import ConstraintSet, Group, build_occupancy_band, is_feasible, section_minimum
from .ga import GaConfig, InfeasibleError, Solution, random_feasible, solve_model1, solve_model2
from .graph import (
    ContactGraph,
    assign_vaccination,
    build_from_interactions,
    gen_random_graph,
    load_edge_list,
    read_interaction_log,
    sections,
    two_section_graph,
)
from .infection import EpidemicParams, risk

log = logging.getLogger(__name__)

MODEL_ORDER = ("R", "M2", "M1")
SCALE = 1e5


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


@dataclass
class ScenarioConfig:
    name: str
    graph: ContactGraph
    params: EpidemicParams
    constraints: ConstraintSet
    pr_test: float
    models: tuple[str, ...] = MODEL_ORDER
    ga: GaConfig = field(default_factory=GaConfig)
    repetitions: int = 30
    seed: int = 0
    mode: str = "exact"
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "ScenarioConfig":
        try:
            return _parse(data, base_dir or Path.cwd())
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError, OSError) as exc:
            raise ConfigError(f"{type(exc).__name__}: {exc}") from exc


def load_config(path) -> dict:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"bad YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    data.setdefault("_base_dir", str(path.parent))
    return data


_PARAM_KEYS = {
    "beta": "beta_base",
    "beta_base": "beta_base",
    "vaccine_efficacy": "vaccine_efficacy",
    "false_negative": "false_negative",
    "background_risk": "background_risk",
    "horizon": "horizon",
    "initial_risk": "initial_risk_policy",
    "initial_risk_policy": "initial_risk_policy",
}


def _build_graph(spec: dict, base_dir: Path) -> ContactGraph:
    source = spec.get("source", "random")
    if source == "random":
        return gen_random_graph(int(spec["n"]), spec.get("profile", "sparse"), int(spec.get("seed", 0)))
    if source == "edges":
        return load_edge_list(base_dir / spec["path"], spec.get("n"))
    if source == "interactions":
        logf = read_interaction_log(base_dir / spec["path"], spec.get("observation_days"))
        return build_from_interactions(logf)[0]
    if source == "two_section":
        kw = {k: spec[k] for k in ("sizes", "seed", "unvaccinated") if k in spec}
        return two_section_graph(**kw)
    raise ConfigError(f"unknown graph source {source!r}")


def _build_constraints(spec: dict, n: int) -> ConstraintSet:
    lower: list[Group] = []
    upper: list[Group] = []
    if "occupancy" in spec:
        lo, hi = spec["occupancy"]
        g_lo, g_hi = build_occupancy_band(n, float(lo), float(hi))
        lower.append(g_lo)
        upper.append(g_hi)
    sec = spec.get("sections")
    if sec:
        if isinstance(sec, dict):
            groups = [(m, sec.get("min_frac", 0.0)) for m in sections(sec["sizes"])]
        else:
            groups = []
            for item in sec:
                members = item["members"] if "members" in item else list(range(*item["range"]))
                groups.append((members, item.get("min_frac", 0.0)))
        for members, frac in groups:
            lower.append(section_minimum(members, float(frac)))
    for item in spec.get("lower_groups", []):
        lower.append(Group(item["members"], int(item["bound"])))
    for item in spec.get("upper_groups", []):
        upper.append(Group(item["members"], int(item["bound"])))
    return ConstraintSet(n, lower, upper, spec.get("min_presence_days", 0), spec.get("test_capacity"))


def _parse(data: dict, base_dir: Path) -> ScenarioConfig:
    data = {k: v for k, v in data.items() if k != "grid"}
    base_dir = Path(data.get("_base_dir", base_dir))
    graph = _build_graph(data.get("graph") or {}, base_dir)
    vac = data.get("vaccination")
    if vac is not None:
        if not isinstance(vac, dict):
            vac = {"fraction": vac}
        graph = assign_vaccination(graph, float(vac["fraction"]), int(vac.get("seed", 0)))

    pkw = {}
    for k, v in (data.get("params") or {}).items():
        if k not in _PARAM_KEYS:
            raise ConfigError(f"unknown parameter {k!r}")
        pkw[_PARAM_KEYS[k]] = v
    params = EpidemicParams(**pkw)

    cspec = dict(data.get("constraints") or {})
    cs = _build_constraints(cspec, graph.n)
    pr_test = cspec.get("pr_test")
    if pr_test is None:
        tc = cs.capacities()
        pr_test = 0.0 if tc is None else float(min(tc.mean() / params.horizon, 1.0))

    models = tuple(data.get("models", MODEL_ORDER))
    bad = set(models) - set(MODEL_ORDER)
    if bad:
        raise ConfigError(f"unknown models {sorted(bad)}")
    ga = GaConfig(**(data.get("ga") or {}))
    reps = int(data.get("repetitions", 30))
    if reps < 1:
        raise ConfigError("repetitions must be at least 1")
    mode = data.get("mode", "exact")
    if mode not in ("exact", "linearized"):
        raise ConfigError(f"unknown mode {mode!r}")
    return ScenarioConfig(
        name=str(data.get("name", "scenario")),
        graph=graph,
        params=params,
        constraints=cs,
        pr_test=float(pr_test),
        models=models,
        ga=ga,
        repetitions=reps,
        seed=int(data.get("seed", 0)),
        mode=mode,
        raw=data,
    )


@dataclass
class ModelRuns:
    risks: list[float]
    best: Solution

    @property
    def mean(self) -> float:
        return float(np.mean(self.risks))


@dataclass
class ScenarioResult:
    name: str
    cell: dict
    runs: dict[str, ModelRuns] = field(default_factory=dict)
    error: str | None = None

    def mean(self, model: str) -> float | None:
        r = self.runs.get(model)
        return None if r is None else r.mean

    def reduction(self, model: str, baseline: str = "R") -> float | None:
        """``1 - mean(model) / mean(baseline)``."""
        m, b = self.mean(model), self.mean(baseline)
        if m is None or b is None or b == 0:
            return None
        return 1.0 - m / b


def _one_run(cfg: ScenarioConfig, model: str, rep: int) -> Solution:
    ga = dataclasses.replace(cfg.ga, seed=cfg.seed + rep)
    g, p, cs = cfg.graph, cfg.params, cfg.constraints
    if model == "M1":
        return solve_model1(g, p, cs, ga, mode=cfg.mode)
    if model == "M2":
        return solve_model2(g, p, cs, cfg.pr_test, ga, mode=cfg.mode)
    # random feasible presence; tests taken at random with pr_test per day
    sol = random_feasible(g, cs, ga, "M2", params=p)
    sol.risk = risk(g, p, sol.schedule, pr_test=cfg.pr_test, mode=cfg.mode)
    return sol


def _job(args):
    cfg, model, rep = args
    return model, rep, _one_run(cfg, model, rep)


def run_scenario(config, jobs: int = 1, cell: dict | None = None) -> ScenarioResult:
    """Run every model ``repetitions`` times and average the risks.

    Raises :class:`InfeasibleError` when any run ends without a feasible
    schedule.
    """
    cfg = config if isinstance(config, ScenarioConfig) else ScenarioConfig.from_dict(config)
    work = [(cfg, m, r) for m in cfg.models for r in range(cfg.repetitions)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            done = list(pool.map(_job, work))
    else:
        done = [_job(w) for w in work]
    result = ScenarioResult(cfg.name, dict(cell or {}))
    for model in cfg.models:
        sols = sorted((rep, sol) for m, rep, sol in done if m == model)
        ordered = [s for _, s in sols]
        for s in ordered:
            tests = s.tests if model == "M1" else None
            if not is_feasible(s.schedule, tests, cfg.constraints):
                raise InfeasibleError(f"{model} returned an infeasible schedule", s)
        best = min(ordered, key=lambda s: s.risk)
        result.runs[model] = ModelRuns([s.risk for s in ordered], best)
        log.info("%s %s %s mean risk %.4g", cfg.name, cell or "", model, result.runs[model].mean)
    return result


def _set_path(d: dict, dotted: str, value):
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
        if not isinstance(cur, dict):
            raise ConfigError(f"grid axis {dotted!r} does not point into a mapping")
    cur[keys[-1]] = value


def grid_cells(data: dict) -> list[tuple[dict, dict]]:
    """Expand the ``grid`` section into ``(cell coordinates, config dict)`` pairs."""
    grid = data.get("grid")
    if not grid:
        raise ConfigError("config has no grid axes")
    axes = list(grid.items())
    for name, values in axes:
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid axis {name!r} must be a non-empty list")
    cells = []
    for combo in itertools.product(*(v for _, v in axes)):
        d = copy.deepcopy({k: v for k, v in data.items() if k != "grid"})
        coords = {}
        for (name, _), value in zip(axes, combo):
            _set_path(d, name, value)
            coords[name] = value
        cells.append((coords, d))
    return cells


def run_grid(data: dict, jobs: int = 1) -> list[ScenarioResult]:
    """Run every grid cell; failures are recorded on the cell, not raised."""
    results = []
    for coords, d in grid_cells(data):
        try:
            results.append(run_scenario(d, jobs=jobs, cell=coords))
        except (InfeasibleError, ConfigError) as exc:
            log.warning("cell %s failed: %s", coords, exc)
            results.append(ScenarioResult(str(d.get("name", "scenario")), coords, error=str(exc)))
    return results


def _fmt(v):
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def report_rows(results: list[ScenarioResult]) -> tuple[list[str], list[list[str]]]:
    axes: list[str] = []
    for r in results:
        for k in r.cell:
            if k not in axes:
                axes.append(k)
    header = [a.split(".")[-1] for a in axes] + ["R", "M2", "M1", "M2 vs R", "M1 vs R", "status"]
    rows = []
    for r in results:
        row = [_fmt(r.cell.get(a, "")) for a in axes]
        for m in MODEL_ORDER:
            v = r.mean(m)
            row.append("" if v is None else f"{v * SCALE:.2f}")
        for m in ("M2", "M1"):
            red = r.reduction(m)
            row.append("" if red is None else f"{red * 100:.0f}%")
        row.append("ok" if r.error is None else f"failed: {r.error}")
        rows.append(row)
    return header, rows


def report(results: list[ScenarioResult], fmt: str = "markdown", path=None) -> str:
    """Render a results table with risks scaled by 1e5.

    ``fmt`` is ``"csv"`` or ``"markdown"``; when ``path`` is given the text is
    also written there.
    """
    header, rows = report_rows(results)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        text = buf.getvalue()
    elif fmt == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def aggregate_reduction(results: list[ScenarioResult], model: str, baseline: str = "R") -> float:
    """``1 - mean over cells of mean(model) / same for baseline``."""
    ok = [r for r in results if r.error is None]
    m = np.mean([r.mean(model) for r in ok])
    b = np.mean([r.mean(baseline) for r in ok])
    return float(1.0 - m / b)
