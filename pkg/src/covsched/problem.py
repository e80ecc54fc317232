"""A scheduling instance compiled into flat arrays for the kernels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .constraints import ConstraintSet
from .graph import ContactGraph
from .infection import MODES, EpidemicParams, initial_risk

MODELS = ("M1", "M2")


def _groups_csr(groups):
    ptr = np.zeros(len(groups) + 1, dtype=np.int64)
    idx = []
    for k, g in enumerate(groups):
        idx.extend(g.members)
        ptr[k + 1] = len(idx)
    bounds = np.array([g.bound for g in groups], dtype=np.int64)
    return ptr, np.array(idx, dtype=np.int64), bounds


@dataclass(eq=False)
class Problem:
    """Graph, epidemic parameters, constraints and model choice.

    ``model`` is ``"M1"`` (presence and test plan are decided) or ``"M2"``
    (presence only, everyone tests with probability ``pr_test`` each day).
    """

    graph: ContactGraph
    params: EpidemicParams
    constraints: ConstraintSet
    model: str = "M1"
    pr_test: float = 0.0
    mode: str = "exact"
    _arrays: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.pr_test <= 1.0:
            raise ValueError("pr_test must be a probability")
        if self.constraints.n != self.graph.n:
            raise ValueError("constraint set and graph disagree on the number of employees")
        indptr, indices, data = self.graph.adjacency()
        beta = self.params.beta(self.graph.vaccinated)
        rows = np.repeat(np.arange(self.n), np.diff(indptr))
        lo = _groups_csr(self.constraints.lower_groups)
        up = _groups_csr(self.constraints.upper_groups)
        caps = self.constraints.capacities()
        self._arrays = dict(
            pi0=np.ascontiguousarray(initial_risk(self.graph, self.params).pi),
            indptr=indptr,
            indices=indices,
            wbeta=np.ascontiguousarray(data * beta[rows]),
            lo=lo,
            up=up,
            min_days=self.constraints.min_days(),
            caps=np.full(self.n, -1, dtype=np.int64) if caps is None else caps.astype(np.int64),
        )

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def horizon(self) -> int:
        return self.params.horizon

    @property
    def with_tests(self) -> bool:
        return self.model == "M1"

    @property
    def gene_length(self) -> int:
        nd = self.n * self.horizon
        return 2 * nd if self.with_tests else nd

    @property
    def blocks(self) -> list[tuple[int, int]]:
        """(start, length) of the presence block and, for M1, the test block."""
        nd = self.n * self.horizon
        return [(0, nd), (nd, nd)] if self.with_tests else [(0, nd)]

    def decode(self, genes) -> tuple[np.ndarray, np.ndarray | None]:
        genes = np.asarray(genes)
        if genes.shape != (self.gene_length,):
            raise ValueError(f"chromosome must have {self.gene_length} genes, got shape {genes.shape}")
        if not np.isin(genes, (0, 1)).all():
            raise ValueError("chromosome genes must be 0 or 1")
        nd = self.n * self.horizon
        x = genes[:nd].reshape(self.n, self.horizon).astype(np.uint8)
        t = genes[nd:].reshape(self.n, self.horizon).astype(np.uint8) if self.with_tests else None
        return x, t

    def encode(self, x, t=None) -> np.ndarray:
        parts = [np.asarray(x, dtype=np.uint8).reshape(-1)]
        if self.with_tests:
            if t is None:
                raise ValueError("Model 1 chromosomes need a test plan")
            parts.append(np.asarray(t, dtype=np.uint8).reshape(-1))
        genes = np.concatenate(parts)
        if genes.size != self.gene_length:
            raise ValueError("schedule dimensions do not match the problem")
        return genes

    def evaluate(self, genes, score_risk: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Mean risk and violation count for each row of a gene matrix."""
        genes = np.ascontiguousarray(genes, dtype=np.uint8)
        if genes.ndim != 2 or genes.shape[1] != self.gene_length:
            raise ValueError(f"expected a (P, {self.gene_length}) gene matrix, got {genes.shape}")
        a = self._arrays
        obj = np.empty(genes.shape[0])
        viol = np.empty(genes.shape[0], dtype=np.int64)
        _kernels.evaluate_population(
            genes, self.n, self.horizon, self.with_tests, score_risk,
            a["pi0"], self.params.false_negative, float(self.pr_test),
            a["indptr"], a["indices"], a["wbeta"], self.mode == "linearized",
            *a["lo"], *a["up"], a["min_days"], a["caps"],
            obj, viol,
        )
        return obj, viol

    def risk_of(self, x, t=None) -> float:
        """Reference (pure numpy) objective of a decoded solution."""
        from .infection import risk

        if self.with_tests:
            return risk(self.graph, self.params, x, t=t, mode=self.mode)
        return risk(self.graph, self.params, x, pr_test=self.pr_test, mode=self.mode)
