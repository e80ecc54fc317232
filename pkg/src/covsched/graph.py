"""Employee contact networks.

A :class:`ContactGraph` holds a symmetric matrix of daily contact
probabilities between employees together with their vaccination flags.
Graphs can be read from an edge-list CSV, derived from a raw face-to-face
interaction log (SocioPatterns ``t i j`` format), or generated at random
with a sparse or dense profile.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PROFILES = {
    # (P[p=1], P[p=0.5]); the remainder is p=0
    "sparse": (0.05, 0.10),
    "dense": (0.10, 0.20),
}


class GraphError(ValueError):
    """Raised for malformed graph input."""


@dataclass(frozen=True)
class Employee:
    id: int
    vaccinated: bool = False


@dataclass(frozen=True, eq=False)
class ContactGraph:
    """Immutable weighted contact graph.

    ``weights[i, j]`` is the probability that employees ``i`` and ``j`` have
    close contact on a day both are on site.
    """

    weights: np.ndarray
    vaccinated: np.ndarray = None  # type: ignore[assignment]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise GraphError(f"weights must be square, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or w.min(initial=0.0) < 0 or w.max(initial=0.0) > 1:
            raise GraphError("contact probabilities must lie in [0, 1]")
        if not np.array_equal(w, w.T):
            raise GraphError("weights must be symmetric")
        if np.any(np.diag(w) != 0):
            raise GraphError("self-contacts are not allowed")
        n = w.shape[0]
        if self.vaccinated is None:
            vac = np.zeros(n, dtype=bool)
        else:
            vac = np.array(self.vaccinated, dtype=bool)
            if vac.shape != (n,):
                raise GraphError("vaccination flags must have one entry per employee")
        w.flags.writeable = False
        vac.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "vaccinated", vac)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def employees(self) -> list[Employee]:
        return [Employee(i, bool(v)) for i, v in enumerate(self.vaccinated)]

    def with_vaccination(self, flags) -> "ContactGraph":
        return ContactGraph(self.weights, flags, dict(self.meta))

    def edges(self) -> list[tuple[int, int, float]]:
        """Nonzero edges ``(i, j, p)`` with ``i < j``."""
        ii, jj = np.nonzero(np.triu(self.weights, 1))
        return [(int(i), int(j), float(self.weights[i, j])) for i, j in zip(ii, jj)]

    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR arrays ``(indptr, indices, data)`` of the nonzero weights."""
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indices = []
        data = []
        for i in range(self.n):
            nz = np.flatnonzero(self.weights[i])
            indices.append(nz)
            data.append(self.weights[i, nz])
            indptr[i + 1] = indptr[i] + nz.size
        return (
            indptr,
            np.concatenate(indices).astype(np.int64) if indices else np.zeros(0, np.int64),
            np.concatenate(data).astype(float) if data else np.zeros(0),
        )

    def permuted(self, perm: Sequence[int]) -> "ContactGraph":
        """Relabel so that new employee ``k`` is old employee ``perm[k]``."""
        perm = np.asarray(perm)
        return ContactGraph(self.weights[np.ix_(perm, perm)], self.vaccinated[perm], dict(self.meta))


@dataclass(frozen=True)
class RawInteractionLog:
    records: tuple[tuple[int, object, object], ...]
    observation_days: int | None = None

    def __post_init__(self):
        for t, a, b in self.records:
            if a == b:
                raise GraphError(f"interaction of {a!r} with itself at t={t}")


def _parse_float(text: str, lineno: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise GraphError(f"line {lineno}: cannot parse probability {text!r}") from None


def load_edge_list(path, n: int | None = None) -> ContactGraph:
    """Read ``i,j,p`` rows; missing pairs get probability 0.

    ``n`` defaults to one more than the largest index seen. A header row is
    allowed. Repeating a pair in either orientation is an error.
    """
    path = Path(path)
    rows: list[tuple[int, int, float]] = []
    first = True
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            row = [c.strip() for c in row]
            if not row or all(c == "" for c in row) or row[0].startswith("#"):
                continue
            if len(row) != 3:
                raise GraphError(f"line {lineno}: expected 3 fields, got {len(row)}")
            try:
                i, j = int(row[0]), int(row[1])
            except ValueError:
                if first and not any(c.lstrip("-").isdigit() for c in row[:2]):
                    first = False
                    continue  # header
                raise GraphError(f"line {lineno}: bad employee index") from None
            first = False
            p = _parse_float(row[2], lineno)
            if i < 0 or j < 0:
                raise GraphError(f"line {lineno}: negative employee index")
            if i == j:
                raise GraphError(f"line {lineno}: self-loop on employee {i}")
            if not 0.0 <= p <= 1.0:
                raise GraphError(f"line {lineno}: probability {p} outside [0, 1]")
            rows.append((i, j, p))

    size = max((max(i, j) for i, j, _ in rows), default=-1) + 1
    if n is None:
        n = size
    elif size > n:
        raise GraphError(f"edge list references employee {size - 1} but n={n}")
    w = np.zeros((n, n))
    seen: dict[tuple[int, int], float] = {}
    for i, j, p in rows:
        key = (min(i, j), max(i, j))
        if key in seen:
            if seen[key] != p:
                raise GraphError(f"conflicting probabilities for pair {key}: {seen[key]} vs {p}")
            raise GraphError(f"duplicate pair {key}")
        seen[key] = p
        w[i, j] = w[j, i] = p

    meta = _read_sidecar(path)
    vac = meta.get("vaccinated")
    if vac is not None and len(vac) != n:
        raise GraphError("sidecar vaccination flags do not match n")
    return ContactGraph(w, vac, meta)


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _read_sidecar(path: Path) -> dict:
    side = _sidecar_path(path)
    if side.exists():
        return json.loads(side.read_text())
    return {}


def save_edge_list(graph: ContactGraph, path, **meta) -> Path:
    """Write the edge-list CSV plus a ``<path>.meta.json`` sidecar."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "p"])
        for i, j, p in graph.edges():
            writer.writerow([i, j, repr(p)])
    sidecar = {**graph.meta, **meta, "n": graph.n, "vaccinated": [bool(v) for v in graph.vaccinated]}
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=2, default=str))
    return path


def read_interaction_log(path, observation_days: int | None = None) -> RawInteractionLog:
    """Parse a whitespace separated ``timestamp id_a id_b [...]`` file."""
    records = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) < 3:
                raise GraphError(f"line {lineno}: expected 'timestamp id_a id_b'")
            try:
                t = int(float(parts[0]))
            except ValueError:
                raise GraphError(f"line {lineno}: bad timestamp {parts[0]!r}") from None
            records.append((t, parts[1], parts[2]))
    return RawInteractionLog(tuple(records), observation_days)


def count_days(timestamps: Iterable[int]) -> int:
    """Number of distinct UTC calendar dates among ``timestamps``."""
    return len({datetime.fromtimestamp(t, tz=timezone.utc).date() for t in timestamps})


def build_from_interactions(log: RawInteractionLog) -> tuple[ContactGraph, dict]:
    """Turn an interaction log into contact probabilities.

    Returns the graph and the mapping from external id to dense index.
    With ``c_ij`` the average number of contacts per day and ``d_i`` the
    average per-colleague contact rate of ``i``, the probability is
    ``min(1, max(c_ij / d_i, c_ij / d_j))``.
    """
    if not log.records:
        raise GraphError("interaction log is empty")
    days = log.observation_days
    if days is None:
        days = count_days(t for t, _, _ in log.records)
    if days < 1:
        raise GraphError("observation_days must be at least 1")

    ids = sorted({a for _, a, _ in log.records} | {b for _, _, b in log.records}, key=_id_key)
    index = {ext: k for k, ext in enumerate(ids)}
    n = len(ids)

    pair_counts = Counter()
    for _, a, b in log.records:
        i, j = index[a], index[b]
        pair_counts[(min(i, j), max(i, j))] += 1

    c = np.zeros((n, n))
    for (i, j), k in pair_counts.items():
        c[i, j] = c[j, i] = k / days

    colleagues = np.count_nonzero(c, axis=1)
    d = np.zeros(n)
    has = colleagues > 0
    d[has] = c[has].sum(axis=1) / colleagues[has]

    w = np.zeros((n, n))
    for (i, j) in pair_counts:
        w[i, j] = w[j, i] = min(1.0, max(c[i, j] / d[i], c[i, j] / d[j]))

    meta = {"source": "interactions", "observation_days": days, "ids": [str(x) for x in ids]}
    return ContactGraph(w, None, meta), index


def _id_key(x):
    s = str(x)
    return (0, int(s), s) if s.lstrip("-").isdigit() else (1, 0, s)


def gen_random_graph(n: int, profile: str, seed: int) -> ContactGraph:
    """Random graph where each pair independently gets p in {1, 0.5, 0}."""
    if n < 2:
        raise GraphError("a random contact graph needs at least 2 employees")
    try:
        p_one, p_half = PROFILES[profile]
    except KeyError:
        raise GraphError(f"unknown profile {profile!r}; expected one of {sorted(PROFILES)}") from None
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    u = rng.random(iu[0].size)
    vals = np.where(u < p_one, 1.0, np.where(u < p_one + p_half, 0.5, 0.0))
    w = np.zeros((n, n))
    w[iu] = vals
    w = w + w.T
    return ContactGraph(w, None, {"source": "random", "profile": profile, "seed": seed, "n": n})


def assign_vaccination(graph: ContactGraph, fraction: float, seed: int) -> ContactGraph:
    """Flag exactly ``round(fraction * n)`` employees, chosen uniformly."""
    if not 0.0 <= fraction <= 1.0:
        raise GraphError(f"vaccination fraction {fraction} outside [0, 1]")
    k = int(math.floor(fraction * graph.n + 0.5))
    rng = np.random.default_rng(seed)
    flags = np.zeros(graph.n, dtype=bool)
    flags[rng.choice(graph.n, size=k, replace=False)] = True
    return ContactGraph(graph.weights, flags, {**graph.meta, "vaccination_fraction": fraction, "vaccination_seed": seed})


def two_section_graph(
    sizes: Sequence[int] = (12, 8),
    seed: int = 0,
    within: tuple[float, float] = (0.35, 0.15),
    between: tuple[float, float] = (0.05, 0.05),
    unvaccinated: Sequence[int] = (14,),
) -> ContactGraph:
    """Synthetic small organisation split into sections.

    Pairs inside a section connect with probability ``within[0]`` and pairs
    across sections with ``between[0]``; an edge weight is drawn uniformly
    from ``{0.1, 0.2, ..., 0.9}`` (the second tuple entry is the chance of a
    weight-1 edge instead). Everyone except ``unvaccinated`` is vaccinated.
    """
    n = int(sum(sizes))
    section = np.repeat(np.arange(len(sizes)), sizes)
    rng = np.random.default_rng(seed)
    w = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            p_edge, p_full = within if section[i] == section[j] else between
            if rng.random() < p_edge:
                w[i, j] = 1.0 if rng.random() < p_full else rng.integers(1, 10) / 10
    w = w + w.T
    flags = np.ones(n, dtype=bool)
    flags[list(unvaccinated)] = False
    meta = {"source": "two_section", "sizes": list(sizes), "seed": seed}
    return ContactGraph(w, flags, meta)


def sections(sizes: Sequence[int]) -> list[list[int]]:
    """Consecutive member lists for section sizes, e.g. (12, 8)."""
    out, start = [], 0
    for s in sizes:
        out.append(list(range(start, start + s)))
        start += s
    return out
