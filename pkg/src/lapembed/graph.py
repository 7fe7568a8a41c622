"""Weighted graphs over augmented views: degrees, volumes, Laplacians,
random walks, and cut objectives.

Dense storage throughout; intended scale is n <= 2000 vertices. Vertices with
zero degree are rejected at construction because the random-walk matrix
D^-1 S is undefined for them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GraphError(ValueError):
    """Invalid graph construction or query."""


@dataclass(frozen=True)
class WeightedGraph:
    """Symmetric nonnegative similarity matrix with cached vertex degrees."""

    similarity: np.ndarray
    degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        s = np.asarray(self.similarity, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise GraphError(f"similarity must be square, got shape {s.shape}")
        if not np.isfinite(s).all():
            raise GraphError("similarity contains non-finite entries")
        if not np.array_equal(s, s.T):
            raise GraphError("similarity must be symmetric")
        if (s < 0).any():
            raise GraphError("similarity entries must be nonnegative")
        s = s.copy()
        s.flags.writeable = False
        object.__setattr__(self, "similarity", s)
        deg = s.sum(axis=1)
        if (deg <= 0).any():
            bad = int(np.argmin(deg))
            raise GraphError(f"vertex {bad} is isolated (degree 0)")
        deg.flags.writeable = False
        object.__setattr__(self, "degrees", deg)

    @property
    def n(self) -> int:
        return self.similarity.shape[0]

    def degree_matrix(self) -> np.ndarray:
        return np.diag(self.degrees)

    def laplacian(self) -> np.ndarray:
        """Unnormalized Laplacian D - S."""
        return np.diag(self.degrees) - self.similarity


@dataclass(frozen=True)
class Partition:
    """Assignment of vertices to k disjoint, nonempty clusters."""

    assignment: np.ndarray
    k: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=int)
        if a.ndim != 1:
            raise GraphError("assignment must be a 1-D vector")
        if self.k < 1:
            raise GraphError("k must be >= 1")
        present = np.unique(a)
        if present.min() < 0 or present.max() >= self.k:
            raise GraphError(f"cluster ids must lie in 0..{self.k - 1}")
        if len(present) != self.k:
            missing = sorted(set(range(self.k)) - set(present.tolist()))
            raise GraphError(f"empty clusters: {missing}")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "assignment", a)

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == cluster)


def build_augmentation_graph(views, same_source_weight: float = 1.0) -> WeightedGraph:
    """Graph over augmented views: unit-structure edges between views that
    share a source sample, weight 0 between unrelated views.

    ``views`` is a sequence of (source_id, vector) pairs; only the source ids
    matter for the edge structure. A source with a single view would be an
    isolated vertex and is rejected.
    """
    views = list(views)
    if len(views) < 2:
        raise GraphError("need at least 2 views")
    if same_source_weight <= 0:
        raise GraphError("same_source_weight must be > 0")
    sources = [src for src, _ in views]
    if len(set(sources)) < 2:
        raise GraphError("need at least 2 distinct source ids")
    counts = {}
    for src in sources:
        counts[src] = counts.get(src, 0) + 1
    singles = [src for src, c in counts.items() if c == 1]
    if singles:
        raise GraphError(f"source {singles[0]!r} has a single view (isolated vertex)")
    n = len(views)
    s = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if sources[i] == sources[j]:
                s[i, j] = s[j, i] = same_source_weight
    return WeightedGraph(s)


def build_kernel_graph(points, bandwidth: float) -> WeightedGraph:
    """Dense Gaussian-kernel similarity graph with zero diagonal.

    s_ij = exp(-||x_i - x_j||^2 / (2 bandwidth^2)) for i != j.
    """
    if bandwidth <= 0:
        raise GraphError("bandwidth must be > 0")
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise GraphError("need at least 2 points")
    if not np.isfinite(x).all():
        raise GraphError("points contain non-finite coordinates")
    sq = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
    s = np.exp(-sq / (2.0 * bandwidth**2))
    np.fill_diagonal(s, 0.0)
    s = np.minimum(s, s.T)  # guard against asymmetric rounding
    return WeightedGraph(s)


def median_bandwidth(points, neighbor: int = 7) -> float:
    """Median distance to the ``neighbor``-th nearest neighbour.

    A width at the scale of local neighbour gaps keeps the kernel graph
    sparse enough that separate manifolds stay weakly connected, which the
    global median pairwise distance does not (it spans cluster gaps and
    washes out the cut structure).  The seventh neighbour is the usual
    local-scaling default.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if neighbor < 1:
        raise GraphError("neighbor index must be >= 1")
    if n < neighbor + 1:
        raise GraphError("bandwidth needs more points than the neighbor index")
    sq = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(sq, np.inf)
    kth = np.sort(sq, axis=1)[:, neighbor - 1]
    return float(np.median(np.sqrt(kth)))


def _as_index_set(g: WeightedGraph, subset) -> np.ndarray:
    idx = np.asarray(sorted(set(int(i) for i in subset)), dtype=int)
    if idx.size == 0:
        raise GraphError("subset must be nonempty")
    if idx.min() < 0 or idx.max() >= g.n:
        raise GraphError("subset contains out-of-range vertex indices")
    return idx


def volume(g: WeightedGraph, subset) -> float:
    """Sum of degrees over a nonempty vertex subset."""
    idx = _as_index_set(g, subset)
    return float(g.degrees[idx].sum())


def random_walk_matrix(g: WeightedGraph) -> np.ndarray:
    """Row-stochastic transition matrix P = D^-1 S."""
    return g.similarity / g.degrees[:, None]


def stationary_distribution(g: WeightedGraph) -> np.ndarray:
    """Stationary distribution of the vertex random walk: d_i / Vol."""
    return g.degrees / g.degrees.sum()


def subset_transition_probability(g: WeightedGraph, from_set, to_set) -> float:
    """One-step probability of moving into ``to_set`` given a start in
    ``from_set`` (start drawn from the stationary distribution restricted to
    ``from_set``). The two sets must be disjoint.
    """
    a = _as_index_set(g, from_set)
    b = _as_index_set(g, to_set)
    if np.intersect1d(a, b).size:
        raise GraphError("from/to sets must be disjoint")
    cross = g.similarity[np.ix_(a, b)].sum()
    return float(cross / g.degrees[a].sum())


def indicator_matrix(g: WeightedGraph, p: Partition) -> np.ndarray:
    """Volume-scaled cluster membership matrix Z with Z^T D Z = I."""
    if p.assignment.shape[0] != g.n:
        raise GraphError("partition size does not match graph")
    z = np.zeros((g.n, p.k))
    for k in range(p.k):
        members = p.members(k)
        vol = g.degrees[members].sum()
        z[members, k] = 1.0 / np.sqrt(vol)
    return z


def partition_cut_objective(g: WeightedGraph, p: Partition) -> float:
    """Tr(Z^T L Z) for the partition's indicator matrix.

    Equals the sum over clusters of the probability of leaving the cluster
    in one random-walk step.
    """
    z = indicator_matrix(g, p)
    return float(np.trace(z.T @ g.laplacian() @ z))


def load_edge_csv(path) -> WeightedGraph:
    """Read a graph from "i,j,weight" triples (0-based vertex indices).

    Symmetric closure is applied; listing the same undirected edge twice is
    an error.
    """
    entries = {}
    n = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise GraphError(f"line {lineno}: expected 'i,j,weight'")
            try:
                i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise GraphError(f"line {lineno}: {exc}") from exc
            if i < 0 or j < 0:
                raise GraphError(f"line {lineno}: negative vertex index")
            key = (min(i, j), max(i, j))
            if key in entries:
                raise GraphError(f"line {lineno}: duplicate edge {key}")
            entries[key] = w
            n = max(n, i + 1, j + 1)
    s = np.zeros((n, n))
    for (i, j), w in entries.items():
        s[i, j] = s[j, i] = w
    return WeightedGraph(s)


def save_edge_csv(g: WeightedGraph, path) -> None:
    """Write the upper triangle of the similarity matrix as edge triples."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(g.n):
            for j in range(i + 1, g.n):
                w = g.similarity[i, j]
                if w != 0.0:
                    fh.write(f"{i},{j},{float(w)!r}\n")
