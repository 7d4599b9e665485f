"""File-level dependency graph and graph features.

The graph is derived from aggregated call edges. PageRank runs by power
iteration on the weighted transition matrix with uniform redistribution of
dangling mass; the same core is reused for PageRank over attention matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import RepositoryModel

DEFAULT_DAMPING = 0.85
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100


@dataclass
class DepGraph:
    """Weighted directed graph over the full repository file set."""

    nodes: list[str]
    edges: dict[tuple[str, str], float]

    def __post_init__(self) -> None:
        index = {}
        for i, node in enumerate(self.nodes):
            index[node] = i
        self._index = index

    @property
    def dangling(self) -> set[str]:
        with_out = {src for src, _ in self.edges}
        return {n for n in self.nodes if n not in with_out}

    def node_index(self, node: str) -> int:
        return self._index[node]


@dataclass
class PageRankResult:
    scores: dict[str, float]
    converged: bool
    iterations: int


@dataclass(frozen=True)
class DegreeFeatures:
    in_degree: int
    out_degree: int
    fan_in: float
    fan_out: float


def build_dependency_graph(model: RepositoryModel) -> DepGraph:
    """Aggregate call edges into a file-level graph covering every file."""
    edges: dict[tuple[str, str], float] = {}
    for edge in model.call_edges:
        key = (edge.caller_file_id, edge.callee_file_id)
        edges[key] = edges.get(key, 0.0) + edge.weight
    return DepGraph(nodes=sorted(model.files), edges=edges)


def _pagerank_vector(
    transition: np.ndarray,
    out_mass: np.ndarray,
    damping: float,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, bool, int]:
    """Power iteration on a row-wise transition matrix.

    ``transition`` rows need not be normalized; ``out_mass`` holds each row's
    total outgoing weight (zero marks a dangling row whose mass is spread
    uniformly). Converges when the L1 delta between iterations drops below
    ``tol``.
    """
    n = transition.shape[0]
    dangling = out_mass <= 0.0
    norm = np.where(dangling, 1.0, out_mass)
    stochastic = transition / norm[:, None]

    rank = np.full(n, 1.0 / n)
    teleport = (1.0 - damping) / n
    for iteration in range(1, max_iter + 1):
        dangling_mass = rank[dangling].sum() / n
        updated = teleport + damping * (rank @ stochastic + dangling_mass)
        delta = np.abs(updated - rank).sum()
        rank = updated
        if delta < tol:
            return rank, True, iteration
    return rank, False, max_iter


def pagerank(
    graph: DepGraph,
    damping: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> PageRankResult:
    """PageRank over the dependency graph.

    Scores form a probability distribution (sum to 1 within 1e-9). Dangling
    node mass is redistributed uniformly. Raises on an empty graph.
    """
    if not graph.nodes:
        raise ValueError("pagerank requires a non-empty graph")
    if not 0.0 < damping < 1.0:
        raise ValueError("damping must lie in (0, 1)")
    n = len(graph.nodes)
    transition = np.zeros((n, n))
    for (src, dst), weight in graph.edges.items():
        transition[graph.node_index(src), graph.node_index(dst)] += weight
    out_mass = transition.sum(axis=1)
    vector, converged, iterations = _pagerank_vector(transition, out_mass, damping, tol, max_iter)
    scores = {node: float(vector[i]) for i, node in enumerate(graph.nodes)}
    return PageRankResult(scores=scores, converged=converged, iterations=iterations)


def pagerank_stochastic(
    matrix: np.ndarray,
    damping: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """PageRank over an already row-stochastic weight matrix (no dangling rows)."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise ValueError("expected a non-empty square matrix")
    out_mass = matrix.sum(axis=1)
    vector, _, _ = _pagerank_vector(matrix, out_mass, damping, tol, max_iter)
    return vector


def degree_features(graph: DepGraph) -> dict[str, DegreeFeatures]:
    """Per-node degrees: distinct neighbor files vs weighted call sites.

    in/out-degree count distinct neighbors; fan-in/fan-out sum edge weights.
    """
    preds: dict[str, set[str]] = {n: set() for n in graph.nodes}
    succs: dict[str, set[str]] = {n: set() for n in graph.nodes}
    fan_in: dict[str, float] = {n: 0.0 for n in graph.nodes}
    fan_out: dict[str, float] = {n: 0.0 for n in graph.nodes}
    for (src, dst), weight in graph.edges.items():
        succs[src].add(dst)
        preds[dst].add(src)
        fan_out[src] += weight
        fan_in[dst] += weight
    return {
        n: DegreeFeatures(len(preds[n]), len(succs[n]), fan_in[n], fan_out[n])
        for n in graph.nodes
    }


def dump_edge_list(graph: DepGraph) -> str:
    """Debug dump as tab-separated ``src dst weight`` lines."""
    lines = [f"{src}\t{dst}\t{weight:g}" for (src, dst), weight in sorted(graph.edges.items())]
    return "\n".join(lines)
