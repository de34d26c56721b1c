"""Invariant-domain detection from the support graph of a transition matrix.

A noisy map family induces a cell-to-cell transition matrix on a grid
(see `noisedyn.ulam`).  The directed graph of its positive entries
carries the domain structure studied here:

* *closed recurrent classes* — strongly connected components with no
  outgoing edges — approximate the minimal invariant domains;
* each class has a *period* ``r`` and splits into ``r`` cyclic parts
  ``U_0 -> U_1 -> ... -> U_{r-1} -> U_0`` mapped cyclically;
* domains are partially ordered by component-wise inclusion up to a
  rotation of the part indices.

Cells are flat grid indices; a :class:`DomainApprox` records the cell
set, its cyclic parts (anchored so part 0 contains the smallest cell
index), the period, and the volume fraction of the grid it covers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph


@dataclass
class SupportGraph:
    """Boolean adjacency of transition-matrix entries above a threshold."""

    adjacency: sparse.csr_matrix
    theta: float

    @classmethod
    def from_matrix(cls, P, theta: float = 0.0) -> "SupportGraph":
        if theta < 0:
            raise ValueError("theta must be nonnegative")
        P = sparse.csr_matrix(P)
        adj = sparse.csr_matrix((P > theta).astype(np.int8))
        adj.eliminate_zeros()
        return cls(adjacency=adj, theta=float(theta))

    @property
    def n_cells(self) -> int:
        return self.adjacency.shape[0]


@dataclass
class DomainApprox:
    """Grid approximation of an invariant domain.

    ``parts[i]`` are the sorted cell indices of the i-th cyclic part;
    the graph maps part ``i`` into part ``(i + 1) mod period``.  Part 0
    is anchored at the smallest cell index of the domain.
    """

    cells: np.ndarray
    parts: List[np.ndarray]
    period: int
    minimal: bool
    total_cells: int

    @property
    def volume(self) -> float:
        """Fraction of grid cells covered by the domain."""
        return self.cells.size / self.total_cells

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.int64)
        self.parts = [np.sort(np.asarray(p, dtype=np.int64)) for p in self.parts]
        if self.period != len(self.parts):
            raise ValueError("period must equal the number of parts")
        merged = np.sort(np.concatenate(self.parts)) if self.parts else np.array([], dtype=np.int64)
        if merged.size != self.cells.size or np.any(merged != np.sort(self.cells)):
            raise ValueError("parts must partition the domain's cells")


def _as_graph(obj, theta: float) -> SupportGraph:
    if isinstance(obj, SupportGraph):
        return obj
    return SupportGraph.from_matrix(obj, theta)


def closed_recurrent_classes(matrix_or_graph, theta: float = 0.0) -> List[np.ndarray]:
    """Strongly connected components with no outgoing edges, sorted by min cell.

    For a row-stochastic matrix these are exactly the closed
    communicating classes: every orbit of the cell chain eventually
    enters one and never leaves.
    """
    graph = _as_graph(matrix_or_graph, theta)
    adj = graph.adjacency
    n_comp, labels = csgraph.connected_components(adj, directed=True, connection="strong")
    rows, cols = adj.nonzero()
    crossing = labels[rows] != labels[cols]
    open_comps = np.zeros(n_comp, dtype=bool)
    open_comps[labels[rows[crossing]]] = True
    classes = [
        np.flatnonzero(labels == comp)
        for comp in range(n_comp)
        if not open_comps[comp]
    ]
    classes.sort(key=lambda cells: int(cells[0]))
    return classes


def period_and_cyclic_levels(adjacency: sparse.csr_matrix, cells: np.ndarray):
    """Period of a strongly connected cell class, plus per-cell part levels.

    Runs a BFS from the smallest cell and reduces ``gcd`` over the
    quantity ``dist(u) + 1 - dist(v)`` across in-class edges ``u -> v``;
    the result is the class period ``r``.  The returned levels are
    ``dist mod r`` aligned with ``cells``, so level 0 is the part of
    the anchor cell and the graph maps level ``i`` into ``i + 1 mod r``.
    """
    cells = np.sort(np.asarray(cells, dtype=np.int64))
    sub = adjacency[cells][:, cells]
    dist = csgraph.shortest_path(sub, method="D", unweighted=True, indices=0)
    back = csgraph.shortest_path(sub.T.tocsr(), method="D", unweighted=True, indices=0)
    if not (np.all(np.isfinite(dist)) and np.all(np.isfinite(back))):
        raise ValueError("cell class is not strongly connected")
    dist = dist.astype(np.int64)
    u, v = sub.nonzero()
    if u.size == 0:
        raise ValueError("cell class has no internal edges")
    r = int(np.gcd.reduce(np.abs(dist[u] + 1 - dist[v])))
    if r == 0:
        r = 1
    return r, dist % r


def cyclic_period(matrix_or_graph, cells, theta: float = 0.0) -> int:
    """Period of one strongly connected cell class."""
    graph = _as_graph(matrix_or_graph, theta)
    r, _ = period_and_cyclic_levels(graph.adjacency, np.asarray(cells, dtype=np.int64))
    return r


def detect_domains(matrix_or_graph, theta: float = 0.0) -> List[DomainApprox]:
    """Minimal invariant domains of the cell chain, one per closed class."""
    graph = _as_graph(matrix_or_graph, theta)
    out = []
    for cells in closed_recurrent_classes(graph):
        r, levels = period_and_cyclic_levels(graph.adjacency, cells)
        parts = [cells[levels == i] for i in range(r)]
        out.append(
            DomainApprox(
                cells=cells,
                parts=parts,
                period=r,
                minimal=True,
                total_cells=graph.n_cells,
            )
        )
    return out


def domain_from_parts(parts: Sequence, total_cells: int, minimal: bool = False) -> DomainApprox:
    """Build a domain approximation directly from cyclic parts."""
    parts = [np.asarray(p, dtype=np.int64) for p in parts]
    cells = np.sort(np.concatenate(parts))
    if np.unique(cells).size != cells.size:
        raise ValueError("parts must be pairwise disjoint")
    return DomainApprox(
        cells=cells,
        parts=parts,
        period=len(parts),
        minimal=minimal,
        total_cells=int(total_cells),
    )


def _rotated_leq(a: DomainApprox, b: DomainApprox) -> bool:
    m = math.lcm(a.period, b.period)
    pa = [frozenset(p.tolist()) for p in a.parts]
    pb = [frozenset(p.tolist()) for p in b.parts]
    for k in range(m):
        if all(pa[j % a.period] <= pb[(j + k) % b.period] for j in range(m)):
            return True
    return False


def compare_domains(a: DomainApprox, b: DomainApprox) -> str:
    """Partial order up to rotation: equal / precedes / succeeds / incomparable.

    ``precedes`` means every cyclic part of ``a`` is contained in the
    matching part of ``b`` after some fixed rotation of part indices
    (parts repeat with period ``lcm`` when the periods differ).
    """
    ab = _rotated_leq(a, b)
    ba = _rotated_leq(b, a)
    if ab and ba:
        return "equal"
    if ab:
        return "precedes"
    if ba:
        return "succeeds"
    return "incomparable"


def pairwise_disjoint(domains: Sequence[DomainApprox]) -> bool:
    """True when no two of the domains share a cell."""
    seen = set()
    for dom in domains:
        cells = set(dom.cells.tolist())
        if seen & cells:
            return False
        seen |= cells
    return True


def verify_r_transitivity(matrix_or_graph, domain: DomainApprox, threshold: float = 0.99, theta: float = 0.0):
    """Check that each cyclic part communicates under the ``r``-step graph.

    For each part, runs a reachability sweep in the ``r``-th boolean
    power of the class subgraph from the part's smallest cell and
    measures the fraction of the part reached.  Returns
    ``(ok, min_coverage)`` where ``ok`` is min coverage >= threshold.
    """
    graph = _as_graph(matrix_or_graph, theta)
    cells = domain.cells
    sub = sparse.csr_matrix(graph.adjacency[cells][:, cells].astype(bool))
    power = sub
    for _ in range(domain.period - 1):
        power = sparse.csr_matrix((power @ sub).astype(bool))
    pos = {int(c): i for i, c in enumerate(cells)}
    min_cov = 1.0
    for part in domain.parts:
        idx = np.array([pos[int(c)] for c in part])
        reached = csgraph.breadth_first_order(
            power, int(idx[0]), directed=True, return_predecessors=False
        )
        cov = np.isin(idx, reached).mean()
        min_cov = min(min_cov, float(cov))
    return min_cov >= threshold, min_cov
