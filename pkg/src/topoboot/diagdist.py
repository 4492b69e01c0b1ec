"""Wasserstein-type distances between persistence diagrams and Ward clustering.

Both diagrams are augmented with the diagonal projections of the other's
points, giving a square assignment problem of size |X| + |Y|. A point may
only go to its own diagonal slot; diagonal slots pair with each other for
free. The prevalence-weighted variant scales each pair cost by
|rho_x - rho_y|**p, with diagonal slots carrying prevalence 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .diagram import PersistenceDiagram

# a forbidden pairing; large but finite so the solver stays exact on the rest
_FORBIDDEN = 1e300


class DiagramError(ValueError):
    pass


def _points(X, k: int, with_prevalence: bool):
    if isinstance(X, PersistenceDiagram):
        ivs = X.in_dim(k)
        if any(not iv.is_finite for iv in ivs):
            raise DiagramError(f"diagram {X.source_label!r} has essential intervals in dim {k}; "
                               "filter them before computing distances")
        pts = np.array([(iv.birth, iv.death) for iv in ivs], dtype=float).reshape(-1, 2)
        if with_prevalence:
            if any(iv.prevalence is None for iv in ivs):
                raise DiagramError(f"diagram {X.source_label!r} is missing prevalence scores")
            rho = np.array([iv.prevalence for iv in ivs], dtype=float)
        else:
            rho = np.ones(len(ivs))
        return pts, rho
    pts = np.asarray(X, dtype=float).reshape(-1, 2 if not with_prevalence else 3)
    if not np.isfinite(pts).all():
        raise DiagramError("non-finite interval endpoints")
    if with_prevalence:
        return pts[:, :2], pts[:, 2]
    return pts, np.ones(len(pts))


def _element_costs(px, rx, py, ry, p, weighted):
    """Point-to-point costs and each point's cost to its own diagonal projection."""
    diff = np.abs(px[:, None, :] - py[None, :, :])
    pair = (diff ** p).sum(axis=2)
    # offset ((d - b)/2, (d - b)/2) under the p-norm
    dx = 2.0 * (np.abs(px[:, 1] - px[:, 0]) / 2.0) ** p
    dy = 2.0 * (np.abs(py[:, 1] - py[:, 0]) / 2.0) ** p
    if weighted:
        pair = pair * np.abs(rx[:, None] - ry[None, :]) ** p
        dx = dx * np.abs(rx) ** p
        dy = dy * np.abs(ry) ** p
    return pair, dx, dy


def _cost_matrix(px, rx, py, ry, p, weighted):
    n, m = len(px), len(py)
    C = np.zeros((n + m, n + m))
    pair, dx, dy = _element_costs(px, rx, py, ry, p, weighted)
    C[:n, :m] = pair
    C[:n, m:] = _FORBIDDEN
    C[np.arange(n), m + np.arange(n)] = dx
    C[n:, :m] = _FORBIDDEN
    C[n + np.arange(m), np.arange(m)] = dy
    C[n:, m:] = 0.0
    return C


def _solve(px, rx, py, ry, p, weighted):
    if len(px) + len(py) == 0:
        return 0.0, np.empty(0, int)
    C = _cost_matrix(px, rx, py, ry, p, weighted)
    rows, cols = linear_sum_assignment(C)
    return math.fsum(C[rows, cols].tolist()), cols


def matching_cost(X, Y, k: int = 1, p: float = 2.0, weighted: bool = False) -> float:
    """Optimal total cost (before the p-th root) of the augmented assignment."""
    if p < 1:
        raise DiagramError("p must be >= 1")
    px, rx = _points(X, k, weighted)
    py, ry = _points(Y, k, weighted)
    return _solve(px, rx, py, ry, p, weighted)[0]


def wasserstein(X, Y, k: int = 1, p: float = 2.0) -> float:
    """p-Wasserstein distance between the finite k-dimensional parts.

    ``X`` and ``Y`` are PersistenceDiagram objects or (m, 2) arrays of
    (birth, death) pairs.
    """
    return matching_cost(X, Y, k, p, weighted=False) ** (1.0 / p)


def prevalence_wasserstein(X, Y, k: int = 1, p: float = 2.0) -> float:
    """Prevalence-weighted p-Wasserstein pre-metric.

    Every interval must carry a prevalence in [0, 1]; arrays are given as
    (m, 3) rows of (birth, death, prevalence).
    """
    return matching_cost(X, Y, k, p, weighted=True) ** (1.0 / p)


def brute_force_matching_cost(X, Y, k: int = 1, p: float = 2.0, weighted: bool = False) -> float:
    """Exhaustive minimum over partial matchings X -> Y (rest to the diagonal).

    Every augmented bijection with finite cost is such a partial matching plus
    free diagonal-to-diagonal pairs, so this enumerates them all. Element
    costs and the final summation match the solver's, so the two minima
    agree bit for bit.
    """
    px, rx = _points(X, k, weighted)
    py, ry = _points(Y, k, weighted)
    n, m = len(px), len(py)
    pair, dx, dy = (a.tolist() for a in _element_costs(px, rx, py, ry, p, weighted))

    best = math.inf

    def rec(i, used, acc):
        nonlocal best
        if i == n:
            rest = [dy[j] for j in range(m) if j not in used]
            best = min(best, math.fsum(acc + rest))
            return
        rec(i + 1, used, acc + [dx[i]])
        for j in range(m):
            if j not in used:
                rec(i + 1, used | {j}, acc + [pair[i][j]])

    rec(0, frozenset(), [])
    return best


def bottleneck(X, Y, k: int = 1) -> float:
    """L-infinity bottleneck distance (used for stability checks)."""
    px, _ = _points(X, k, False)
    py, _ = _points(Y, k, False)
    n, m = len(px), len(py)
    if n + m == 0:
        return 0.0
    size = n + m
    C = np.full((size, size), np.inf)
    if n and m:
        C[:n, :m] = np.abs(px[:, None, :] - py[None, :, :]).max(axis=2)
    C[np.arange(n), m + np.arange(n)] = (px[:, 1] - px[:, 0]) / 2.0
    C[n + np.arange(m), np.arange(m)] = (py[:, 1] - py[:, 0]) / 2.0
    C[n:, m:] = 0.0
    cands = np.unique(C[np.isfinite(C)])
    lo, hi = 0, len(cands) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        graph = csr_matrix((C <= cands[mid]).astype(np.int8))
        match = maximum_bipartite_matching(graph, perm_type="column")
        if np.all(match >= 0):
            hi = mid
        else:
            lo = mid + 1
    return float(cands[lo])


def pairwise_distances(diagrams: Sequence, k: int = 1, p: float = 2.0,
                       weighted: bool = True, pool=None) -> np.ndarray:
    """All-pairs matrix; ``pool`` (an Executor) parallelizes over pairs."""
    m = len(diagrams)
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    fn = prevalence_wasserstein if weighted else wasserstein

    def one(ij):
        return fn(diagrams[ij[0]], diagrams[ij[1]], k, p)

    vals = list(pool.map(one, pairs)) if pool is not None else [one(ij) for ij in pairs]
    out = np.zeros((m, m))
    for (i, j), v in zip(pairs, vals):
        out[i, j] = out[j, i] = v
    return out


# ---------------------------------------------------------------- clustering

@dataclass
class Dendrogram:
    merges: np.ndarray  # (n - 1, 4): cluster_a, cluster_b, height, size
    leaf_labels: list
    metadata: dict = field(default_factory=dict)

    def leaves(self) -> list:
        """Leaf order from left-to-right traversal."""
        n = len(self.leaf_labels)

        def walk(c):
            if c < n:
                return [c]
            a, b = self.merges[c - n, :2].astype(int)
            return walk(a) + walk(b)

        return walk(2 * n - 2) if n > 1 else [0]

    def newick(self) -> str:
        n = len(self.leaf_labels)

        def walk(c, parent_h):
            if c < n:
                return f"{_newick_label(self.leaf_labels[c])}:{parent_h:.10g}"
            a, b, h = self.merges[c - n, 0], self.merges[c - n, 1], self.merges[c - n, 2]
            inner = f"({walk(int(a), h)},{walk(int(b), h)})"
            return f"{inner}:{max(parent_h - h, 0.0):.10g}"

        if n == 1:
            return _newick_label(self.leaf_labels[0]) + ";"
        a, b, h = self.merges[-1, :3]
        return f"({walk(int(a), h)},{walk(int(b), h)});"


def _newick_label(s):
    s = str(s)
    if any(ch in s for ch in " ():;,[]'"):
        return "'" + s.replace("'", "''") + "'"
    return s


def ward_cluster(D, labels: Optional[Sequence[str]] = None) -> Dendrogram:
    """Ward agglomerative clustering via the Lance-Williams recurrence.

    The recurrence runs on squared dissimilarities; reported heights are their
    square roots, as in the usual linkage convention. Ties go to the smallest
    (i, j) pair of active cluster ids. Rows of ``merges`` follow the scipy
    linkage layout.
    """
    from .metricspace import as_distance_matrix
    d = as_distance_matrix(D).d
    n = d.shape[0]
    if n < 2:
        raise DiagramError("need at least 2 items to cluster")
    labels = list(labels) if labels is not None else [str(i) for i in range(n)]
    sq = d.astype(float) ** 2
    total = 2 * n - 1
    dist = np.full((total, total), np.inf)
    dist[:n, :n] = sq
    np.fill_diagonal(dist, np.inf)
    size = np.zeros(total, dtype=int)
    size[:n] = 1
    active = list(range(n))
    merges = np.zeros((n - 1, 4))
    for step in range(n - 1):
        sub = dist[np.ix_(active, active)]
        flat = int(np.argmin(sub))  # first minimum in row-major order = smallest (i, j)
        ai, bj = divmod(flat, len(active))
        a, b = active[ai], active[bj]
        if a > b:
            a, b = b, a
        h2 = dist[a, b]
        new = n + step
        na, nb = size[a], size[b]
        for c in active:
            if c in (a, b):
                continue
            nc = size[c]
            v = ((na + nc) * dist[a, c] + (nb + nc) * dist[b, c] - nc * h2) / (na + nb + nc)
            dist[new, c] = dist[c, new] = v
        size[new] = na + nb
        merges[step] = (a, b, math.sqrt(max(h2, 0.0)), na + nb)
        active = [c for c in active if c not in (a, b)] + [new]
    heights = merges[:, 2]
    meta = {"method": "ward", "convention": "lance-williams on squared distances",
            "monotone": bool(np.all(np.diff(heights) >= 0))}
    return Dendrogram(merges, labels, meta)
