"""Vietoris-Rips persistence over Z/2 in dimensions 0..2.

The engine computes persistent cohomology with clearing: H0 by a Kruskal
pass, higher dimensions by reducing coboundary columns in reverse filtration
order with cofaces generated on the fly. ``brute_force_persistence`` is an
independent textbook boundary-matrix reduction used as the test oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Union

import numpy as np

from . import _kernels as K
from .diagram import PersistenceDiagram, PersistenceInterval
from .metricspace import as_distance_matrix


class PersistenceError(ValueError):
    pass


@dataclass(frozen=True)
class FiltrationParams:
    max_dim: int = 1
    # None or "enclosing" -> enclosing radius; math.inf -> full complex
    threshold: Optional[Union[float, str]] = None

    def __post_init__(self):
        if self.max_dim not in (0, 1, 2):
            raise PersistenceError(f"max_dim must be 0, 1 or 2, got {self.max_dim}")
        t = self.threshold
        if isinstance(t, str) and t != "enclosing":
            raise PersistenceError(f"unknown threshold {t!r}")
        if t is not None and not isinstance(t, str) and not (t >= 0):
            raise PersistenceError("threshold must be nonnegative")


def enclosing_radius(d: np.ndarray) -> float:
    return float(d.max(axis=1).min())


def resolve_threshold(d: np.ndarray, params: FiltrationParams) -> float:
    t = params.threshold
    if t is None or t == "enclosing":
        return enclosing_radius(d)
    return float(t)


def _validated(D) -> np.ndarray:
    D = as_distance_matrix(D)
    if D.n < 2:
        raise PersistenceError("need at least 2 points")
    return np.ascontiguousarray(D.d, dtype=np.float64)


def _group(codes, k, n, sub):
    """0 for simplices spanned by ``sub``, 1 otherwise."""
    ok = np.ones(codes.shape[0], dtype=bool)
    c = codes.copy()
    for _ in range(k + 1):
        ok &= sub[c % n]
        c //= n
    return (~ok).astype(np.int64)


def sorted_simplices(d, threshold, k, mask=None, sub=None):
    """k-simplices within the threshold, sorted by filtration key.

    The key is (diameter, code); with ``sub`` given it becomes
    (group, diameter, code) so simplices spanned by ``sub`` come first.
    Returns (diameters, codes, groups).
    """
    n = d.shape[0]
    if mask is None:
        mask = np.ones(n, dtype=bool)
    if k == 0:
        codes = np.flatnonzero(mask).astype(np.int64)
        diam = np.zeros(codes.shape[0])
    elif k == 1:
        iu, ju = np.triu_indices(n, 1)
        diam = d[iu, ju]
        keep = (diam <= threshold) & mask[iu] & mask[ju]
        codes = (iu * n + ju)[keep].astype(np.int64)
        diam = diam[keep]
    elif k == 2:
        diam, codes = K.enumerate_triangles(d, threshold, mask)
    else:
        raise PersistenceError("simplex dimension > 2 is not supported")
    grp = np.zeros(codes.shape[0], dtype=np.int64) if sub is None else _group(codes, k, n, sub)
    order = np.lexsort((codes, diam, grp))
    return diam[order], codes[order], grp[order]


def decode_simplex(code: int, k: int, n: int) -> tuple:
    out = []
    for _ in range(k + 1):
        out.append(int(code % n))
        code //= n
    return tuple(reversed(out))


@dataclass
class RawPairs:
    """Every persistence pair of one dimension, zero-length ones included."""
    dim: int
    birth_code: np.ndarray
    birth: np.ndarray
    death_code: np.ndarray  # -1 for essential
    death: np.ndarray


def vr_pairs(d, threshold, max_dim, mask=None, sub=None):
    """Raw persistence pairs of the VR filtration.

    ``mask`` restricts the complex to a vertex subset. ``sub`` switches to
    the subsample-first order (simplices spanned by ``sub`` precede all
    others); the resulting death simplices are what image persistence clears.
    """
    n = d.shape[0]
    full = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    use_sub = sub is not None
    sub_arr = full if sub is None else np.asarray(sub, dtype=bool)
    out = []
    e_diam, e_codes, _ = sorted_simplices(d, threshold, 1, full, sub)
    killed = K.union_find_pairs(n, e_codes)
    neg = killed >= 0
    verts = np.flatnonzero(full)
    alive = np.setdiff1d(verts, killed[neg])
    out.append(RawPairs(
        0,
        np.concatenate([killed[neg], alive]).astype(np.int64),
        np.zeros(neg.sum() + alive.size),
        np.concatenate([e_codes[neg], np.full(alive.size, -1, dtype=np.int64)]),
        np.concatenate([e_diam[neg], np.full(alive.size, math.inf)]),
    ))
    cleared = e_codes[neg]
    for k in range(1, max_dim + 1):
        if k == 1:
            s_diam, s_codes = e_diam, e_codes
        else:
            s_diam, s_codes, _ = sorted_simplices(d, threshold, k, full, sub)
        keep = ~np.isin(s_codes, cleared)
        c_codes = s_codes[keep][::-1].copy()
        c_diam = s_diam[keep][::-1].copy()
        piv_code, piv_diam = K.reduce_coboundary(d, threshold, full, k, c_codes, c_diam,
                                                 sub_arr, use_sub)
        death = np.where(piv_code >= 0, piv_diam, math.inf)
        out.append(RawPairs(k, c_codes, c_diam, piv_code, death))
        cleared = piv_code[piv_code >= 0]
    return out


def _intervals(pairs, n):
    ivs = []
    for p in pairs:
        for bc, b, dc, dv in zip(p.birth_code, p.birth, p.death_code, p.death):
            if dv == b:
                continue
            ds = None if dc < 0 else decode_simplex(int(dc), p.dim + 1, n)
            ivs.append(PersistenceInterval(p.dim, float(b), float(dv),
                                           decode_simplex(int(bc), p.dim, n), ds))
    return ivs


def vr_persistence(D, params: FiltrationParams = FiltrationParams(),
                   label: str = "") -> PersistenceDiagram:
    """Vietoris-Rips persistence diagram of a distance matrix.

    Returns every interval of positive length in dimensions ``0..max_dim``
    with death at most the threshold, plus essential classes (death ``inf``).
    Filtration ties are broken by (diameter, dimension, lexicographic vertex
    tuple), so birth/death simplices are deterministic.
    """
    d = _validated(D)
    thr = resolve_threshold(d, params)
    pairs = vr_pairs(d, thr, params.max_dim)
    meta = {"threshold": thr, "max_dim": params.max_dim, "n_points": int(d.shape[0]),
            "threshold_rule": "enclosing_radius" if params.threshold in (None, "enclosing")
            else "fixed"}
    return PersistenceDiagram(_intervals(pairs, d.shape[0]), source_label=label, metadata=meta)


# ---------------------------------------------------------------- oracle

def brute_force_persistence(D, params: FiltrationParams = FiltrationParams(),
                            label: str = "") -> PersistenceDiagram:
    """Textbook reduction of the full boundary matrix; N <= 10 only."""
    d = np.asarray(as_distance_matrix(D).d, dtype=np.float64)
    n = d.shape[0]
    if n > 10:
        raise PersistenceError("brute-force oracle is limited to N <= 10")
    thr = resolve_threshold(d, params) if n > 1 else math.inf
    simplices = []
    for k in range(params.max_dim + 2):
        for s in combinations(range(n), k + 1):
            f = max((d[a, b] for a, b in combinations(s, 2)), default=0.0)
            if f <= thr:
                simplices.append((f, k, s))
    simplices.sort()
    index = {s: i for i, (_, _, s) in enumerate(simplices)}
    columns = []
    for f, k, s in simplices:
        columns.append({index[face] for face in combinations(s, k)} if k > 0 else set())
    low_to_col = {}
    lows = [None] * len(columns)
    for j, col in enumerate(columns):
        while col:
            low = max(col)
            if low not in low_to_col:
                break
            col ^= columns[low_to_col[low]]
        if col:
            low = max(col)
            low_to_col[low] = j
            lows[j] = low
    ivs = []
    for j, low in enumerate(lows):
        if low is None:
            continue
        fb, kb, sb = simplices[low]
        fd, _, sd = simplices[j]
        if kb <= params.max_dim and fd > fb:
            ivs.append(PersistenceInterval(kb, float(fb), float(fd), sb, sd))
    for i, (f, k, s) in enumerate(simplices):
        if k <= params.max_dim and not columns[i] and i not in low_to_col:
            ivs.append(PersistenceInterval(k, float(f), math.inf, s, None))
    return PersistenceDiagram(ivs, source_label=label, metadata={"threshold": thr})
