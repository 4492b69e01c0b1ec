"""Image persistence of VR(subsample) -> VR(full set), plus a rank oracle.

Both filtrations live on the simplices of the ambient complex. The ambient
value of a simplex is its diameter; the subsample value equals it on
simplices spanned by masked points and a sentinel (twice the largest finite
value) elsewhere. Rows of the image boundary matrix follow the subsample
order and columns the ambient order. Pivot pairs of a matrix and of its
anti-transpose coincide, so the reduction runs as a coboundary reduction over
k-simplices taken in reverse subsample order, with pivots read in the ambient
order. A pivot pair whose k-simplex lies in the subsample is an image
interval: born at the subsample value, dying at the ambient value.
"""
from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .metricspace import as_distance_matrix
from .vrph import (FiltrationParams, PersistenceError, decode_simplex, resolve_threshold,
                   sorted_simplices, vr_pairs)


@dataclass(frozen=True)
class SubsampleMask:
    included: np.ndarray

    def __post_init__(self):
        inc = np.asarray(self.included, dtype=bool)
        inc.setflags(write=False)
        object.__setattr__(self, "included", inc)

    @property
    def count(self) -> int:
        return int(self.included.sum())

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.included)

    @classmethod
    def from_indices(cls, n: int, idx) -> "SubsampleMask":
        inc = np.zeros(n, dtype=bool)
        inc[np.asarray(idx, dtype=int)] = True
        return cls(inc)

    def to_base64(self) -> str:
        return base64.b64encode(np.packbits(self.included, bitorder="little").tobytes()).decode()

    @classmethod
    def from_base64(cls, text: str, n: int) -> "SubsampleMask":
        bits = np.unpackbits(np.frombuffer(base64.b64decode(text), dtype=np.uint8),
                             bitorder="little")
        return cls(bits[:n].astype(bool))


@dataclass(frozen=True)
class ImageInterval:
    dim: int
    birth_sub: float
    death_amb: float
    birth_simplex: tuple
    death_simplex: Optional[tuple]

    @property
    def is_finite(self):
        return math.isfinite(self.death_amb)


@dataclass
class ImageDiagram:
    intervals: list
    mask: SubsampleMask
    source_label: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.intervals = sorted(self.intervals, key=lambda iv: (
            iv.dim, iv.birth_sub, iv.death_amb, iv.birth_simplex, iv.death_simplex or ()))

    def in_dim(self, k: int) -> list:
        return [iv for iv in self.intervals if iv.dim == k]

    def values(self):
        return sorted((iv.dim, iv.birth_sub, iv.death_amb) for iv in self.intervals)

    def to_dict(self) -> dict:
        return {
            "source": self.source_label,
            "field": "Z2",
            "mask": {"n": int(self.mask.included.size), "bits": self.mask.to_base64()},
            "intervals": [{
                "dim": iv.dim,
                "birth_sub": iv.birth_sub,
                "death_amb": iv.death_amb if iv.is_finite else None,
                "birth_simplex": list(iv.birth_simplex),
                "death_simplex": None if iv.death_simplex is None else list(iv.death_simplex),
            } for iv in self.intervals],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ImageDiagram":
        mask = SubsampleMask.from_base64(obj["mask"]["bits"], obj["mask"]["n"])
        ivs = [ImageInterval(int(r["dim"]), float(r["birth_sub"]),
                             math.inf if r["death_amb"] is None else float(r["death_amb"]),
                             tuple(r["birth_simplex"]),
                             None if r["death_simplex"] is None else tuple(r["death_simplex"]))
               for r in obj["intervals"]]
        return cls(ivs, mask, obj.get("source", ""), obj.get("metadata", {}))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def _check_mask(mask, n, max_dim):
    if not isinstance(mask, SubsampleMask):
        mask = SubsampleMask(mask)
    if mask.included.size != n:
        raise PersistenceError(f"mask has length {mask.included.size}, expected {n}")
    if mask.count < 2:
        raise PersistenceError("mask must include at least 2 points")
    if max_dim >= 1 and mask.count < 3:
        raise PersistenceError("mask must include at least 3 points for 1-cycles")
    return mask


def image_persistence(D, mask, params: FiltrationParams = FiltrationParams(),
                      dims: Optional[Sequence[int]] = None,
                      label: str = "") -> ImageDiagram:
    """Barcode of im(H_k(VR(X_sub)) -> H_k(VR(X))) for k in ``dims``.

    ``dims`` defaults to ``0..params.max_dim``. The threshold is resolved on
    the ambient matrix, so the enclosing-radius default matches
    ``vr_persistence`` on the same input.
    """
    if params.max_dim not in (1, 2):
        raise PersistenceError("image persistence needs max_dim 1 or 2")
    Dm = as_distance_matrix(D)
    d = np.ascontiguousarray(Dm.d, dtype=np.float64)
    n = d.shape[0]
    mask = _check_mask(mask, n, params.max_dim)
    inc = mask.included
    thr = resolve_threshold(d, params)
    finite_vals = d[d <= thr]
    sentinel = 2.0 * float(finite_vals.max())
    if sentinel <= 0.0 or np.any(finite_vals >= sentinel):
        raise PersistenceError("subsample sentinel collides with a finite filtration value")
    dims = list(range(params.max_dim + 1)) if dims is None else sorted(set(dims))
    full = np.ones(n, dtype=bool)
    # simplices negative in the subsample-first order can never carry an
    # image birth, so their columns are cleared
    g_pairs = vr_pairs(d, thr, max(dims) - 1, sub=inc) if max(dims) > 0 else []
    ivs = []
    for k in dims:
        diam, codes, grp = sorted_simplices(d, thr, k, sub=inc)
        if k > 0:
            keep = ~np.isin(codes, g_pairs[k - 1].death_code)
            diam, codes, grp = diam[keep], codes[keep], grp[keep]
        c_codes = codes[::-1].copy()
        c_diam = diam[::-1].copy()
        c_in = grp[::-1] == 0
        piv_code, piv_diam = K.reduce_coboundary(d, thr, full, k, c_codes, c_diam, full, False)
        paired = piv_code >= 0
        for j in np.flatnonzero(paired & c_in):
            if piv_diam[j] > c_diam[j]:
                ivs.append(ImageInterval(k, float(c_diam[j]), float(piv_diam[j]),
                                         decode_simplex(int(c_codes[j]), k, n),
                                         decode_simplex(int(piv_code[j]), k + 1, n)))
        for j in np.flatnonzero(~paired & c_in):
            ivs.append(ImageInterval(k, float(c_diam[j]), math.inf,
                                     decode_simplex(int(c_codes[j]), k, n), None))
    meta = {"threshold": thr, "sentinel": sentinel, "mask_count": mask.count,
            "max_dim": params.max_dim, "dims": dims}
    return ImageDiagram(ivs, mask, label, meta)


# ---------------------------------------------------------------- oracle

def _gf2_rank(m: np.ndarray) -> int:
    m = (np.asarray(m) % 2).astype(np.uint8).copy()
    rows, cols = m.shape
    rank = 0
    for c in range(cols):
        hits = np.flatnonzero(m[rank:, c]) + rank
        if hits.size == 0:
            continue
        p = hits[0]
        if p != rank:
            m[[rank, p]] = m[[p, rank]]
        below = np.flatnonzero(m[:, c])
        below = below[below != rank]
        m[below] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def _gf2_nullspace(m: np.ndarray) -> np.ndarray:
    """Basis (as columns) of the kernel of m over Z/2."""
    m = (np.asarray(m) % 2).astype(np.uint8).copy()
    rows, cols = m.shape
    pivcols = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        hits = np.flatnonzero(m[r:, c]) + r
        if hits.size == 0:
            continue
        p = hits[0]
        if p != r:
            m[[r, p]] = m[[p, r]]
        others = np.flatnonzero(m[:, c])
        others = others[others != r]
        m[others] ^= m[r]
        pivcols.append(c)
        r += 1
    free = [c for c in range(cols) if c not in pivcols]
    basis = np.zeros((cols, len(free)), dtype=np.uint8)
    for t, fc in enumerate(free):
        basis[fc, t] = 1
        for i, pc in enumerate(pivcols):
            basis[pc, t] = m[i, fc]
    return basis


def induced_rank_oracle(D, mask, k: int, r: float, s: float) -> int:
    """Rank of H_k(VR_r(X_sub)) -> H_k(VR_s(X)) by explicit Z/2 linear algebra."""
    d = as_distance_matrix(D).d
    if d.shape[0] > 8:
        raise PersistenceError("rank oracle is limited to N <= 8")
    if r > s:
        raise PersistenceError("need r <= s")
    inc = np.asarray(mask.included if isinstance(mask, SubsampleMask) else mask, dtype=bool)
    return _induced_rank(d, inc, k, r, s)


def _induced_rank(d, inc, k, r, s):
    n = d.shape[0]

    def diam(sx):
        return max((d[a, b] for a, b in combinations(sx, 2)), default=0.0)

    k_simplices = [sx for sx in combinations(range(n), k + 1)]
    k_index = {sx: i for i, sx in enumerate(k_simplices)}
    sub_k = [sx for sx in k_simplices if all(inc[v] for v in sx) and diam(sx) <= r]
    if not sub_k:
        return 0
    # cycles of the subsample complex at r
    if k == 0:
        cycles = np.zeros((len(k_simplices), len(sub_k)), dtype=np.uint8)
        for t, sx in enumerate(sub_k):
            cycles[k_index[sx], t] = 1
    else:
        faces = {f: i for i, f in enumerate(combinations(range(n), k))}
        bd = np.zeros((len(faces), len(sub_k)), dtype=np.uint8)
        for t, sx in enumerate(sub_k):
            for f in combinations(sx, k):
                bd[faces[f], t] = 1
        null = _gf2_nullspace(bd)
        cycles = np.zeros((len(k_simplices), null.shape[1]), dtype=np.uint8)
        for t, sx in enumerate(sub_k):
            cycles[k_index[sx]] = null[t]
    if cycles.shape[1] == 0:
        return 0
    cofaces = [sx for sx in combinations(range(n), k + 2) if diam(sx) <= s]
    bnd = np.zeros((len(k_simplices), len(cofaces)), dtype=np.uint8)
    for t, sx in enumerate(cofaces):
        for f in combinations(sx, k + 1):
            bnd[k_index[f], t] = 1
    rb = _gf2_rank(bnd) if cofaces else 0
    return _gf2_rank(np.hstack([cycles, bnd])) - rb
