"""Subject-pairwise dissimilarities from vector or SPSD features.

Feature extraction turns component time courses (or spatial maps) into either
per-subject vectors or per-subject symmetric matrices; the four divergences
below turn those into DistanceMatrix objects.
"""
from __future__ import annotations

from dataclasses import InitVar, dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg


class FeatureError(ValueError):
    """Input features violate a precondition of the requested operation."""


def _default_ids(n):
    return [f"s{i:04d}" for i in range(n)]


@dataclass
class FeatureMatrix:
    data: np.ndarray
    subject_ids: list = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim == 1:
            self.data = self.data[:, None]
        if self.data.ndim != 2:
            raise FeatureError("feature matrix must be 2-D (subjects x features)")
        n, d = self.data.shape
        if n < 2 or d < 1:
            raise FeatureError(f"need at least 2 subjects and 1 feature, got {n}x{d}")
        if self.subject_ids is None:
            self.subject_ids = _default_ids(n)
        self.subject_ids = [str(s) for s in self.subject_ids]
        if len(self.subject_ids) != n:
            raise FeatureError("subject_ids length does not match rows")
        bad = ~np.isfinite(self.data).all(axis=1)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise FeatureError(f"non-finite features for subject {self.subject_ids[i]} (row {i})")

    @property
    def n(self):
        return self.data.shape[0]


@dataclass
class SpsdStack:
    matrices: np.ndarray  # (N, m, m)
    subject_ids: list = None
    # partial correlations are symmetric but need not be PSD
    check_psd: InitVar[bool] = True

    def __post_init__(self, check_psd):
        self.matrices = np.asarray(self.matrices, dtype=float)
        if self.matrices.ndim != 3 or self.matrices.shape[1] != self.matrices.shape[2]:
            raise FeatureError("SPSD stack must have shape (N, m, m)")
        n = self.matrices.shape[0]
        if n < 2:
            raise FeatureError("need at least 2 subjects")
        if self.subject_ids is None:
            self.subject_ids = _default_ids(n)
        self.subject_ids = [str(s) for s in self.subject_ids]
        if len(self.subject_ids) != n:
            raise FeatureError("subject_ids length does not match stack")
        for i, a in enumerate(self.matrices):
            sid = self.subject_ids[i]
            if not np.isfinite(a).all():
                raise FeatureError(f"non-finite matrix for subject {sid} (index {i})")
            scale = max(np.abs(a).max(), 1e-300)
            if np.abs(a - a.T).max() > 1e-10 * scale:
                raise FeatureError(f"matrix for subject {sid} is not symmetric")
            if not check_psd:
                continue
            ev = np.linalg.eigvalsh(a)
            if ev[0] < -1e-10 * max(ev[-1], 0.0):
                raise FeatureError(
                    f"matrix for subject {sid} is not PSD (min eigenvalue {ev[0]:.3e})")

    @property
    def n(self):
        return self.matrices.shape[0]


@dataclass
class DistanceMatrix:
    d: np.ndarray
    subject_ids: list = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        if self.d.ndim != 2 or self.d.shape[0] != self.d.shape[1]:
            raise FeatureError("distance matrix must be square")
        if self.subject_ids is None:
            self.subject_ids = _default_ids(self.d.shape[0])
        self.subject_ids = [str(s) for s in self.subject_ids]
        if len(self.subject_ids) != self.d.shape[0]:
            raise FeatureError("subject_ids length does not match matrix")
        if not np.isfinite(self.d).all():
            raise FeatureError("distance matrix has non-finite entries")
        if not np.array_equal(self.d, self.d.T):
            raise FeatureError("distance matrix is not symmetric")
        if np.any(np.diag(self.d) != 0):
            raise FeatureError("distance matrix has nonzero diagonal")
        if np.any(self.d < 0):
            raise FeatureError("distance matrix has negative entries")

    @property
    def n(self):
        return self.d.shape[0]

    def subset(self, idx) -> "DistanceMatrix":
        idx = np.asarray(idx)
        return DistanceMatrix(self.d[np.ix_(idx, idx)], [self.subject_ids[i] for i in idx])


def as_distance_matrix(D) -> DistanceMatrix:
    return D if isinstance(D, DistanceMatrix) else DistanceMatrix(D)


def _finish(d, ids, metric, **meta):
    """Symmetrize, zero the diagonal and clip round-off negatives."""
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    np.maximum(d, 0.0, out=d)
    return DistanceMatrix(d, list(ids), metadata={"metric": metric, **meta})


# ---------------------------------------------------------------- features

FEATURE_KINDS = ("amplitude", "netmat", "partial_netmat", "spatial_netmat", "map")


def _check_series(ts):
    ts = [np.asarray(x, dtype=float) for x in ts]
    if not ts:
        raise FeatureError("no subjects")
    shape = ts[0].shape
    for i, x in enumerate(ts):
        if x.ndim != 2:
            raise FeatureError(f"subject {i}: expected a 2-D components x timepoints array")
        if x.shape != shape:
            raise FeatureError(f"subject {i}: shape {x.shape} differs from {shape}")
        if not np.isfinite(x).all():
            raise FeatureError(f"non-finite input for subject {i}")
    if shape[0] < 1 or shape[1] < 2:
        raise FeatureError("need r >= 1 components and T >= 2 timepoints")
    return ts


def _pearson_matrix(x, i):
    xc = x - x.mean(axis=1, keepdims=True)
    norms = np.sqrt((xc * xc).sum(axis=1))
    if np.any(norms == 0):
        c = int(np.flatnonzero(norms == 0)[0])
        raise FeatureError(f"subject {i}: component {c} has zero variance, correlation undefined")
    z = xc / norms[:, None]
    c = z @ z.T
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return np.clip(c, -1.0, 1.0)


def _partial_corr(x, i, ridge_scale):
    xc = x - x.mean(axis=1, keepdims=True)
    if np.any((xc * xc).sum(axis=1) == 0):
        raise FeatureError(f"subject {i}: zero-variance component, correlation undefined")
    sigma = xc @ xc.T / (x.shape[1] - 1)
    eps = ridge_scale * np.mean(np.diag(sigma))
    try:
        theta = np.linalg.inv(sigma + eps * np.eye(sigma.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise FeatureError(f"subject {i}: covariance not invertible after ridge") from exc
    s = 1.0 / np.sqrt(np.diag(theta))
    p = -(s[:, None] * theta * s[None, :])
    p = 0.5 * (p + p.T)
    np.fill_diagonal(p, 1.0)
    return p


def extract_features(data, kind: str, subject_ids: Optional[Sequence[str]] = None,
                     ridge_scale: float = 1e-3):
    """Compute one of the five feature types per subject.

    Parameters
    ----------
    data : sequence of arrays
        Per-subject ``components x timepoints`` time courses, or for
        ``spatial_netmat``/``map`` per-subject ``components x locations`` maps.
    kind : str
        ``amplitude`` (RMS of each demeaned time course), ``netmat`` (Pearson
        correlation), ``partial_netmat`` (normalised ridge-regularised
        precision, sign-flipped off the diagonal), ``spatial_netmat`` (Pearson
        correlation between maps) or ``map`` (maps flattened as-is).
    ridge_scale : float
        Ridge added to the covariance before inversion, as a multiple of its
        mean diagonal (``partial_netmat`` only).

    Returns
    -------
    FeatureMatrix or SpsdStack
    """
    if kind not in FEATURE_KINDS:
        raise FeatureError(f"unknown feature kind {kind!r}; expected one of {FEATURE_KINDS}")
    ts = _check_series(data)
    ids = list(subject_ids) if subject_ids is not None else None
    if kind == "amplitude":
        rows = [np.sqrt(np.mean((x - x.mean(axis=1, keepdims=True)) ** 2, axis=1)) for x in ts]
        return FeatureMatrix(np.vstack(rows), ids)
    if kind == "map":
        return FeatureMatrix(np.vstack([x.ravel() for x in ts]), ids)
    if kind in ("netmat", "spatial_netmat"):
        return SpsdStack(np.stack([_pearson_matrix(x, i) for i, x in enumerate(ts)]), ids)
    return SpsdStack(np.stack([_partial_corr(x, i, ridge_scale) for i, x in enumerate(ts)]), ids,
                     check_psd=False)


# ---------------------------------------------------------------- divergences

def inner_product_divergence(F: FeatureMatrix) -> DistanceMatrix:
    """1 - g**2 on the Gram matrix after global min-max scaling to [0, 1]."""
    x = F.data
    g = x @ x.T
    lo, hi = g.min(), g.max()
    if hi == lo:
        raise FeatureError("constant Gram matrix, min-max scaling is degenerate")
    gs = (g - lo) / (hi - lo)
    return _finish(1.0 - gs * gs, F.subject_ids, "v1")


def _pearson_rows(x, ids):
    xc = x - x.mean(axis=1, keepdims=True)
    norms = np.sqrt((xc * xc).sum(axis=1))
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise FeatureError(f"subject {ids[zero[0]]} has a zero-variance feature vector")
    z = xc / norms[:, None]
    r = np.clip(z @ z.T, -1.0, 1.0)
    return 1.0 - r * r


def pearson_divergence(F: FeatureMatrix) -> DistanceMatrix:
    return _finish(_pearson_rows(F.data, F.subject_ids), F.subject_ids, "v2")


def spd_geodesic(S: SpsdStack, ridge: float = 0.0) -> DistanceMatrix:
    """Affine-invariant geodesic distance ||log(A_i^-1 A_j)||_F.

    Computed from the generalized eigenvalues of the pencil (A_j, A_i); each
    pair is solved once and mirrored.
    """
    mats = S.matrices + ridge * np.eye(S.matrices.shape[1])[None]
    for i, a in enumerate(mats):
        ev = np.linalg.eigvalsh(a)
        if ev[0] <= 0:
            raise FeatureError(
                f"subject {S.subject_ids[i]} not positive definite after ridge "
                f"(smallest eigenvalue {ev[0]:.3e})")
    n = S.n
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            lam = scipy.linalg.eigh(mats[j], mats[i], eigvals_only=True)
            d[i, j] = d[j, i] = np.sqrt(np.sum(np.log(lam) ** 2))
    return _finish(d, S.subject_ids, "pd1", ridge=ridge)


def half_vectorize(a: np.ndarray) -> np.ndarray:
    """Strictly lower-triangular entries, row-major."""
    il = np.tril_indices(a.shape[-1], -1)
    return a[..., il[0], il[1]]


def ztrans_pearson_divergence(S: SpsdStack, clamp_eps: float = 1e-7) -> DistanceMatrix:
    """Pearson divergence between Fisher-z transformed half-vectorizations."""
    m = S.matrices.shape[1]
    if m < 3:
        raise FeatureError("need matrices of size >= 3 for a Pearson correlation of entries")
    v = half_vectorize(S.matrices)
    z = np.arctanh(np.clip(v, -1.0 + clamp_eps, 1.0 - clamp_eps))
    return _finish(_pearson_rows(z, S.subject_ids), S.subject_ids, "pd2", clamp_eps=clamp_eps)


METRICS = {
    "v1": inner_product_divergence,
    "v2": pearson_divergence,
    "pd1": spd_geodesic,
    "pd2": ztrans_pearson_divergence,
}
VECTOR_METRICS = ("v1", "v2")
SPSD_METRICS = ("pd1", "pd2")


def compute_metric(features, metric: str, **kwargs) -> DistanceMatrix:
    if metric not in METRICS:
        raise FeatureError(f"unknown metric {metric!r}")
    if metric in VECTOR_METRICS and not isinstance(features, FeatureMatrix):
        raise FeatureError(f"metric {metric} needs vector features")
    if metric in SPSD_METRICS and not isinstance(features, SpsdStack):
        raise FeatureError(f"metric {metric} needs an SPSD stack")
    return METRICS[metric](features, **kwargs)
