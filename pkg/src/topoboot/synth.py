"""Seeded point clouds with known topology, and representation maps over them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metricspace import FeatureMatrix

KINDS = ("circle", "torus", "sphere", "figure_eight", "gaussian_blob")
_INTRINSIC = {"circle": 2, "torus": 3, "sphere": 3, "figure_eight": 2}


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class ManifoldSpec:
    kind: str = "circle"
    n: int = 100
    noise_sigma: float = 0.0
    ambient_dim: int = 2
    seed: int = 0
    # figure_eight: large-loop radius / small-loop radius (small loop has radius 1)
    radius_ratio: float = 3.0
    # torus: (major radius, tube radius)
    torus_radii: tuple = (2.0, 1.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SynthError(f"unsupported manifold kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 3:
            raise SynthError("n must be at least 3")
        if self.noise_sigma < 0:
            raise SynthError("noise_sigma must be nonnegative")
        if self.ambient_dim < _INTRINSIC.get(self.kind, 1):
            raise SynthError(f"{self.kind} needs ambient_dim >= {_INTRINSIC[self.kind]}")
        if self.radius_ratio <= 0:
            raise SynthError("radius_ratio must be positive")


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def _circle(n, rng):
    t = rng.uniform(0, 2 * np.pi, n)
    return np.column_stack([np.cos(t), np.sin(t)])


def _sphere(n, rng):
    x = rng.standard_normal((n, 3))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _torus(n, rng, big, small):
    # rejection sampling keeps the density uniform in surface area
    out = np.empty((0, 3))
    while out.shape[0] < n:
        u = rng.uniform(0, 2 * np.pi, 2 * n)
        v = rng.uniform(0, 2 * np.pi, 2 * n)
        keep = rng.uniform(0, big + small, 2 * n) < big + small * np.cos(v)
        u, v = u[keep], v[keep]
        pts = np.column_stack([(big + small * np.cos(v)) * np.cos(u),
                               (big + small * np.cos(v)) * np.sin(u),
                               small * np.sin(v)])
        out = np.vstack([out, pts])
    return out[:n]


def _figure_eight(n, rng, ratio):
    # two circles tangent at the origin, points spread uniformly by arc length
    s = rng.uniform(0, 2 * np.pi * (1 + ratio), n)
    small = s < 2 * np.pi
    out = np.empty((n, 2))
    t = s[small]
    out[small] = np.column_stack([1 - np.cos(t), np.sin(t)])
    t = (s[~small] - 2 * np.pi) / ratio
    out[~small] = np.column_stack([-ratio * (1 - np.cos(t)), ratio * np.sin(t)])
    return out


def sample_manifold(spec: ManifoldSpec) -> FeatureMatrix:
    """Uniform sample, randomly rotated into ``ambient_dim`` with isotropic noise."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "circle":
        pts = _circle(spec.n, rng)
    elif spec.kind == "sphere":
        pts = _sphere(spec.n, rng)
    elif spec.kind == "torus":
        pts = _torus(spec.n, rng, *spec.torus_radii)
    elif spec.kind == "figure_eight":
        pts = _figure_eight(spec.n, rng, spec.radius_ratio)
    else:
        pts = rng.standard_normal((spec.n, spec.ambient_dim))
    full = np.zeros((spec.n, spec.ambient_dim))
    full[:, :pts.shape[1]] = pts
    full = full @ random_orthogonal(spec.ambient_dim, rng).T
    if spec.noise_sigma > 0:
        full = full + spec.noise_sigma * rng.standard_normal(full.shape)
    return FeatureMatrix(full, [f"sub{i:04d}" for i in range(spec.n)])


def random_representation(F: FeatureMatrix, kind: str = "projection", d: int = 2,
                          seed: int = 0) -> FeatureMatrix:
    """Seeded orthonormal d-frame projection, optionally followed by tanh."""
    if kind not in ("projection", "nonlinear"):
        raise SynthError(f"unknown representation kind {kind!r}")
    src = F.data.shape[1]
    if d < 1:
        raise SynthError("d must be at least 1")
    if d > src:
        raise SynthError(f"cannot project {src}-dimensional features onto {d} dimensions")
    frame = random_orthogonal(src, np.random.default_rng(seed))[:, :d]
    out = F.data @ frame
    if kind == "nonlinear":
        out = np.tanh(out)
    return FeatureMatrix(out, list(F.subject_ids))


def synthetic_timeseries(latent: FeatureMatrix, r: int = 6, T: int = 200,
                         coupling: float = 0.8, seed: int = 0) -> np.ndarray:
    """Per-subject r x T component courses whose covariance tracks ``latent``.

    Subject i's courses are ``A_i z`` with z white noise and mixing matrix
    ``A_i = I + coupling * sum_j latent[i, j] * U_j`` for fixed random
    symmetric U_j, so network matrices inherit the latent geometry.
    """
    rng = np.random.default_rng(seed)
    lat = latent.data
    U = rng.standard_normal((lat.shape[1], r, r)) / np.sqrt(r)
    U = (U + U.transpose(0, 2, 1)) / 2
    out = np.empty((lat.shape[0], r, T))
    for i, row in enumerate(lat):
        A = np.eye(r) + coupling * np.tensordot(row, U, axes=1)
        out[i] = A @ rng.standard_normal((r, T))
    return out
