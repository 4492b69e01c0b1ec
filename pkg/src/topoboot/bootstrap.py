"""Block-constrained topological bootstrap.

A plan draws R subsamples that never split a block. Each replicate's image
diagram is registered against the ambient diagram: an ambient interval and an
image interval match when they die on the same simplex, and the pair's
affinity is the Jaccard index of the two intervals. Prevalence is the mean
affinity over replicates.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .diagram import PersistenceDiagram, PersistenceInterval
from .imageph import ImageDiagram, SubsampleMask, image_persistence
from .metricspace import as_distance_matrix
from .vrph import FiltrationParams, vr_persistence


class BootstrapError(ValueError):
    pass


@dataclass(frozen=True)
class BlockStructure:
    """One block id per subject; subjects sharing an id are drawn together."""
    block_ids: tuple

    def __post_init__(self):
        object.__setattr__(self, "block_ids", tuple(str(b) for b in self.block_ids))

    @classmethod
    def singletons(cls, n: int) -> "BlockStructure":
        return cls(tuple(f"s{i}" for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.block_ids)

    def groups(self) -> list:
        """Subject index arrays, one per block, in sorted block-id order."""
        ids = np.array(self.block_ids, dtype=object)
        return [np.flatnonzero(ids == b) for b in sorted(set(self.block_ids))]

    @property
    def largest(self) -> int:
        return max(len(g) for g in self.groups())


@dataclass
class BootstrapPlan:
    R: int
    fraction: float
    master_seed: int
    masks: list
    metadata: dict = field(default_factory=dict)

    def to_dict(self, block_file: Optional[str] = None) -> dict:
        return {"R": self.R, "fraction": self.fraction, "master_seed": self.master_seed,
                "block_file": block_file}


def replicate_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(index)]))


def plan_bootstraps(N: int, blocks: Optional[BlockStructure] = None, R: int = 1000,
                    fraction: float = 0.9, master_seed: int = 0) -> BootstrapPlan:
    """Draw R block-respecting subsamples of ``ceil(fraction * N)`` subjects.

    Blocks are visited in a seeded random order and taken whole until the
    target is reached, so a mask can overshoot by up to (largest block - 1).
    """
    if not 0 < fraction <= 1:
        raise BootstrapError(f"fraction must lie in (0, 1], got {fraction}")
    if R < 1:
        raise BootstrapError("R must be at least 1")
    blocks = BlockStructure.singletons(N) if blocks is None else blocks
    if blocks.n != N:
        raise BootstrapError(f"block structure covers {blocks.n} subjects, expected {N}")
    target = math.ceil(fraction * N)
    groups = blocks.groups()
    largest = max(len(g) for g in groups)
    if largest > target:
        raise BootstrapError(f"a block of size {largest} exceeds the subsample target {target}")
    masks = []
    for r in range(R):
        order = replicate_rng(master_seed, r).permutation(len(groups))
        inc = np.zeros(N, dtype=bool)
        count = 0
        for g in order:
            if count >= target:
                break
            inc[groups[g]] = True
            count += len(groups[g])
        masks.append(SubsampleMask(inc))
    sizes = [m.count for m in masks]
    meta = {"target": target, "largest_block": largest, "n_blocks": len(groups),
            "max_overshoot": max(sizes) - target, "overshoot_bound": largest - 1}
    return BootstrapPlan(R, fraction, int(master_seed), masks, meta)


# ---------------------------------------------------------------- registration

@dataclass(frozen=True)
class MatchRecord:
    ambient_interval_id: int
    replicate_index: int
    replicate_interval_id: Optional[int]
    affinity: float

    def __post_init__(self):
        if not 0.0 <= self.affinity <= 1.0:
            raise BootstrapError(f"affinity {self.affinity} outside [0, 1]")
        if (self.affinity == 0.0) != (self.replicate_interval_id is None):
            raise BootstrapError("affinity is zero exactly when there is no match")


def ambient_intervals(amb: PersistenceDiagram, k: int) -> list:
    """The finite k-intervals that registration scores, in diagram order."""
    return amb.in_dim(k, finite_only=True)


def jaccard(b1: float, d1: float, b2: float, d2: float) -> float:
    inter = min(d1, d2) - max(b1, b2)
    if inter <= 0:
        return 0.0
    return inter / (max(d1, d2) - min(b1, b2))


def register_cycles(amb: PersistenceDiagram, img: ImageDiagram, k: int = 1,
                    replicate_index: int = 0) -> list:
    """One MatchRecord per finite ambient k-interval."""
    if amb.source_label != img.source_label:
        raise BootstrapError(f"provenance mismatch: ambient {amb.source_label!r} "
                             f"vs image {img.source_label!r}")
    by_death = {}
    for j, iv in enumerate(img.in_dim(k)):
        if iv.death_simplex is not None:
            by_death[tuple(iv.death_simplex)] = (j, iv)
    out = []
    for i, iv in enumerate(ambient_intervals(amb, k)):
        hit = by_death.get(tuple(iv.death_simplex)) if iv.death_simplex is not None else None
        alpha = 0.0
        if hit is not None:
            alpha = jaccard(iv.birth, iv.death, hit[1].birth_sub, hit[1].death_amb)
        out.append(MatchRecord(i, replicate_index, hit[0] if alpha > 0 else None, alpha))
    return out


def _check_records(records: Sequence[Sequence[MatchRecord]], n_amb: int):
    for r, recs in enumerate(records):
        ids = sorted(m.ambient_interval_id for m in recs)
        if ids != list(range(n_amb)):
            raise BootstrapError(f"replicate {r} does not cover every ambient interval once")
        if any(m.replicate_index != r for m in recs):
            raise BootstrapError(f"replicate {r} holds records of another replicate")


def prevalence_scores(amb: PersistenceDiagram, records: Sequence[Sequence[MatchRecord]],
                      k: int = 1, R: Optional[int] = None) -> PersistenceDiagram:
    """Finite k-intervals of ``amb`` with prevalence = mean affinity.

    ``records[r]`` lists replicate r's MatchRecords. Passing ``R`` asserts the
    replicate count.
    """
    ivs = ambient_intervals(amb, k)
    if R is not None and len(records) != R:
        raise BootstrapError(f"expected {R} replicates, got {len(records)}")
    if not records:
        raise BootstrapError("no replicates")
    _check_records(records, len(ivs))
    alpha = np.zeros((len(records), len(ivs)))
    for r, recs in enumerate(records):
        for m in recs:
            alpha[r, m.ambient_interval_id] = m.affinity
    # summation in replicate order keeps the result independent of scheduling
    prev = alpha.mean(axis=0)
    out = [PersistenceInterval(iv.dim, iv.birth, iv.death, iv.birth_simplex,
                               iv.death_simplex, float(p)) for iv, p in zip(ivs, prev)]
    meta = dict(amb.metadata)
    meta["bootstrap_replicates"] = len(records)
    return PersistenceDiagram(out, source_label=amb.source_label, metadata=meta)


def matched_betti(records: Sequence[Sequence[MatchRecord]]) -> np.ndarray:
    """Per replicate, the number of nonzero-affinity matches."""
    return np.array([sum(1 for m in recs if m.affinity > 0) for recs in records], dtype=int)


# ---------------------------------------------------------------- runner

@dataclass
class BootstrapResult:
    ambient: PersistenceDiagram
    prevalence: PersistenceDiagram
    records: list
    betti: np.ndarray
    plan: BootstrapPlan
    image_diagrams: Optional[list] = None


def run_bootstrap(D, plan: BootstrapPlan, k: int = 1,
                  params: Optional[FiltrationParams] = None, label: str = "",
                  threads: int = 1, keep_images: bool = False,
                  ambient: Optional[PersistenceDiagram] = None) -> BootstrapResult:
    """Ambient diagram, per-replicate registration, prevalence and matched Betti.

    Replicates run on a thread pool (the reduction kernels release the GIL);
    results are collected by replicate index, so output does not depend on
    ``threads``.
    """
    Dm = as_distance_matrix(D)
    params = params or FiltrationParams(max_dim=max(1, k))
    if ambient is None:
        ambient = vr_persistence(Dm, params, label=label)
    label = ambient.source_label

    def one(r):
        img = image_persistence(Dm, plan.masks[r], params, dims=[k], label=label)
        return register_cycles(ambient, img, k, r), (img if keep_images else None)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, range(plan.R)))
    else:
        results = [one(r) for r in range(plan.R)]
    records = [sorted(rec, key=lambda m: m.ambient_interval_id) for rec, _ in results]
    prev = prevalence_scores(ambient, records, k, plan.R)
    images = [img for _, img in results] if keep_images else None
    return BootstrapResult(ambient, prev, records, matched_betti(records), plan, images)


def records_to_rows(records: Sequence[Sequence[MatchRecord]]) -> list:
    return [[m.replicate_index, m.ambient_interval_id,
             "" if m.replicate_interval_id is None else m.replicate_interval_id,
             repr(m.affinity)]
            for recs in records for m in recs]


def plan_to_json(plan: BootstrapPlan, block_file: Optional[str] = None) -> str:
    return json.dumps(plan.to_dict(block_file), indent=1, sort_keys=True)
