"""Config-driven study: per-cell bootstrap, then cross-cell distances and clustering.

Layout under ``output_dir``::

    cells/<label>/distance.csv     subject-pairwise dissimilarities
    cells/<label>/ambient.json     full VR diagram
    cells/<label>/prevalence.json  finite k-intervals with prevalence
    cells/<label>/matches.csv      one row per (replicate, ambient interval)
    cells/<label>/betti.csv        matched Betti number per replicate
    cells/<label>/done.json        resume marker (cell hash + output digests)
    study/prevalence_wasserstein.csv, study/wasserstein.csv
    study/linkage.csv, study/dendrogram.nwk, study/clustermap.json
    manifest.json
"""
from __future__ import annotations

import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import io as tio
from .bootstrap import BlockStructure, plan_bootstraps, records_to_rows, run_bootstrap
from .diagdist import pairwise_distances, ward_cluster
from .metricspace import (FEATURE_KINDS, SPSD_METRICS, VECTOR_METRICS, FeatureMatrix,
                          compute_metric, extract_features)
from .vrph import FiltrationParams

STORED_KINDS = ("vector", "spsd")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CellSpec:
    label: str
    feature_file: str
    feature_kind: str
    metric: str
    metric_options: dict = field(default_factory=dict)


@dataclass(frozen=True)
class StudyConfig:
    cells: tuple
    R: int = 1000
    fraction: float = 0.9
    master_seed: int = 0
    block_file: Optional[str] = None
    k: int = 1
    max_dim: int = 1
    threshold: Optional[float] = None
    p: float = 2.0
    output_dir: str = "topoboot_out"
    base_dir: str = "."

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def canonical(self) -> dict:
        """Everything that determines results (output location excluded)."""
        return {"cells": [asdict(c) for c in self.cells],
                "bootstrap": {"R": self.R, "fraction": self.fraction,
                              "master_seed": self.master_seed, "block_file": self.block_file},
                "homology": {"k": self.k, "max_dim": self.max_dim, "threshold": self.threshold},
                "wasserstein": {"p": self.p}}

    @property
    def params(self) -> FiltrationParams:
        return FiltrationParams(self.max_dim, self.threshold)


def _metric_ok(kind, metric):
    vector = kind in ("vector", "amplitude", "map")
    return metric in (VECTOR_METRICS if vector else SPSD_METRICS)


def parse_config(obj: dict, base_dir: str = ".", seed: Optional[int] = None,
                 output_dir: Optional[str] = None) -> StudyConfig:
    """Validate a StudyConfig JSON document; raises ConfigError."""
    try:
        cells = tuple(CellSpec(c["label"], c["feature_file"], c["feature_kind"], c["metric"],
                               dict(c.get("metric_options", {}))) for c in obj["cells"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed cell entry: missing {exc}") from None
    if not cells:
        raise ConfigError("config lists no cells")
    labels = [c.label for c in cells]
    if len(set(labels)) != len(labels):
        raise ConfigError("cell labels must be unique")
    for c in cells:
        if not c.label or "/" in c.label:
            raise ConfigError(f"invalid cell label {c.label!r}")
        if c.feature_kind not in STORED_KINDS + FEATURE_KINDS:
            raise ConfigError(f"cell {c.label}: unknown feature_kind {c.feature_kind!r}")
        if c.metric not in VECTOR_METRICS + SPSD_METRICS:
            raise ConfigError(f"cell {c.label}: unknown metric {c.metric!r}")
        if not _metric_ok(c.feature_kind, c.metric):
            raise ConfigError(f"cell {c.label}: metric {c.metric} does not accept "
                              f"{c.feature_kind} features")
    boot = obj.get("bootstrap", {})
    hom = obj.get("homology", {})
    cfg = StudyConfig(
        cells=cells,
        R=int(boot.get("R", 1000)),
        fraction=float(boot.get("fraction", 0.9)),
        master_seed=int(boot.get("master_seed", 0) if seed is None else seed),
        block_file=boot.get("block_file"),
        k=int(hom.get("k", 1)),
        max_dim=int(hom.get("max_dim", max(1, int(hom.get("k", 1))))),
        threshold=hom.get("threshold"),
        p=float(obj.get("wasserstein", {}).get("p", 2.0)),
        output_dir=output_dir or obj.get("output_dir", "topoboot_out"),
        base_dir=base_dir,
    )
    if cfg.R < 1 or not 0 < cfg.fraction <= 1:
        raise ConfigError("bootstrap needs R >= 1 and 0 < fraction <= 1")
    if cfg.k < 0 or cfg.max_dim < max(cfg.k, 1) or cfg.max_dim > 2:
        raise ConfigError("homology needs 0 <= k <= max_dim <= 2 and max_dim >= 1")
    if cfg.p < 1:
        raise ConfigError("wasserstein p must be >= 1")
    return cfg


def load_config(path, seed: Optional[int] = None, output_dir: Optional[str] = None) -> StudyConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(obj, str(path.parent), seed, output_dir)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def config_hash(cfg: StudyConfig) -> str:
    return _sha256(json.dumps(cfg.canonical(), sort_keys=True).encode())


# ---------------------------------------------------------------- cells

def load_cell_features(cfg: StudyConfig, cell: CellSpec):
    path = cfg.resolve(cell.feature_file)
    if cell.feature_kind == "vector":
        feats = tio.read_features(path)
        if not isinstance(feats, FeatureMatrix):
            raise ConfigError(f"cell {cell.label}: {path} is not a vector feature file")
        return feats
    if cell.feature_kind == "spsd":
        return tio.read_spsd_stack(path)
    ts, ids = tio.read_timeseries(path)
    return extract_features(list(ts), cell.feature_kind, ids)


def _input_digest(cfg: StudyConfig, cell: CellSpec) -> str:
    path = cfg.resolve(cell.feature_file)
    h = hashlib.sha256(path.read_bytes())
    if cell.feature_kind == "spsd":
        for ent in json.loads(path.read_text())["subjects"]:
            h.update((path.parent / ent["file"]).read_bytes())
    if cfg.block_file:
        h.update(cfg.resolve(cfg.block_file).read_bytes())
    return h.hexdigest()


def cell_hash(cfg: StudyConfig, cell: CellSpec) -> str:
    canon = cfg.canonical()
    canon.pop("cells")
    canon.pop("wasserstein")
    canon["cell"] = asdict(cell)
    canon["input"] = _input_digest(cfg, cell)
    return _sha256(json.dumps(canon, sort_keys=True).encode())


def _digests(cell_dir: Path) -> dict:
    return {p.name: _sha256(p.read_bytes()) for p in sorted(cell_dir.iterdir())
            if p.is_file() and p.name != "done.json"}


def run_cell(cfg: StudyConfig, cell: CellSpec, out: Path, threads: int = 1,
             keep_images: bool = False) -> dict:
    """Compute and persist one cell; returns its manifest entry."""
    feats = load_cell_features(cfg, cell)
    D = compute_metric(feats, cell.metric, **cell.metric_options)
    blocks = tio.read_blocks(cfg.resolve(cfg.block_file), D.subject_ids) if cfg.block_file \
        else BlockStructure.singletons(D.n)
    plan = plan_bootstraps(D.n, blocks, cfg.R, cfg.fraction, cfg.master_seed)
    res = run_bootstrap(D, plan, cfg.k, cfg.params, label=cell.label, threads=threads,
                        keep_images=keep_images)
    out.mkdir(parents=True, exist_ok=True)
    tio.write_distance_csv(out / "distance.csv", D)
    tio.write_diagram(out / "ambient.json", res.ambient)
    tio.write_diagram(out / "prevalence.json", res.prevalence)
    tio.write_csv(out / "matches.csv",
                  [["replicate_index", "ambient_interval_id", "replicate_interval_id",
                    "affinity"], *records_to_rows(res.records)])
    tio.write_csv(out / "betti.csv", [["replicate_index", "beta_matched"],
                                      *[[r, int(b)] for r, b in enumerate(res.betti)]])
    if keep_images:
        for r, img in enumerate(res.image_diagrams):
            tio.write_text(out / "images" / f"replicate_{r:05d}.json", img.to_json() + "\n")
    n_k = len(res.prevalence.in_dim(cfg.k))
    return {"status": "ok", "n_subjects": D.n, "n_intervals": n_k, "trivial": n_k == 0,
            "plan": {**plan.to_dict(cfg.block_file), **plan.metadata}}


# ---------------------------------------------------------------- study

def _write_matrix(path, labels, M):
    tio.write_csv(path, [["", *labels], *[[lab, *(repr(float(v)) for v in row)]
                                          for lab, row in zip(labels, M)]])


def run_study_level(cfg: StudyConfig, labels: list, root: Path, threads: int = 1) -> dict:
    study = root / "study"
    diagrams = [tio.read_diagram(root / "cells" / lab / "prevalence.json") for lab in labels]
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        Wr = pairwise_distances(diagrams, cfg.k, cfg.p, weighted=True, pool=pool)
        W = pairwise_distances(diagrams, cfg.k, cfg.p, weighted=False, pool=pool)
    finally:
        if pool is not None:
            pool.shutdown()
    _write_matrix(study / "prevalence_wasserstein.csv", labels, Wr)
    _write_matrix(study / "wasserstein.csv", labels, W)
    info = {"clustered": labels, "bounded_by_wasserstein": bool(np.all(Wr <= W + 1e-12))}
    if len(labels) >= 2:
        dend = ward_cluster(Wr, labels)
        tio.write_csv(study / "linkage.csv", [["cluster_a", "cluster_b", "height", "size"],
                                              *[[int(a), int(b), repr(float(h)), int(s)]
                                                for a, b, h, s in dend.merges]])
        tio.write_text(study / "dendrogram.nwk", dend.newick() + "\n")
        order = dend.leaves()
        cmap = {"row_order": [labels[i] for i in order],
                "matrix": Wr[np.ix_(order, order)].tolist(),
                "metric": f"prevalence-weighted W{cfg.p:g}, dim {cfg.k}"}
        tio.write_text(study / "clustermap.json", json.dumps(cmap, indent=1) + "\n")
        info["monotone_linkage"] = dend.metadata["monotone"]
    return info


def _versions() -> dict:
    import scipy
    return {"topoboot": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": "%d.%d" % sys.version_info[:2]}


def run_pipeline(cfg: StudyConfig, threads: int = 1, keep_images: bool = False,
                 log=None) -> int:
    """Run every cell (resuming finished ones) and the study-level outputs.

    Returns the process exit code: 0 if every cell succeeded, 3 otherwise.
    """
    log = log or (lambda msg: None)
    root = cfg.resolve(cfg.output_dir) if not Path(cfg.output_dir).is_absolute() \
        else Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    cells = {}
    for cell in cfg.cells:
        cdir = root / "cells" / cell.label
        marker = cdir / "done.json"
        try:
            h = cell_hash(cfg, cell)
        except OSError as exc:
            cells[cell.label] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
            log(f"cell {cell.label}: failed ({exc})")
            continue
        if marker.exists():
            done = json.loads(marker.read_text())
            if done.get("cell_hash") == h and done.get("outputs") == _digests(cdir):
                cells[cell.label] = done["entry"]
                log(f"cell {cell.label}: up to date, skipped")
                continue
        try:
            entry = run_cell(cfg, cell, cdir, threads, keep_images)
        except Exception as exc:  # one bad cell must not sink the study
            cells[cell.label] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
            log(f"cell {cell.label}: failed ({exc})")
            continue
        entry["outputs"] = _digests(cdir)
        tio.write_text(marker, json.dumps({"cell_hash": h, "entry": entry,
                                           "outputs": entry["outputs"]},
                                          indent=1, sort_keys=True) + "\n")
        cells[cell.label] = entry
        flag = " (trivial: empty diagram)" if entry["trivial"] else ""
        log(f"cell {cell.label}: {entry['n_intervals']} intervals{flag}")
    survivors = [c.label for c in cfg.cells
                 if cells[c.label]["status"] == "ok" and not cells[c.label]["trivial"]]
    study = run_study_level(cfg, survivors, root, threads) if survivors else {"clustered": []}
    study_dir = root / "study"
    if study_dir.exists():
        study["outputs"] = {p.name: _sha256(p.read_bytes()) for p in sorted(study_dir.iterdir())}
    manifest = {
        "config_hash": config_hash(cfg),
        "config": cfg.canonical(),
        "seeds": {"master_seed": cfg.master_seed,
                  "replicate_seed_rule": "SeedSequence([master_seed, replicate_index])"},
        "versions": _versions(),
        "cells": cells,
        "trivial_cells": [lab for lab, e in cells.items() if e.get("trivial")],
        "failed_cells": [lab for lab, e in cells.items() if e["status"] != "ok"],
        "study": study,
    }
    tio.write_text(root / "manifest.json",
                   json.dumps(manifest, indent=1, sort_keys=True, allow_nan=False) + "\n")
    return 3 if manifest["failed_cells"] else 0


# ---------------------------------------------------------------- demo study

def write_synthetic_study(directory, n: int = 100, R: int = 50, seed: int = 0) -> Path:
    """Write a six-cell synthetic study (data, block file and config) to ``directory``."""
    from .synth import ManifoldSpec, random_representation, sample_manifold, synthetic_timeseries
    d = Path(directory)
    data = d / "data"
    latent = sample_manifold(ManifoldSpec("circle", n, 0.05, 8, seed))
    blob = sample_manifold(ManifoldSpec("gaussian_blob", n, 0.0, 6, seed + 1))
    blob = FeatureMatrix(blob.data, latent.subject_ids)
    tio.write_feature_csv(data / "circle_projection.csv",
                          random_representation(latent, "projection", 6, seed + 2))
    tio.write_feature_csv(data / "circle_tanh.csv",
                          random_representation(latent, "nonlinear", 6, seed + 3))
    tio.write_feature_csv(data / "blob.csv", blob)
    ts = synthetic_timeseries(random_representation(latent, "projection", 2, seed + 4),
                              r=6, T=400, coupling=0.6, seed=seed + 5)
    data.mkdir(parents=True, exist_ok=True)
    np.save(data / "timeseries.npy", ts)
    tio.write_text(data / "timeseries.npy.ids", "\n".join(latent.subject_ids) + "\n")
    rng = np.random.default_rng(seed + 6)
    fam = []
    while len(fam) < n:
        fam += [f"fam{len(set(fam)):03d}"] * int(rng.integers(1, 4))
    tio.write_blocks(data / "blocks.csv", latent.subject_ids, BlockStructure(tuple(fam[:n])))
    cells = [
        {"label": "circle_projection_v2", "feature_file": "data/circle_projection.csv",
         "feature_kind": "vector", "metric": "v2"},
        {"label": "circle_tanh_v1", "feature_file": "data/circle_tanh.csv",
         "feature_kind": "vector", "metric": "v1"},
        {"label": "blob_v2", "feature_file": "data/blob.csv",
         "feature_kind": "vector", "metric": "v2"},
        {"label": "netmat_pd1", "feature_file": "data/timeseries.npy",
         "feature_kind": "netmat", "metric": "pd1"},
        {"label": "netmat_pd2", "feature_file": "data/timeseries.npy",
         "feature_kind": "netmat", "metric": "pd2"},
        {"label": "partial_netmat_pd2", "feature_file": "data/timeseries.npy",
         "feature_kind": "partial_netmat", "metric": "pd2"},
    ]
    cfg = {"cells": cells,
           "bootstrap": {"R": R, "fraction": 0.9, "master_seed": seed,
                         "block_file": "data/blocks.csv"},
           "homology": {"k": 1, "max_dim": 1, "threshold": None},
           "wasserstein": {"p": 2},
           "output_dir": "out"}
    path = d / "synthetic_study.json"
    tio.write_text(path, json.dumps(cfg, indent=1) + "\n")
    return path
