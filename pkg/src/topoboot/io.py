"""Feature, distance, block and diagram files.

Feature matrices are CSV (header row, subject id first) or raw little-endian
float64 with a JSON sidecar ``{"rows", "cols", "subject_ids"}``. An SPSD
stack is a JSON manifest listing one such file per subject.
"""
from __future__ import annotations

import csv
import io as _stdio
import json
import os
from pathlib import Path

import numpy as np

from .bootstrap import BlockStructure
from .diagram import PersistenceDiagram
from .metricspace import DistanceMatrix, FeatureError, FeatureMatrix, SpsdStack


def _fmt(x: float) -> str:
    return repr(float(x))


def write_text(path, text: str) -> None:
    """Write via a temp file and rename, so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(rows) -> str:
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def write_csv(path, rows) -> None:
    write_text(path, _csv_text(rows))


# ---------------------------------------------------------------- features

def read_feature_csv(path) -> FeatureMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise FeatureError(f"{path}: expected a header and at least one subject row")
    ids = [r[0] for r in rows[1:]]
    try:
        data = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise FeatureError(f"{path}: {exc}") from None
    return FeatureMatrix(data, ids)


def write_feature_csv(path, F: FeatureMatrix, names=None) -> None:
    names = names or [f"f{j}" for j in range(F.data.shape[1])]
    rows = [["subject_id", *names]]
    rows += [[sid, *(_fmt(v) for v in row)] for sid, row in zip(F.subject_ids, F.data)]
    write_csv(path, rows)


def read_binary(path) -> tuple:
    """(array, subject_ids) from ``path`` and its ``.json`` sidecar."""
    side = json.loads(Path(str(path) + ".json").read_text())
    arr = np.fromfile(path, dtype="<f8")
    rows, cols = int(side["rows"]), int(side["cols"])
    if arr.size != rows * cols:
        raise FeatureError(f"{path}: {arr.size} values, sidecar promises {rows}x{cols}")
    return arr.reshape(rows, cols), side.get("subject_ids")


def write_binary(path, arr: np.ndarray, subject_ids=None) -> None:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr.tofile(path)
    side = {"rows": arr.shape[0], "cols": arr.shape[1], "subject_ids": subject_ids}
    write_text(str(path) + ".json", json.dumps(side, indent=1))


def read_features(path):
    """Dispatch on extension: .csv, .bin (with sidecar) or a stack manifest .json."""
    path = Path(path)
    if path.suffix == ".csv":
        return read_feature_csv(path)
    if path.suffix == ".json":
        return read_spsd_stack(path)
    arr, ids = read_binary(path)
    return FeatureMatrix(arr, ids)


def write_spsd_stack(manifest, S: SpsdStack, psd: bool = True) -> None:
    """One binary m x m file per subject next to a manifest listing them.

    ``psd=False`` marks stacks (partial correlations) that are symmetric but
    not guaranteed positive semidefinite.
    """
    manifest = Path(manifest)
    files = []
    for sid, m in zip(S.subject_ids, S.matrices):
        name = f"{manifest.stem}_{sid}.bin"
        write_binary(manifest.parent / name, m, None)
        files.append({"subject_id": sid, "file": name})
    write_text(manifest, json.dumps({"kind": "spsd_stack", "psd": psd, "subjects": files},
                                     indent=1))


def read_spsd_stack(manifest) -> SpsdStack:
    manifest = Path(manifest)
    spec = json.loads(manifest.read_text())
    if spec.get("kind") != "spsd_stack":
        raise FeatureError(f"{manifest}: not an SPSD stack manifest")
    mats, ids = [], []
    for ent in spec["subjects"]:
        arr, _ = read_binary(manifest.parent / ent["file"])
        mats.append(arr)
        ids.append(ent["subject_id"])
    return SpsdStack(np.stack(mats), ids, check_psd=bool(spec.get("psd", True)))


def read_timeseries(path) -> tuple:
    """A time-series set stored as an (N, r, T) .npy array plus optional ids file."""
    arr = np.load(path)
    ids_path = Path(str(path) + ".ids")
    ids = ids_path.read_text().split() if ids_path.exists() else None
    return arr, ids


# ---------------------------------------------------------------- distances

def write_distance_csv(path, D: DistanceMatrix) -> None:
    rows = [["", *D.subject_ids]]
    rows += [[sid, *(_fmt(v) for v in row)] for sid, row in zip(D.subject_ids, D.d)]
    write_csv(path, rows)


def read_distance_csv(path) -> DistanceMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    ids = rows[0][1:]
    d = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)
    if [r[0] for r in rows[1:]] != ids:
        raise FeatureError(f"{path}: row ids do not match the header")
    return DistanceMatrix(d, ids)


# ---------------------------------------------------------------- blocks / diagrams

def read_blocks(path, subject_ids) -> BlockStructure:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and rows[0][:2] == ["subject_id", "block_id"]:
        rows = rows[1:]
    mapping = {r[0]: r[1] for r in rows}
    missing = [s for s in subject_ids if s not in mapping]
    if missing:
        raise FeatureError(f"{path}: no block id for subject {missing[0]}")
    return BlockStructure(tuple(mapping[s] for s in subject_ids))


def write_blocks(path, subject_ids, blocks: BlockStructure) -> None:
    write_csv(path, [["subject_id", "block_id"], *zip(subject_ids, blocks.block_ids)])


def read_diagram(path) -> PersistenceDiagram:
    return PersistenceDiagram.from_json(Path(path).read_text())


def write_diagram(path, diagram) -> None:
    write_text(path, diagram.to_json() + "\n")
