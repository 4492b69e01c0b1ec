import numpy as np
import pytest

from topoboot import io as tio
from topoboot.bootstrap import BlockStructure
from topoboot.diagram import diagram_from_pairs
from topoboot.metricspace import DistanceMatrix, FeatureError, FeatureMatrix, SpsdStack


def test_feature_csv_round_trip_is_exact(tmp_path, rng):
    F = FeatureMatrix(rng.normal(size=(5, 3)), [f"s{i}" for i in range(5)])
    tio.write_feature_csv(tmp_path / "f.csv", F)
    G = tio.read_features(tmp_path / "f.csv")
    assert np.array_equal(F.data, G.data) and G.subject_ids == F.subject_ids


def test_binary_round_trip(tmp_path, rng):
    a = rng.normal(size=(4, 6))
    tio.write_binary(tmp_path / "x.bin", a, ["a", "b", "c", "d"])
    G = tio.read_features(tmp_path / "x.bin")
    assert np.array_equal(G.data, a) and G.subject_ids == ["a", "b", "c", "d"]


def test_binary_size_mismatch(tmp_path):
    tio.write_binary(tmp_path / "x.bin", np.ones((2, 2)))
    (tmp_path / "x.bin").write_bytes(b"\0" * 24)
    with pytest.raises(FeatureError, match="sidecar"):
        tio.read_binary(tmp_path / "x.bin")


@pytest.mark.parametrize("psd", [True, False])
def test_spsd_stack_round_trip(tmp_path, psd):
    mats = np.array([np.eye(3), [[1, 0.2, 0], [0.2, 1, 0], [0, 0, 1]]], dtype=float)
    if not psd:
        mats[1] = [[1, 2, 0], [2, 1, 0], [0, 0, 1]]
    S = SpsdStack(mats, ["p", "q"], check_psd=psd)
    tio.write_spsd_stack(tmp_path / "stack.json", S, psd=psd)
    T = tio.read_features(tmp_path / "stack.json")
    assert np.array_equal(T.matrices, mats) and T.subject_ids == ["p", "q"]


def test_distance_round_trip(tmp_path, rng):
    x = rng.normal(size=(4, 2))
    d = np.linalg.norm(x[:, None] - x[None], axis=-1)
    D = DistanceMatrix(d, ["w", "x", "y", "z"])
    tio.write_distance_csv(tmp_path / "d.csv", D)
    E = tio.read_distance_csv(tmp_path / "d.csv")
    assert np.array_equal(E.d, D.d) and E.subject_ids == D.subject_ids


def test_blocks_round_trip_and_missing(tmp_path):
    ids = ["a", "b", "c"]
    tio.write_blocks(tmp_path / "b.csv", ids, BlockStructure(("f1", "f1", "f2")))
    assert tio.read_blocks(tmp_path / "b.csv", ids).block_ids == ("f1", "f1", "f2")
    with pytest.raises(FeatureError, match="subject d"):
        tio.read_blocks(tmp_path / "b.csv", ids + ["d"])


def test_diagram_round_trip(tmp_path):
    dg = diagram_from_pairs(1, [0.0, 0.5], [1.0, float("inf")], [0.3, 0.0])
    tio.write_diagram(tmp_path / "d.json", dg)
    assert tio.read_diagram(tmp_path / "d.json") == dg


def test_timeseries_ids(tmp_path, rng):
    np.save(tmp_path / "t.npy", rng.normal(size=(2, 3, 5)))
    arr, ids = tio.read_timeseries(tmp_path / "t.npy")
    assert arr.shape == (2, 3, 5) and ids is None
    (tmp_path / "t.npy.ids").write_text("u\nv\n")
    assert tio.read_timeseries(tmp_path / "t.npy")[1] == ["u", "v"]


def test_write_text_leaves_no_temp(tmp_path):
    tio.write_text(tmp_path / "sub" / "a.txt", "hi")
    assert sorted(p.name for p in (tmp_path / "sub").iterdir()) == ["a.txt"]
