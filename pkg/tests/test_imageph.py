import json
import math
from itertools import product

import numpy as np
import pytest
from conftest import euclidean, random_metric, regular_polygon

from topoboot.imageph import (ImageDiagram, SubsampleMask, _induced_rank, image_persistence,
                              induced_rank_oracle)
from topoboot.vrph import FiltrationParams, PersistenceError, vr_persistence

P1 = FiltrationParams(1)


def square():
    return euclidean(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


def circle_with_core():
    a = math.pi / 4 + math.pi / 2 * np.arange(4)
    inner = np.vstack([[0.0, 0.0], 0.5 * np.column_stack([np.cos(a), np.sin(a)])])
    return euclidean(np.vstack([regular_polygon(20), inner]))


def image_count(img, k, r, s):
    return sum(1 for iv in img.in_dim(k) if iv.birth_sub <= r and iv.death_amb > s)


def critical_pairs(d, thr):
    vals = sorted(set(d[np.triu_indices(d.shape[0], 1)]) | {0.0})
    vals = [v for v in vals if v <= thr]
    return [(r, s) for r, s in product(vals, vals) if r <= s]


def test_identity_inclusion_equals_finite_vr(rng):
    for _ in range(10):
        d = random_metric(rng, int(rng.integers(3, 9)))
        img = image_persistence(d, SubsampleMask(np.ones(d.shape[0], bool)), P1)
        fin = [iv for iv in img.intervals if iv.is_finite]
        vr = vr_persistence(d, P1).finite()
        assert sorted((i.dim, i.birth_sub, i.death_amb) for i in fin) == vr.values()


def test_square_minus_corner_has_no_image_cycle():
    img = image_persistence(square(), SubsampleMask.from_indices(4, [0, 1, 2]), P1)
    assert img.in_dim(1) == []


def test_circle_with_core_frozen_interval():
    d = circle_with_core()
    inc = np.r_[np.ones(20, bool), np.zeros(5, bool)]
    img = image_persistence(d, SubsampleMask(inc), P1)
    h1 = img.in_dim(1)
    assert len(h1) == 1
    assert h1[0].birth_sub == pytest.approx(2 * math.sin(math.pi / 20), abs=1e-15)
    assert h1[0].death_amb == pytest.approx(0.7368128791039503, abs=1e-15)
    # rank bookkeeping around both endpoints
    b, dd = h1[0].birth_sub, h1[0].death_amb
    for r, s in [(b - 1e-9, b), (b, b), (b, dd - 1e-9), (b, dd), (dd - 1e-9, dd - 1e-9)]:
        assert _induced_rank(d, inc, 1, r, s) == image_count(img, 1, r, s)


@pytest.mark.parametrize("threshold", [math.inf, None])
def test_rank_oracle_agreement(rng, threshold):
    params = FiltrationParams(1, threshold)
    for _ in range(12):
        n = int(rng.integers(4, 8))
        d = random_metric(rng, n)
        inc = np.zeros(n, bool)
        inc[rng.choice(n, int(rng.integers(3, n + 1)), replace=False)] = True
        img = image_persistence(d, SubsampleMask(inc), params)
        thr = img.metadata["threshold"]
        for k in (0, 1):
            for r, s in critical_pairs(d, thr):
                assert induced_rank_oracle(d, inc, k, r, s) == image_count(img, k, r, s)


def test_sandwich_property(rng):
    for _ in range(15):
        n = int(rng.integers(5, 12))
        x = rng.normal(size=(n, 2))
        d = euclidean(x)
        inc = np.zeros(n, bool)
        inc[rng.choice(n, n - 2, replace=False)] = True
        img = image_persistence(d, SubsampleMask(inc), P1)
        thr = img.metadata["threshold"]
        amb = vr_persistence(d, FiltrationParams(1, thr))
        sub = vr_persistence(d[np.ix_(inc, inc)], FiltrationParams(1, thr))
        for k in (0, 1):
            births = sorted(iv.birth for iv in sub.in_dim(k))
            deaths = sorted(iv.death for iv in amb.in_dim(k))
            for iv in img.in_dim(k):
                assert iv.birth_sub in births
                births.remove(iv.birth_sub)
                assert iv.death_amb in deaths
                deaths.remove(iv.death_amb)


def test_superset_mask_matches_no_fewer_ambient_deaths(rng):
    for _ in range(30):
        n = int(rng.integers(5, 9))
        d = random_metric(rng, n)
        amb = {iv.death_simplex for iv in vr_persistence(d, P1).in_dim(1, finite_only=True)}
        small = np.zeros(n, bool)
        small[rng.choice(n, 3, replace=False)] = True
        big = small.copy()
        big[rng.choice(np.flatnonzero(~small), int(rng.integers(1, n - 2)), replace=False)] = True

        def matched(mask):
            img = image_persistence(d, SubsampleMask(mask), P1)
            return sum(1 for iv in img.in_dim(1) if iv.death_simplex in amb)

        assert matched(big) >= matched(small)


def test_oracle_examples():
    d = square()
    full = np.ones(4, bool)
    assert induced_rank_oracle(d, full, 1, 1.0, 1.2) == 1
    assert induced_rank_oracle(d, full, 1, 1.0, 1.0) == 1
    assert induced_rank_oracle(d, full, 0, 1.0, 1.0) == 1
    assert induced_rank_oracle(d, full, 0, 0.5, 0.5) == 4
    assert induced_rank_oracle(d, np.array([1, 1, 1, 0], bool), 1, 2.0, 2.0) == 0
    with pytest.raises(PersistenceError, match="N <= 8"):
        induced_rank_oracle(circle_with_core(), np.ones(25, bool), 1, 0.5, 0.6)
    with pytest.raises(PersistenceError, match="r <= s"):
        induced_rank_oracle(d, full, 1, 2.0, 1.0)


def test_mask_errors():
    d = square()
    with pytest.raises(PersistenceError, match="at least 3"):
        image_persistence(d, SubsampleMask.from_indices(4, [0, 1]), P1)
    with pytest.raises(PersistenceError, match="length"):
        image_persistence(d, SubsampleMask(np.ones(3, bool)), P1)
    with pytest.raises(PersistenceError, match="max_dim"):
        image_persistence(d, SubsampleMask(np.ones(4, bool)), FiltrationParams(0))
    with pytest.raises(PersistenceError, match="sentinel"):
        image_persistence(np.zeros((4, 4)), SubsampleMask(np.ones(4, bool)), P1)


def test_stored_intervals_have_positive_length(rng):
    for _ in range(10):
        d = random_metric(rng, 8)
        img = image_persistence(d, SubsampleMask.from_indices(8, [0, 2, 3, 5, 7]), P1)
        assert all(iv.birth_sub < iv.death_amb for iv in img.intervals)


def test_json_and_mask_round_trip(rng):
    mask = SubsampleMask(rng.uniform(size=13) < 0.6)
    assert np.array_equal(SubsampleMask.from_base64(mask.to_base64(), 13).included,
                          mask.included)
    d = random_metric(rng, 13)
    img = image_persistence(d, SubsampleMask(np.r_[np.ones(10, bool), np.zeros(3, bool)]),
                            P1, label="x")
    back = ImageDiagram.from_dict(json.loads(img.to_json()))
    assert back.intervals == img.intervals
    assert np.array_equal(back.mask.included, img.mask.included)
    assert '"birth_sub"' in img.to_json() and '"death_amb"' in img.to_json()
