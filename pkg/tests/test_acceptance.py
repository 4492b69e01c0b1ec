"""Acceptance suite: one PASS/FAIL line per criterion, summarized at the end of the run."""
import json
import math
import shutil
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from conftest import random_metric
from scipy.spatial.distance import cdist

from topoboot.bootstrap import (BlockStructure, MatchRecord, plan_bootstraps,
                                prevalence_scores, run_bootstrap)
from topoboot.cli import main as cli_main
from topoboot.diagdist import (brute_force_matching_cost, matching_cost,
                               prevalence_wasserstein, wasserstein)
from topoboot.diagram import diagram_from_pairs
from topoboot.imageph import SubsampleMask, image_persistence, induced_rank_oracle
from topoboot.synth import ManifoldSpec, sample_manifold
from topoboot.vrph import FiltrationParams, brute_force_persistence, vr_persistence

REPO = Path(__file__).resolve().parents[1]
SHIPPED_STUDY = REPO / "configs" / "synthetic"


def prevalence_diagram(rng, m):
    b = rng.uniform(0, 1, m)
    return np.column_stack([b, b + rng.uniform(0.01, 1, m), rng.uniform(0, 1, m)])


def records_are_valid(records):
    return all(0.0 <= m.affinity <= 1.0 and (m.affinity == 0) == (m.replicate_interval_id is None)
               for recs in records for m in recs)


# ---------------------------------------------------------------- 1

def test_criterion_01_persistence_oracle(acceptance):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    agree = 0
    cases = 120
    for i in range(cases):
        d = random_metric(rng, int(rng.integers(2, 8)))
        params = FiltrationParams(2, None if i % 2 else math.inf)
        agree += vr_persistence(d, params).values() == brute_force_persistence(d, params).values()
    dt = time.perf_counter() - t0
    acceptance(1, agree == cases and dt < 60,
               f"{agree}/{cases} metrics (N<=7, dims 0-2) equal the oracle; {dt:.1f}s")


# ---------------------------------------------------------------- 2

def test_criterion_02_image_oracle(acceptance):
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    pairs = 60
    checks = mismatches = 0
    for i in range(pairs):
        n = int(rng.integers(4, 9))
        d = random_metric(rng, n)
        inc = np.zeros(n, bool)
        inc[rng.choice(n, int(rng.integers(3, n + 1)), replace=False)] = True
        img = image_persistence(d, SubsampleMask(inc), FiltrationParams(1, None if i % 2 else
                                                                         math.inf))
        thr = img.metadata["threshold"]
        vals = sorted({0.0, *d[np.triu_indices(n, 1)]})
        vals = [v for v in vals if v <= thr]
        for k in (0, 1):
            for a, r in enumerate(vals):
                for s in vals[a:]:
                    got = sum(1 for iv in img.in_dim(k) if iv.birth_sub <= r and iv.death_amb > s)
                    mismatches += got != induced_rank_oracle(d, inc, k, r, s)
                    checks += 1
    dt = time.perf_counter() - t0
    acceptance(2, mismatches == 0 and dt < 120,
               f"{pairs} (metric, mask) pairs, {checks} rank checks, {mismatches} mismatches; "
               f"{dt:.1f}s")


# ---------------------------------------------------------------- 3

def test_criterion_03_premetric_properties(acceptance):
    rng = np.random.default_rng(303)
    trials = 1200
    bad = {"negative": 0, "asymmetric": 0, "exceeds W": 0, "degenerate": 0}
    for _ in range(trials):
        X = prevalence_diagram(rng, int(rng.integers(0, 9)))
        Y = prevalence_diagram(rng, int(rng.integers(0, 9)))
        p = float(rng.choice([1.0, 2.0, 3.0]))
        w = prevalence_wasserstein(X, Y, p=p)
        bad["negative"] += w < 0
        bad["asymmetric"] += abs(w - prevalence_wasserstein(Y, X, p=p)) > 1e-10
        bad["exceeds W"] += (matching_cost(X, Y, p=p, weighted=True)
                             > matching_cost(X[:, :2], Y[:, :2], p=p))
        Z = X.copy()
        Z[:, 2] = 0.0
        bad["degenerate"] += prevalence_wasserstein(Z, np.empty((0, 3)), p=p) != 0.0
    total = sum(bad.values())
    acceptance(3, total == 0, f"{trials} random pairs; violations {bad}")


# ---------------------------------------------------------------- 4

def test_criterion_04_prevalence_arithmetic(acceptance):
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(200):
        m, R = int(rng.integers(1, 8)), int(rng.integers(1, 60))
        b = np.sort(rng.uniform(0, 1, m))
        amb = diagram_from_pairs(1, b, b + rng.uniform(0.1, 1, m))
        alphas = np.where(rng.uniform(size=(R, m)) < 0.3, 0.0, rng.uniform(0, 1, (R, m)))
        records = [[MatchRecord(i, r, None if alphas[r, i] == 0 else i, float(alphas[r, i]))
                    for i in rng.permutation(m)] for r in range(R)]
        prev = prevalence_scores(amb, records, 1, R).prevalences(1)
        expect = [math.fsum(alphas[:, i]) / R for i in range(m)]
        worst = max(worst, float(np.max(np.abs(prev - expect))))
    runs_ok = True
    for seed in range(6):
        x = np.random.default_rng(seed).normal(size=(30, 2))
        res = run_bootstrap(cdist(x, x), plan_bootstraps(30, R=20, master_seed=seed))
        runs_ok &= records_are_valid(res.records)
    acceptance(4, worst <= 1e-15 and runs_ok,
               f"max |prevalence - mean affinity| = {worst:.1e}; affinities in [0,1] in all "
               f"bootstrap runs: {runs_ok}")


# ---------------------------------------------------------------- 5

def test_criterion_05_block_audit(acceptance):
    rng = np.random.default_rng(505)
    sizes = rng.integers(1, 7, 120)
    ids = np.repeat([f"fam{i:03d}" for i in range(len(sizes))], sizes)
    ids = ids[rng.permutation(len(ids))]
    N = len(ids)
    blocks = BlockStructure(tuple(ids))
    plan = plan_bootstraps(N, blocks, R=1000, fraction=0.9, master_seed=5)
    target = math.ceil(0.9 * N)
    largest = int(sizes.max())
    split = worst = 0
    members = {b: np.flatnonzero(ids == b) for b in set(ids)}
    for mask in plan.masks:
        inc = mask.included
        split += sum(0 < inc[idx].sum() < len(idx) for idx in members.values())
        worst = max(worst, abs(int(inc.sum()) - target))
    acceptance(5, split == 0 and worst <= largest - 1,
               f"1000 replicates, N={N}, block sizes 1-{largest}: {split} split blocks, "
               f"max |size - {target}| = {worst} (bound {largest - 1})")


# ---------------------------------------------------------------- 6

@pytest.mark.slow
def test_criterion_06_circle_stability(acceptance):
    t0 = time.perf_counter()
    F = sample_manifold(ManifoldSpec("circle", 100, 0.05, 2, 0))
    res = run_bootstrap(cdist(F.data, F.data), plan_bootstraps(100, R=100, master_seed=0))
    top = max(res.prevalence.in_dim(1), key=lambda iv: iv.persistence)
    frac = float(np.mean(res.betti >= 1))
    dt = time.perf_counter() - t0
    acceptance(6, top.prevalence >= 0.8 and frac >= 0.9 and dt < 300
               and records_are_valid(res.records),
               f"top H1 prevalence {top.prevalence:.3f}, beta1_matched>=1 in {frac:.0%} of "
               f"replicates; {dt:.1f}s")


# ---------------------------------------------------------------- 7

@pytest.mark.slow
def test_criterion_07_figure_eight_decoupling(acceptance):
    F = sample_manifold(ManifoldSpec("figure_eight", 150, 0.05, 2, 0, radius_ratio=3.0))
    res = run_bootstrap(cdist(F.data, F.data), plan_bootstraps(150, R=100, master_seed=0))
    loops = sorted(res.prevalence.in_dim(1), key=lambda iv: -iv.persistence)[:2]
    large, small = sorted(loops, key=lambda iv: -iv.death)
    # the loops die once their circles fill in: near sqrt(3) * radius
    identified = abs(small.death / math.sqrt(3) - 1) < 0.2 and \
        abs(large.death / (3 * math.sqrt(3)) - 1) < 0.2
    ratio = small.persistence / large.persistence
    acceptance(7, identified and ratio < 1 / 3 and small.prevalence >= 0.6,
               f"small/large persistence {ratio:.3f}, small-loop prevalence "
               f"{small.prevalence:.3f} (large {large.prevalence:.3f})")


# ---------------------------------------------------------------- 8

def test_criterion_08_assignment_optimality(acceptance):
    rng = np.random.default_rng(808)
    instances = 0
    mismatches = 0
    while instances < 400:
        m, k = (int(v) for v in rng.integers(0, 7, 2))
        if m + k > 6 or m + k == 0:
            continue
        X, Y = prevalence_diagram(rng, m), prevalence_diagram(rng, k)
        weighted = instances % 2 == 1
        A, B = (X, Y) if weighted else (X[:, :2], Y[:, :2])
        got = (prevalence_wasserstein if weighted else wasserstein)(A, B)
        best = brute_force_matching_cost(A, B, weighted=weighted) ** 0.5
        mismatches += got != best
        instances += 1
    acceptance(8, mismatches == 0,
               f"{instances} instances (<=6 points, p=2, half weighted): {mismatches} differ "
               f"from the exhaustive minimum")


# ---------------------------------------------------------------- 9

def tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file()}


@pytest.mark.slow
def test_criterion_09_end_to_end_determinism(acceptance, tmp_path):
    study = tmp_path / "study"
    shutil.copytree(SHIPPED_STUDY, study, ignore=shutil.ignore_patterns("out"))
    cfg = study / "synthetic_study.json"
    t0 = time.perf_counter()
    codes = [cli_main(["run", "--config", str(cfg), "--threads", str(t),
                       "--output-dir", str(tmp_path / f"out{t}")]) for t in (1, 8)]
    dt = time.perf_counter() - t0
    a, b = tree_bytes(tmp_path / "out1"), tree_bytes(tmp_path / "out8")
    same = a == b
    acceptance(9, codes == [0, 0] and same and dt < 600,
               f"exit codes {codes}, {len(a)} files, byte-identical: {same}; "
               f"both runs {dt:.1f}s")


# ---------------------------------------------------------------- 10

THROUGHPUT = r"""
import json, resource, time
import numpy as np
from scipy.spatial.distance import cdist
from topoboot import FiltrationParams, vr_persistence
warm = np.random.default_rng(1).uniform(size=(20, 2))
vr_persistence(cdist(warm, warm), FiltrationParams(1))
x = np.random.default_rng(0).uniform(size=(500, 2))
D = cdist(x, x)
t0 = time.perf_counter()
dg = vr_persistence(D, FiltrationParams(1))
dt = time.perf_counter() - t0
rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024
print(json.dumps({"seconds": dt, "peak_bytes": rss, "h1": len(dg.in_dim(1))}))
"""


@pytest.mark.slow
def test_criterion_10_throughput(acceptance):
    out = subprocess.run([sys.executable, "-c", THROUGHPUT], capture_output=True, text=True,
                         check=True)
    res = json.loads(out.stdout.strip().splitlines()[-1])
    gb = res["peak_bytes"] / 2 ** 30
    acceptance(10, res["seconds"] < 60 and gb < 4,
               f"N=500, dim 1, enclosing threshold: {res['seconds']:.2f}s, peak RSS "
               f"{gb:.2f} GB, {res['h1']} H1 intervals")
