"""``topoboot`` command line.

Exit codes: 0 success, 2 configuration or input error, 3 one or more study
cells failed (partial outputs are still written).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import io as tio
from .bootstrap import (BlockStructure, BootstrapError, MatchRecord, matched_betti,
                        plan_bootstraps, plan_to_json, prevalence_scores, records_to_rows,
                        run_bootstrap)
from .diagdist import DiagramError, pairwise_distances, ward_cluster
from .imageph import SubsampleMask, image_persistence
from .metricspace import (FEATURE_KINDS, FeatureError, FeatureMatrix, compute_metric,
                          extract_features)
from .pipeline import ConfigError, load_config, run_pipeline, write_synthetic_study
from .synth import KINDS, ManifoldSpec, SynthError, random_representation, sample_manifold
from .vrph import FiltrationParams, PersistenceError, vr_persistence

EXIT_OK, EXIT_CONFIG, EXIT_CELLS = 0, 2, 3


def _default_threads() -> int:
    env = os.environ.get("TOPOBOOT_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _threshold(text):
    if text is None or text == "enclosing":
        return None
    return math.inf if text == "inf" else float(text)


def _params(args) -> FiltrationParams:
    return FiltrationParams(args.max_dim, _threshold(args.threshold))


def _out(args, name):
    return Path(args.output_dir) / name if args.out is None else Path(args.out)


# ---------------------------------------------------------------- commands

def cmd_features(args):
    ts, ids = tio.read_timeseries(args.input)
    feats = extract_features(list(ts), args.kind, ids, ridge_scale=args.ridge_scale)
    if isinstance(feats, FeatureMatrix):
        out = _out(args, "features.csv")
        tio.write_feature_csv(out, feats)
    else:
        out = _out(args, "features.json")
        tio.write_spsd_stack(out, feats, psd=args.kind != "partial_netmat")
    print(out)


def cmd_dist(args):
    feats = tio.read_features(args.features)
    opts = {}
    if args.metric == "pd1":
        opts["ridge"] = args.ridge
    if args.metric == "pd2":
        opts["clamp_eps"] = args.clamp_eps
    D = compute_metric(feats, args.metric, **opts)
    out = _out(args, "distance.csv")
    tio.write_distance_csv(out, D)
    print(out)


def cmd_ph(args):
    D = tio.read_distance_csv(args.dist)
    dg = vr_persistence(D, _params(args), label=args.label or Path(args.dist).stem)
    out = _out(args, "diagram.json")
    tio.write_diagram(out, dg)
    print(out)


def cmd_imageph(args):
    D = tio.read_distance_csv(args.dist)
    keep = set(Path(args.subset).read_text().split())
    mask = SubsampleMask(np.array([s in keep for s in D.subject_ids]))
    img = image_persistence(D, mask, _params(args), label=args.label or Path(args.dist).stem)
    out = _out(args, "image.json")
    tio.write_text(out, img.to_json() + "\n")
    print(out)


def _blocks(args, ids):
    return tio.read_blocks(args.blocks, ids) if args.blocks else BlockStructure.singletons(len(ids))


def cmd_bootstrap(args):
    D = tio.read_distance_csv(args.dist)
    plan = plan_bootstraps(D.n, _blocks(args, D.subject_ids), args.R, args.fraction, args.seed)
    res = run_bootstrap(D, plan, args.k, _params(args), label=args.label or Path(args.dist).stem,
                        threads=args.threads, keep_images=args.keep_image_diagrams)
    out = Path(args.output_dir)
    tio.write_text(out / "plan.json", plan_to_json(plan, args.blocks) + "\n")
    tio.write_diagram(out / "ambient.json", res.ambient)
    tio.write_diagram(out / "prevalence.json", res.prevalence)
    tio.write_csv(out / "matches.csv", [["replicate_index", "ambient_interval_id",
                                         "replicate_interval_id", "affinity"],
                                        *records_to_rows(res.records)])
    tio.write_csv(out / "betti.csv", [["replicate_index", "beta_matched"],
                                      *[[r, int(b)] for r, b in enumerate(res.betti)]])
    if args.keep_image_diagrams:
        for r, img in enumerate(res.image_diagrams):
            tio.write_text(out / "images" / f"replicate_{r:05d}.json", img.to_json() + "\n")
    print(out)


def _read_matches(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    by_rep = {}
    for r in rows:
        rid = r["replicate_interval_id"]
        m = MatchRecord(int(r["ambient_interval_id"]), int(r["replicate_index"]),
                        None if rid == "" else int(rid), float(r["affinity"]))
        by_rep.setdefault(m.replicate_index, []).append(m)
    return [by_rep[i] for i in sorted(by_rep)]


def cmd_prevalence(args):
    amb = tio.read_diagram(args.ambient)
    prev = prevalence_scores(amb, _read_matches(args.matches), args.k, args.R)
    out = _out(args, "prevalence.json")
    tio.write_diagram(out, prev)
    print(out)


def cmd_betti(args):
    betti = matched_betti(_read_matches(args.matches))
    out = _out(args, "betti.csv")
    tio.write_csv(out, [["replicate_index", "beta_matched"],
                        *[[r, int(b)] for r, b in enumerate(betti)]])
    print(out)


def cmd_wasserstein(args):
    diagrams = [tio.read_diagram(p) for p in args.diagrams]
    labels = [d.source_label or Path(p).stem for d, p in zip(diagrams, args.diagrams)]
    if args.finite_only:
        diagrams = [d.finite() for d in diagrams]
    M = pairwise_distances(diagrams, args.k, args.p, weighted=not args.unweighted)
    out = _out(args, "wasserstein.csv")
    tio.write_csv(out, [["", *labels], *[[lab, *(repr(float(v)) for v in row)]
                                         for lab, row in zip(labels, M)]])
    print(out)


def cmd_cluster(args):
    D = tio.read_distance_csv(args.dist)
    dend = ward_cluster(D, D.subject_ids)
    out = Path(args.output_dir)
    tio.write_csv(out / "linkage.csv", [["cluster_a", "cluster_b", "height", "size"],
                                        *[[int(a), int(b), repr(float(h)), int(s)]
                                          for a, b, h, s in dend.merges]])
    tio.write_text(out / "dendrogram.nwk", dend.newick() + "\n")
    order = dend.leaves()
    cmap = {"row_order": [D.subject_ids[i] for i in order],
            "matrix": D.d[np.ix_(order, order)].tolist(),
            "monotone": dend.metadata["monotone"]}
    tio.write_text(out / "clustermap.json", json.dumps(cmap, indent=1) + "\n")
    print(out)


def cmd_synth(args):
    if args.study:
        path = write_synthetic_study(args.study, n=args.n, R=args.R, seed=args.seed)
        print(path)
        return
    F = sample_manifold(ManifoldSpec(args.kind, args.n, args.noise, args.ambient_dim, args.seed,
                                     radius_ratio=args.radius_ratio))
    if args.representation:
        F = random_representation(F, args.representation, args.d or F.data.shape[1],
                                  args.seed + 1)
    out = _out(args, "features.csv")
    tio.write_feature_csv(out, F)
    print(out)


def cmd_run(args):
    if not args.config:
        raise ConfigError("run needs --config")
    cfg = load_config(args.config, seed=args.seed_given, output_dir=args.output_dir_given)
    return run_pipeline(cfg, threads=args.threads, keep_images=args.keep_image_diagrams,
                        log=lambda msg: print(msg, file=sys.stderr))


# ---------------------------------------------------------------- parser

def _globals() -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False)
    s = argparse.SUPPRESS
    g.add_argument("--config", default=s, help="study config JSON (run)")
    g.add_argument("--seed", type=int, default=s, help="master seed")
    g.add_argument("--threads", type=int, default=s,
                   help="worker threads (default: TOPOBOOT_THREADS or CPU count)")
    g.add_argument("--output-dir", default=s, help="output directory")
    g.add_argument("--keep-image-diagrams", action="store_true", default=s,
                   help="persist every replicate's image diagram")
    return g


def _homology(p):
    p.add_argument("--max-dim", type=int, default=1)
    p.add_argument("--threshold", default=None, help="number, 'inf' or 'enclosing' (default)")
    p.add_argument("--label", default=None)


def build_parser() -> argparse.ArgumentParser:
    g = _globals()
    parser = argparse.ArgumentParser(prog="topoboot", parents=[g], description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[g], help=help_)
        p.set_defaults(func=fn)
        p.add_argument("--out", default=None, help="output file")
        return p

    p = add("features", cmd_features, "extract features from time series (.npy)")
    p.add_argument("input")
    p.add_argument("--kind", choices=FEATURE_KINDS, required=True)
    p.add_argument("--ridge-scale", type=float, default=1e-3)

    p = add("dist", cmd_dist, "subject-pairwise dissimilarity matrix")
    p.add_argument("features")
    p.add_argument("--metric", choices=("v1", "v2", "pd1", "pd2"), required=True)
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--clamp-eps", type=float, default=1e-7)

    p = add("ph", cmd_ph, "Vietoris-Rips persistence diagram")
    p.add_argument("dist")
    _homology(p)

    p = add("imageph", cmd_imageph, "image persistence of a subsample")
    p.add_argument("dist")
    p.add_argument("--subset", required=True, help="file listing included subject ids")
    _homology(p)

    p = add("bootstrap", cmd_bootstrap, "block-constrained topological bootstrap")
    p.add_argument("dist")
    p.add_argument("--R", type=int, default=1000)
    p.add_argument("--fraction", type=float, default=0.9)
    p.add_argument("--blocks", default=None, help="CSV subject_id,block_id")
    p.add_argument("--k", type=int, default=1)
    _homology(p)

    p = add("prevalence", cmd_prevalence, "prevalence diagram from match records")
    p.add_argument("ambient")
    p.add_argument("matches")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--R", type=int, default=None)

    p = add("betti", cmd_betti, "matched Betti numbers from match records")
    p.add_argument("matches")

    p = add("wasserstein", cmd_wasserstein, "all-pairs diagram distances")
    p.add_argument("diagrams", nargs="+")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--unweighted", action="store_true", help="plain p-Wasserstein")
    p.add_argument("--finite-only", action="store_true", help="drop essential intervals first")

    p = add("cluster", cmd_cluster, "Ward clustering of a distance CSV")
    p.add_argument("dist")

    p = add("synth", cmd_synth, "synthetic features or a whole demo study")
    p.add_argument("--kind", choices=KINDS, default="circle")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--ambient-dim", type=int, default=2)
    p.add_argument("--radius-ratio", type=float, default=3.0)
    p.add_argument("--representation", choices=("projection", "nonlinear"), default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--study", default=None, help="write a six-cell demo study to this directory")
    p.add_argument("--R", type=int, default=50)

    add("run", cmd_run, "run a full study from --config")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed_given = getattr(args, "seed", None)
    args.output_dir_given = getattr(args, "output_dir", None)
    args.config = getattr(args, "config", None)
    args.seed = args.seed_given if args.seed_given is not None else 0
    args.threads = getattr(args, "threads", None) or _default_threads()
    args.output_dir = args.output_dir_given or "."
    args.keep_image_diagrams = getattr(args, "keep_image_diagrams", False)
    try:
        code = args.func(args)
    except (ConfigError, FeatureError, PersistenceError, BootstrapError, DiagramError,
            SynthError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"topoboot {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
