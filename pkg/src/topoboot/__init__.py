"""Topological bootstrap for comparing data representations.

Vietoris-Rips persistence of representation-induced metrics, stabilized by a
block-constrained bootstrap with per-generator prevalence, and compared under
a prevalence-weighted Wasserstein pre-metric.
"""
__version__ = "0.1.0"

from ._accel import BACKEND
from .bootstrap import (BlockStructure, BootstrapPlan, MatchRecord, matched_betti,
                        plan_bootstraps, prevalence_scores, register_cycles, run_bootstrap)
from .diagdist import (Dendrogram, bottleneck, prevalence_wasserstein, wasserstein,
                       ward_cluster)
from .diagram import PersistenceDiagram, PersistenceInterval
from .imageph import ImageDiagram, SubsampleMask, image_persistence, induced_rank_oracle
from .metricspace import (DistanceMatrix, FeatureMatrix, SpsdStack, compute_metric,
                          extract_features, inner_product_divergence, pearson_divergence,
                          spd_geodesic, ztrans_pearson_divergence)
from .synth import ManifoldSpec, random_representation, sample_manifold
from .vrph import FiltrationParams, brute_force_persistence, vr_persistence

__all__ = [
    "BACKEND", "BlockStructure", "BootstrapPlan", "Dendrogram", "DistanceMatrix",
    "FeatureMatrix", "FiltrationParams", "ImageDiagram", "ManifoldSpec", "MatchRecord",
    "PersistenceDiagram", "PersistenceInterval", "SpsdStack", "SubsampleMask",
    "bottleneck", "brute_force_persistence", "compute_metric", "extract_features",
    "image_persistence", "induced_rank_oracle", "inner_product_divergence",
    "matched_betti", "pearson_divergence", "plan_bootstraps", "prevalence_scores",
    "prevalence_wasserstein", "random_representation", "register_cycles", "run_bootstrap",
    "sample_manifold", "spd_geodesic", "vr_persistence", "ward_cluster", "wasserstein",
    "ztrans_pearson_divergence",
]
