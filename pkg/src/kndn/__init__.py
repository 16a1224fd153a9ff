"""K-nearest diverse neighbor search over an R-tree.

Given a point query, return the k spatially closest answers that are
pairwise diverse above a tunable threshold, using incremental distance
browsing with greedy selection, follower buffering, and MBR pruning.
"""

from kndn.browse import Browser
from kndn.datagen import gen_workload, gen_zipf
from kndn.diversity import DiversityMeasure, categorical_sim, make_weights
from kndn.kernels import BACKEND, QueryContext
from kndn.model import (
    AttributeSpec,
    Answer,
    Dataset,
    ExecutionStats,
    Query,
    Record,
    ResultSet,
    load_csv,
    normalize,
    save_csv,
)
from kndn.oracle import knn_linear, optimal_kndn, sequential_scan_kndn
from kndn.rtree import RTree, RTreeConfig, build as build_rtree
from kndn.scoring import score, spatialdist
from kndn.solver import (
    buffered_greedy,
    direct_greedy,
    max_mutually_diverse_subset,
    mbr_is_prunable,
    safe_radius,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeSpec",
    "Answer",
    "BACKEND",
    "Browser",
    "Dataset",
    "DiversityMeasure",
    "ExecutionStats",
    "Query",
    "QueryContext",
    "RTree",
    "RTreeConfig",
    "Record",
    "ResultSet",
    "buffered_greedy",
    "build_rtree",
    "categorical_sim",
    "direct_greedy",
    "gen_workload",
    "gen_zipf",
    "knn_linear",
    "load_csv",
    "make_weights",
    "max_mutually_diverse_subset",
    "mbr_is_prunable",
    "normalize",
    "optimal_kndn",
    "safe_radius",
    "save_csv",
    "score",
    "sequential_scan_kndn",
    "spatialdist",
    "__version__",
]
