"""Greedy score-based causal discovery over Markov equivalence classes.

Learns a CPDAG from continuous data with GES, XGES-0 or XGES under a linear
Gaussian BIC score. Also ships a simulator, evaluation metrics and
brute-force oracles for small graphs.
"""

from .graph import (CycleError, EdgeChange, GraphError, NoExtensionError, Pdag,
                    complete_pdag, consistent_extension, dag_to_cpdag, dumps,
                    loads, mec_equal)
from .metrics import EvalReport, delta_s, edge_classification, edge_ratio, evaluate, shd
from .operators import DeleteOp, InsertOp, ReverseOp, apply_operator
from .scoring import DataError, Scorer, read_csv, write_csv
from .search import (METHODS, SearchResult, exhaustive_oracle, ges, run_method,
                     xges, xges0)
from .simulate import GroundTruth, SimConfig, sample_data, sample_ground_truth, simulate

__version__ = "0.1.0"

__all__ = [
    "CycleError", "DataError", "DeleteOp", "EdgeChange", "EvalReport", "GraphError",
    "GroundTruth", "InsertOp", "METHODS", "NoExtensionError", "Pdag", "ReverseOp",
    "Scorer", "SearchResult", "SimConfig", "apply_operator", "complete_pdag",
    "consistent_extension", "dag_to_cpdag", "delta_s", "dumps", "edge_classification",
    "edge_ratio", "evaluate", "exhaustive_oracle", "ges", "loads", "mec_equal",
    "read_csv", "run_method", "sample_data", "sample_ground_truth", "shd", "simulate",
    "write_csv", "xges", "xges0",
]
