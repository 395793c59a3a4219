"""Real-world datasets: declared graphs, additive-noise fits and twins."""
from .anm import (TWIN_METHOD, FittedAnm, IngestError, compute_noise, counterfactual_twin,
                  fit_anm, ingest, node_values, propagate)
from .graph import GRAPH_DIR, CausalGraphSpec, GraphError, load_graph
from .trees import BaggedRegressor, Tree, fit_tree

__all__ = [
    "TWIN_METHOD", "FittedAnm", "IngestError", "compute_noise", "counterfactual_twin", "fit_anm",
    "ingest", "node_values", "propagate", "GRAPH_DIR", "CausalGraphSpec", "GraphError",
    "load_graph", "BaggedRegressor", "Tree", "fit_tree",
]
