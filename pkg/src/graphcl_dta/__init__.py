"""Drug-target binding affinity with a GCN drug encoder, a CNN target encoder and
contrastive / uniformity regularisers, on a small numpy autodiff engine."""

from .autodiff import Tensor, backward, finite_diff_check, no_grad
from .config import RunConfig, load_config
from .data import Dataset, batch_iter, load_dataset, make_split
from .metrics import MetricsReport, concordance_index, evaluate_predictions, r_squared_m
from .model import GraphCLDTA
from .protein import tokenize_protein
from .smiles import MolecularGraph, ParseError, parse_smiles

__version__ = "0.1.0"

__all__ = [
    "Tensor", "backward", "finite_diff_check", "no_grad", "RunConfig", "load_config", "Dataset", "batch_iter",
    "load_dataset", "make_split", "MetricsReport", "concordance_index", "evaluate_predictions", "r_squared_m",
    "GraphCLDTA", "tokenize_protein", "MolecularGraph", "ParseError", "parse_smiles",
]
