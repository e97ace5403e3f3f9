"""Histogram gradient-boosted decision trees with leaf-wise growth."""
from .binning import BinMapper, build_bins
from .boosting import GBDTClassifier, GBDTRegressor, GbdtModel, fit, predict, predict_raw, set_threads
from .config import GbdtConfig
from .losses import LOGISTIC, SQUARED, loss_grad_hess
from .tree import BinnedDataset, SplitCandidate, Tree, find_best_split, grow_tree

__all__ = [
    "BinMapper",
    "BinnedDataset",
    "GBDTClassifier",
    "GBDTRegressor",
    "GbdtConfig",
    "GbdtModel",
    "LOGISTIC",
    "SQUARED",
    "SplitCandidate",
    "Tree",
    "build_bins",
    "find_best_split",
    "fit",
    "grow_tree",
    "loss_grad_hess",
    "predict",
    "predict_raw",
    "set_threads",
]
