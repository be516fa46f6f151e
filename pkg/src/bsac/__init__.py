"""Bagging supervised autoencoder classifier for imbalanced credit scoring."""

__version__ = "0.1.0"

from .autoencoder import SAConfig, SAModel, encode, sa_forward, sa_loss, sa_predict, sa_train
from .data import Dataset, PreprocessParams, RawTable, apply_preprocess, fit_preprocess, load_csv
from .ensemble import BSACModel, bsac_predict, imbalance_ratio, make_balanced_subsets, train_bsac
from .evaluation import CVReport, gamma_sweep, run_cv, stratified_kfold
from .metrics import ConfusionMatrix, MetricsReport, confusion, metrics
from .rng import Rng

__all__ = [
    "BSACModel", "CVReport", "ConfusionMatrix", "Dataset", "MetricsReport", "PreprocessParams",
    "RawTable", "Rng", "SAConfig", "SAModel", "apply_preprocess", "bsac_predict", "confusion",
    "encode", "fit_preprocess", "gamma_sweep", "imbalance_ratio", "load_csv", "make_balanced_subsets",
    "metrics", "run_cv", "sa_forward", "sa_loss", "sa_predict", "sa_train", "stratified_kfold",
    "train_bsac",
]
