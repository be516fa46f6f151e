"""Stratified cross-validation of BSAC and the gamma sensitivity sweep."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .autoencoder import SAConfig
from .data import Dataset, apply_minmax, fit_minmax
from .ensemble import bsac_predict, train_bsac
from .metrics import METRIC_NAMES, ConfusionMatrix, MetricsReport, confusion, metrics
from .rng import Rng

log = logging.getLogger(__name__)


def stratified_kfold(labels, k: int, rng: Rng) -> np.ndarray:
    """Assign each sample a fold in ``0..k-1``.

    Positives are shuffled and dealt round-robin, then negatives continue the
    same deal, so fold sizes and per-fold positive counts each differ by at
    most one.
    """
    y = np.asarray(labels).reshape(-1)
    if k < 3:
        raise ValueError("k must be >= 3 (test, validation and training folds)")
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if pos.size + neg.size != y.size:
        raise ValueError("labels must be 0 or 1")
    if pos.size < k or neg.size < k:
        raise ValueError(f"each class needs at least k={k} members "
                         f"(positives {pos.size}, negatives {neg.size})")
    order = np.concatenate([rng.shuffled(pos), rng.shuffled(neg)])
    folds = np.empty(y.size, dtype=np.int64)
    folds[order] = np.arange(y.size) % k
    return folds


def fold_split(folds: np.ndarray, test_fold: int, k: int):
    """Indices of ``(train, validation, test)``; validation is the next fold cyclically."""
    val_fold = (test_fold + 1) % k
    test = np.flatnonzero(folds == test_fold)
    val = np.flatnonzero(folds == val_fold)
    train = np.flatnonzero((folds != test_fold) & (folds != val_fold))
    return train, val, test


def rescale_split(dataset: Dataset, train_idx, val_idx, test_idx):
    """Refit min-max on the training rows only and apply it to all three parts."""
    lo, hi = fit_minmax(dataset.features[train_idx])
    parts = []
    for idx in (train_idx, val_idx, test_idx):
        d = dataset.take(idx)
        parts.append(Dataset(apply_minmax(d.features, lo, hi), d.labels, d.feature_names))
    return parts


@dataclass
class FoldResult:
    fold: int
    confusion: ConfusionMatrix
    metrics: MetricsReport
    gammas: list
    sweep: list


@dataclass
class CVReport:
    folds: list
    mean: dict
    std: dict

    @classmethod
    def from_folds(cls, folds: list) -> "CVReport":
        values = {m: np.array([getattr(f.metrics, m) for f in folds]) for m in METRIC_NAMES}
        # population std (ddof=0) over the fold values
        return cls(
            folds,
            {m: float(v.mean()) for m, v in values.items()},
            {m: float(v.std()) for m, v in values.items()},
        )


def run_cv(dataset: Dataset, base_config: SAConfig, gamma_grid, k: int, rng: Rng,
           workers: int | None = None) -> CVReport:
    """k rotations: test = fold i, validation = fold i+1 (mod k), train = the rest."""
    folds = stratified_kfold(dataset.labels, k, rng)
    results = []
    for i in range(k):
        train_idx, val_idx, test_idx = fold_split(folds, i, k)
        train, val, test = rescale_split(dataset, train_idx, val_idx, test_idx)
        model = train_bsac(train, val, base_config, gamma_grid, rng.derive(i), workers=workers)
        pred, _ = bsac_predict(model, test.features)
        cm = confusion(test.labels, pred)
        m = metrics(cm)
        log.info("fold %d: recall %.4f  F1 %.4f  G-mean %.4f  specificity %.4f  gammas %s",
                 i, m.recall, m.f1, m.g_mean, m.specificity, model.gammas)
        results.append(FoldResult(i, cm, m, list(model.gammas), list(model.sweep)))
    return CVReport.from_folds(results)


def gamma_sweep(train: Dataset, validation: Dataset, base_config: SAConfig, gamma_grid,
                workers: int | None = None) -> list[dict]:
    """Validation F1 for every (base classifier, gamma) pair.

    Seeded from ``base_config.seed`` exactly as ``train_bsac(...,
    Rng(base_config.seed))`` would be.
    """
    model = train_bsac(train, validation, base_config, gamma_grid, Rng(base_config.seed),
                       workers=workers)
    return [{"subset_id": r["subset_id"], "gamma": r["gamma"], "val_f1": r["val_f1"]}
            for r in model.sweep]
