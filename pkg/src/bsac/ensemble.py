"""Balanced bagging of supervised autoencoders with majority voting."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .autoencoder import SAConfig, sa_predict, sa_train
from .data import Dataset, PreprocessParams
from .metrics import confusion, metrics
from .rng import Rng

log = logging.getLogger(__name__)

DEFAULT_GAMMA_GRID = (0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1)


def imbalance_ratio(labels):
    """Return ``(negatives / positives, floor of that ratio)``."""
    y = np.asarray(labels).reshape(-1)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    p = int(np.sum(y == 1))
    n = int(np.sum(y == 0))
    if p == 0 or n == 0:
        raise ValueError("both classes must be present")
    if p > n:
        raise ValueError("majority class must be negative")
    return n / p, n // p


@dataclass(frozen=True)
class BalancedSubset:
    minority_indices: np.ndarray
    majority_indices: np.ndarray
    subset_id: int

    @property
    def indices(self) -> np.ndarray:
        return np.concatenate([self.minority_indices, self.majority_indices])


def make_balanced_subsets(labels, rng: Rng) -> list[BalancedSubset]:
    """Pair the whole minority class with each chunk of a shuffled, even
    partition of the majority class; ``floor(n / p)`` chunks whose sizes differ
    by at most one."""
    y = np.asarray(labels).reshape(-1)
    _, k = imbalance_ratio(y)
    minority = np.flatnonzero(y == 1)
    majority = rng.shuffled(np.flatnonzero(y == 0))
    return [
        BalancedSubset(minority.copy(), np.sort(chunk), i)
        for i, chunk in enumerate(np.array_split(majority, k))
    ]


@dataclass(eq=False)
class BSACModel:
    base_models: list
    gammas: list
    preprocess: PreprocessParams | None = None
    metadata: dict = field(default_factory=dict)
    sweep: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.base_models) != len(self.gammas):
            raise ValueError("one gamma per base model is required")

    @property
    def input_dim(self) -> int:
        return self.base_models[0].input_dim


def worker_count() -> int:
    """Parallel workers from BSAC_THREADS (0 or unset = all cores)."""
    raw = os.environ.get("BSAC_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("BSAC_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _fit_candidate(args):
    config, x, y, val_x, val_y = args
    model = sa_train(config, x, y)
    _, pred = sa_predict(model, val_x)
    return model, metrics(confusion(val_y, pred)).f1


def _run_candidates(jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            return list(pool.map(_fit_candidate, jobs))
    return [_fit_candidate(job) for job in jobs]


def _select(gamma_grid, scores) -> int:
    # highest validation F1; ties go to the larger gamma
    best = 0
    for j in range(1, len(gamma_grid)):
        if scores[j] > scores[best] or (scores[j] == scores[best] and gamma_grid[j] > gamma_grid[best]):
            best = j
    return best


def train_bsac(train: Dataset, validation: Dataset, base_config: SAConfig, gamma_grid,
               rng: Rng, workers: int | None = None) -> BSACModel:
    """Train one SA per (balanced subset, gamma) and keep the gamma with the
    best validation F1 for each subset.

    Candidate seeds come from ``rng.derive(subset_id, gamma_index)``, so the
    result does not depend on the number of workers.
    """
    grid = [float(g) for g in gamma_grid]
    if not grid:
        raise ValueError("gamma_grid must not be empty")
    for g in grid:
        if not 0.0 <= g <= 1.0:
            raise ValueError(f"gamma {g} outside [0, 1]")
    if train.n_features != base_config.input_dim or validation.n_features != base_config.input_dim:
        raise ValueError(
            f"architecture expects {base_config.input_dim} features; "
            f"train has {train.n_features}, validation {validation.n_features}"
        )
    subsets = make_balanced_subsets(train.labels, rng)
    log.info("training %d base classifiers x %d gamma values", len(subsets), len(grid))
    jobs, keys = [], []
    for s in subsets:
        sub_x, sub_y = train.features[s.indices], train.labels[s.indices]
        for j, g in enumerate(grid):
            cfg = replace(base_config, gamma=g, seed=rng.derive(s.subset_id, j).seed)
            jobs.append((cfg, sub_x, sub_y, validation.features, validation.labels))
            keys.append((s.subset_id, j))
    results = _run_candidates(jobs, worker_count() if workers is None else workers)

    models, gammas, sweep = [], [], []
    for s in subsets:
        rows = [(j, results[i]) for i, (sid, j) in enumerate(keys) if sid == s.subset_id]
        scores = [f1 for _, (_, f1) in rows]
        best = _select(grid, scores)
        for (j, (_, f1)) in rows:
            sweep.append({"subset_id": s.subset_id, "gamma": grid[j], "val_f1": f1,
                          "selected": j == best})
        models.append(rows[best][1][0])
        gammas.append(grid[best])
        log.info("subset %d: gamma=%.1f val F1=%.4f", s.subset_id, grid[best], scores[best])
    return BSACModel(models, gammas, metadata={"seed": rng.seed}, sweep=sweep)


def majority_vote(votes):
    """Aggregate a ``(n_models, n_samples)`` 0/1 vote matrix.

    Returns ``(labels, positive_fraction)``; a tie goes to the positive class.
    """
    v = np.asarray(votes)
    if v.ndim != 2 or v.shape[0] == 0:
        raise ValueError("need a non-empty (n_models, n_samples) vote matrix")
    positive = v.sum(axis=0)
    labels = (2 * positive >= v.shape[0]).astype(np.int64)
    return labels, positive / v.shape[0]


def bsac_predict(model: BSACModel, features):
    if not model.base_models:
        raise ValueError("empty classifier pool")
    votes = np.vstack([sa_predict(m, features)[1] for m in model.base_models])
    return majority_vote(votes)

