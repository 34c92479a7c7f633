"""Stratified cross-validation and hyperparameter grid search scored by AUC."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import partial
from itertools import product
from typing import Callable

import numpy as np

from ..evaluation import auc_score

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    svm_c_exponents: tuple[int, ...] = tuple(range(-2, 11))
    svm_gamma_exponents: tuple[int, ...] = tuple(range(-2, 11))
    forest_tree_exponents: tuple[int, ...] = tuple(range(0, 11))
    forest_feature_exponents: tuple[int, ...] = tuple(range(1, 13))

    def svm_cells(self) -> list[dict]:
        return [{"c": 2.0 ** a, "gamma": 2.0 ** b}
                for a, b in product(self.svm_c_exponents, self.svm_gamma_exponents)]

    def forest_cells(self) -> list[dict]:
        return [{"n_trees": 2 ** a, "max_features": 2 ** b}
                for a, b in product(self.forest_tree_exponents, self.forest_feature_exponents)]


@dataclass
class CvResult:
    fold_aucs: list[float]
    params: dict = field(default_factory=dict)

    @property
    def mean_auc(self) -> float:
        return float(np.mean(self.fold_aucs))

    def to_dict(self) -> dict:
        return {"params": self.params, "fold_aucs": self.fold_aucs, "mean_auc": self.mean_auc}


def stratified_folds(y, folds: int = 10, rng_seed: int = 0) -> np.ndarray:
    """Fold id per example; each class is shuffled and dealt round-robin.

    Fold count drops (with a warning) to the size of the smaller class.
    """
    y = np.asarray(y) > 0.5
    smallest = int(min(y.sum(), (~y).sum()))
    if smallest < 2:
        raise ValueError("cross-validation needs at least two examples per class")
    if smallest < folds:
        log.warning("only %d examples in the smaller class; using %d folds", smallest, smallest)
        folds = smallest
    rng = np.random.default_rng(rng_seed)
    fold = np.empty(len(y), dtype=np.int64)
    for cls in (True, False):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        fold[idx] = np.arange(len(idx)) % folds
    return fold


FitFn = Callable[[np.ndarray, np.ndarray], object]


def cross_validate(fit: FitFn, X, y, folds: int | np.ndarray = 10, rng_seed: int = 0,
                   params: dict | None = None) -> CvResult:
    """``fit(X_train, y_train)`` must return something with ``predict_score``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    fold = folds if isinstance(folds, np.ndarray) else stratified_folds(y, folds, rng_seed)
    aucs = []
    for f in range(int(fold.max()) + 1):
        test = fold == f
        model = fit(X[~test], y[~test])
        aucs.append(auc_score(y[test] > 0.5, model.predict_score(X[test])))
    return CvResult(aucs, dict(params or {}))


def _cell_cv(job, X, y, fold, rng_seed):
    from .forest import train_forest
    from .svm import train_svm_rbf

    family, cell = job
    if family == "svm":
        fit = lambda a, b: train_svm_rbf(a, b, cell["c"], cell["gamma"])  # noqa: E731
    else:
        fit = lambda a, b: train_forest(a, b, cell["n_trees"], cell["max_features"],  # noqa: E731
                                        rng_seed)
    return cross_validate(fit, X, y, fold, params=cell)


def grid_search(X, y, grid: GridSpec = GridSpec(), folds: int = 10, rng_seed: int = 0,
                families=("svm", "forest"), threads: int = 1) -> dict[str, CvResult]:
    """Exhaustive search per model family; returns each family's best cell.

    Ties keep the cell listed first, so the result does not depend on ``threads``.
    """
    from ..evaluation import parallel_map

    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    fold = stratified_folds(y, folds, rng_seed)
    jobs = []
    if "svm" in families:
        jobs += [("svm", c) for c in grid.svm_cells()]
    if "forest" in families:
        jobs += [("forest", c) for c in grid.forest_cells()]
    results = parallel_map(partial(_cell_cv, X=X, y=y, fold=fold, rng_seed=rng_seed), jobs,
                           threads)
    best: dict[str, CvResult] = {}
    for (family, cell), res in zip(jobs, results):
        log.info("%s %s -> %.4f", family, cell, res.mean_auc)
        if family not in best or res.mean_auc > best[family].mean_auc:
            best[family] = res
    return best
