"""Bursty-token classifiers: CART forest, RBF SVM and their boosted ensemble."""

from .ensemble import (EnsembleModel, ForestConfig, SvmConfig, dumps_model, load_model,
                       save_model, train_adaboost)
from .forest import ForestModel, train_forest
from .selection import CvResult, GridSpec, cross_validate, grid_search, stratified_folds
from .svm import SvmModel, train_svm_rbf
from .training import (HarvestConfig, LabeledExample, TrainingSet, build_training_set,
                       read_training_csv, self_train, write_training_csv)


def predict_score(model, X):
    """Bursty score in [0, 1] for each row of ``X`` under any of the model types."""
    return model.predict_score(X)


__all__ = [
    "CvResult", "EnsembleModel", "ForestConfig", "ForestModel", "GridSpec", "HarvestConfig",
    "LabeledExample", "SvmConfig", "SvmModel", "TrainingSet", "build_training_set",
    "cross_validate", "dumps_model", "grid_search", "load_model", "predict_score",
    "read_training_csv", "save_model", "self_train", "stratified_folds", "train_adaboost",
    "train_forest", "train_svm_rbf", "write_training_csv",
]
