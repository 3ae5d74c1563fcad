"""From-scratch classifiers: bagged CART forest, second-order boosting, ReLU network."""

from .forest import ForestConfig, RandomForest, balanced_weights, train_random_forest
from .gbdt import BoostConfig, BoostedTrees, log_loss, sigmoid, train_gbdt
from .mlp import Mlp, MlpConfig, loss_and_gradients, train_mlp
from .model import (
    KINDS,
    Model,
    Prediction,
    fit_classifier,
    kind_of,
    load_model,
    model_from_dict,
    model_to_dict,
    predict,
    save_model,
)
from .scaling import Standardizer, apply_standardizer, fit_standardizer
from .tree import Tree, boost_leaf_value, train_boost_tree, train_tree

__all__ = [
    "BoostConfig", "BoostedTrees", "ForestConfig", "KINDS", "Mlp", "MlpConfig", "Model", "Prediction",
    "RandomForest", "Standardizer", "Tree", "apply_standardizer", "balanced_weights", "boost_leaf_value",
    "fit_classifier", "fit_standardizer", "kind_of", "load_model", "log_loss", "loss_and_gradients",
    "model_from_dict", "model_to_dict", "predict", "save_model", "sigmoid", "train_boost_tree",
    "train_gbdt", "train_mlp", "train_random_forest", "train_tree",
]
