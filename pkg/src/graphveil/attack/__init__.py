"""Attack models that identify computations from their feature records."""

from graphveil.attack.dataset import FEATURE_NAMES, Dataset, Normalization, split_stratified, stratified_indices
from graphveil.attack.models import (
    AttackModel, ModelKind, adaptive_retrain, confusion_matrix, evaluate, fit, model_report,
)

__all__ = [
    "FEATURE_NAMES", "Dataset", "Normalization", "split_stratified", "stratified_indices",
    "AttackModel", "ModelKind", "adaptive_retrain", "confusion_matrix", "evaluate", "fit", "model_report",
]
