"""Learnable graph operators built from families of normalized adjacency powers."""
from .checkpoint import load_checkpoint, save_checkpoint
from .estimator import MatrixFamilyTransformer, PDFClassifier, PDFRegressor
from .family import FamilySpec, MatrixFamily, build_family, lap_spec, preset_operator
from .graph import Dataset, DatasetFormatError, Graph, load_json, load_tudataset, save_json, synth_dataset
from .model import ModelConfig, count_params, forward, init_params, model_forward
from .spectral import (
    EigenConvergenceError, FilterEffect, PolyFilter, classify_filter, cos_to_eigvec, eigendecompose, gft,
    inverse_gft, smoothness_quadratic, smoothness_spectral,
)
from .train import TrainConfig, adam_step, lr_at, train
from .verify import run_all

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DatasetFormatError", "EigenConvergenceError", "FamilySpec", "FilterEffect", "Graph",
    "MatrixFamily", "MatrixFamilyTransformer", "ModelConfig", "PDFClassifier", "PDFRegressor", "PolyFilter",
    "TrainConfig", "adam_step", "build_family", "classify_filter", "cos_to_eigvec", "count_params",
    "eigendecompose", "forward", "gft", "init_params", "inverse_gft", "lap_spec", "load_checkpoint",
    "load_json", "load_tudataset", "lr_at", "model_forward", "preset_operator", "run_all", "save_checkpoint",
    "save_json", "smoothness_quadratic", "smoothness_spectral", "synth_dataset", "train",
]
