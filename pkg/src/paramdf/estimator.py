"""scikit-learn compatible wrappers.

Inputs ``X`` are sequences of :class:`~paramdf.graph.Graph`; targets ``y``
are one value per graph.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .family import FamilySpec, build_family, parse_sparsity
from .graph import Dataset, Graph
from .model import ModelConfig, build_families
from .train import TrainConfig, predict_outputs, train


def check_graphs(X) -> list:
    """Validate a graph collection: non-empty, all Graph, one input kind."""
    if isinstance(X, Graph):
        raise TypeError("expected a sequence of graphs, got a single Graph")
    graphs = list(X)
    if not graphs:
        raise ValueError("expected at least one graph")
    for i, g in enumerate(graphs):
        if not isinstance(g, Graph):
            raise TypeError(f"X[{i}] is {type(g).__name__}, expected Graph")
    if graphs[0].node_features is not None:
        width = graphs[0].node_features.shape[1]
        if any(g.node_features is None or g.node_features.shape[1] != width for g in graphs):
            raise ValueError("all graphs need node_features of the same width")
    elif any(g.node_labels is None for g in graphs):
        raise ValueError("graphs need either node_labels or node_features")
    return graphs


def check_graph_targets(X, y):
    graphs = check_graphs(X)
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != len(graphs):
        raise ValueError(f"y must be 1-D with one entry per graph ({len(graphs)}), got shape {y.shape}")
    return graphs, y


class MatrixFamilyTransformer(TransformerMixin, BaseEstimator):
    """Map graphs to their stacked ``(eps, k)`` operator families."""

    def __init__(self, family=((-0.5, 1),), sparsity="dense"):
        self.family = family
        self.sparsity = sparsity

    def fit(self, X, y=None):
        check_graphs(X)
        self.spec_ = FamilySpec(tuple(tuple(e) for e in self.family), parse_sparsity(self.sparsity))
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        return [build_family(g, self.spec_) for g in check_graphs(X)]


class _PDFBase(BaseEstimator):
    def __init__(self, hidden_dim=16, num_layers=2, mixer_depth="2L", variant="idp",
                 family=((0.0, 1), (-0.25, 1), (-0.5, 1), (-0.5, 2)), sparsity="dense",
                 readout="mean", dropout=0.0, activation="gelu", mixer_hidden=None,
                 batch_size=16, learning_rate=0.01, lr_decay_steps=50, lr_decay_rate=0.5,
                 warmup_steps=5, weight_decay=0.0, max_epochs=200, random_state=0):
        self.hidden_dim = hidden_dim
        self.num_layers = num_layers
        self.mixer_depth = mixer_depth
        self.variant = variant
        self.family = family
        self.sparsity = sparsity
        self.readout = readout
        self.dropout = dropout
        self.activation = activation
        self.mixer_hidden = mixer_hidden
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_decay_steps = lr_decay_steps
        self.lr_decay_rate = lr_decay_rate
        self.warmup_steps = warmup_steps
        self.weight_decay = weight_decay
        self.max_epochs = max_epochs
        self.random_state = random_state

    _task = "regression"

    def _configs(self):
        spec = FamilySpec(tuple(tuple(e) for e in self.family), parse_sparsity(self.sparsity))
        model = ModelConfig(hidden_dim=self.hidden_dim, num_layers=self.num_layers,
                            mixer_depth=self.mixer_depth, variant=self.variant, family=spec,
                            readout=self.readout, dropout=self.dropout, activation=self.activation,
                            mixer_hidden=self.mixer_hidden, task=self._task,
                            num_classes=2 if self._task == "classification" else None)
        tc = TrainConfig(batch_size=self.batch_size, initial_lr=self.learning_rate,
                         lr_decay_steps=self.lr_decay_steps, lr_decay_rate=self.lr_decay_rate,
                         warmup_steps=self.warmup_steps, weight_decay=self.weight_decay,
                         max_epochs=self.max_epochs, seed=int(self.random_state or 0))
        return model, tc

    def _fit(self, graphs, targets, num_classes=None):
        model, tc = self._configs()
        ds = Dataset(graphs, targets, task=self._task, num_classes=num_classes,
                     splits={"train": list(range(len(graphs)))})
        self.params_, self.history_ = train(ds, model, tc)
        self.config_ = self.history_.model_config
        self.n_params_ = sum(v.size for v in self.params_.values())
        return self

    def _outputs(self, X):
        check_is_fitted(self, "params_")
        graphs = check_graphs(X)
        return predict_outputs(graphs, build_families(graphs, self.config_.family), self.config_, self.params_)


class PDFRegressor(RegressorMixin, _PDFBase):
    """Graph-level regression with a PDF network, trained on mean absolute error."""

    _task = "regression"

    def fit(self, X, y):
        graphs, y = check_graph_targets(X, y)
        return self._fit(graphs, y.astype(np.float64))

    def predict(self, X):
        return self._outputs(X)[:, 0]


class PDFClassifier(ClassifierMixin, _PDFBase):
    """Graph classification with a PDF network, trained on cross-entropy."""

    _task = "classification"

    def fit(self, X, y):
        graphs, y = check_graph_targets(X, y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        return self._fit(graphs, encoded, num_classes=len(self.classes_))

    def predict_proba(self, X):
        out = self._outputs(X)
        out = np.exp(out - out.max(axis=1, keepdims=True))
        return out / out.sum(axis=1, keepdims=True)

    def predict(self, X):
        return self.classes_[np.argmax(self._outputs(X), axis=1)]
