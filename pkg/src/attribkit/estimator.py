"""Scikit-learn style classifier wrapping the CNN engine.

CnnClassifier follows the estimator contract (constructor stores params
verbatim, fit returns self, fitted attributes carry a trailing underscore,
get_params/set_params/clone work) so the network slots into pipelines and
model-selection tooling. X is an image batch (N, C, H, W) rather than a 2-D
feature matrix; y is any 1-D label array.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .nn.architectures import make_model
from .nn.graph import forward
from .nn.train import train
from .validation import check_image_batch


class CnnClassifier(BaseEstimator, ClassifierMixin):
    """Mini CNN image classifier with seeded, reproducible training.

    Parameters
    ----------
    architecture : "minivgg" or "miniresnet"
    input_size : square input side (multiple of 4)
    epochs, lr, batch_size, seed : SGD training knobs
    precision : "f32"/"f64" compute override (weights stay float32)
    """

    def __init__(self, architecture="minivgg", input_size=64, epochs=5,
                 lr=0.1, batch_size=16, seed=0, precision=None):
        self.architecture = architecture
        self.input_size = input_size
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed
        self.precision = precision

    def fit(self, X, y):
        X = check_image_batch(X, dtype=self.precision)
        y = np.asarray(y)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError(
                f"y must be 1-D with {X.shape[0]} entries, got shape {y.shape}"
            )
        self.classes_ = np.unique(y)
        codes = np.searchsorted(self.classes_, y)
        model = make_model(
            self.architecture,
            input_size=self.input_size,
            n_classes=len(self.classes_),
            class_names=[str(c) for c in self.classes_],
            seed=self.seed,
        )
        if X.shape[1:] != model.input_shape:
            raise ValueError(
                f"X has sample shape {X.shape[1:]}, model expects {model.input_shape}"
            )
        self.model_, self.history_ = train(
            model, (X, codes), epochs=self.epochs, lr=self.lr,
            seed=self.seed, batch_size=self.batch_size, dtype=self.precision,
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("CnnClassifier is not fitted; call fit first")

    def predict_proba(self, X, chunk=64):
        self._check_fitted()
        X = check_image_batch(X, dtype=self.precision)
        parts = []
        for start in range(0, X.shape[0], chunk):
            trace = forward(self.model_, X[start : start + chunk], dtype=self.precision)
            parts.append(trace.probabilities)
        return np.concatenate(parts, axis=0)

    def decision_function(self, X, chunk=64):
        self._check_fitted()
        X = check_image_batch(X, dtype=self.precision)
        parts = []
        for start in range(0, X.shape[0], chunk):
            trace = forward(self.model_, X[start : start + chunk], dtype=self.precision)
            parts.append(trace.logits)
        return np.concatenate(parts, axis=0)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
