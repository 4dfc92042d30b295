"""Mini-batch SGD with cross-entropy loss.

Plain SGD with a fixed learning rate; mini-batch size defaults to 16.
Training is deterministic given the seed (shuffling comes from a dedicated
generator, updates run in declaration order) and never mutates the input
model. Updates run in float32 by default; pass dtype for double-precision
runs, weights are cast back to the canonical float32 storage at the end.
"""

import numpy as np

from .._precision import resolve_dtype
from ..validation import check_labels
from .graph import forward, loss_and_param_grads


def train(model, dataset, epochs, lr, seed=0, batch_size=16, dtype=None):
    """Fit a copy of `model` on dataset=(X, y); returns (model, metrics).

    metrics is one dict per epoch with keys epoch, loss, accuracy, both
    computed over the shuffled training stream of that epoch.
    """
    X, y = dataset
    X = np.asarray(X)
    if X.ndim == len(model.input_shape):
        X = X[None]
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    if X.shape[1:] != model.input_shape:
        raise ValueError(
            f"dataset sample shape {X.shape[1:]} does not match model input "
            f"{model.input_shape}"
        )
    y = check_labels(y, model.n_classes)
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} samples but {y.shape[0]} labels")
    if epochs < 0 or lr < 0:
        raise ValueError("epochs and lr must be non-negative")

    dt = resolve_dtype(dtype)
    out = model.copy()
    for wset in out.weights.values():
        for name in wset:
            wset[name] = wset[name].astype(dt)

    rng = np.random.default_rng(seed)
    n = X.shape[0]
    metrics = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            xb = np.ascontiguousarray(X[idx], dtype=dt)
            yb = y[idx]
            trace = forward(out, xb, dtype=dt)
            loss, grads = loss_and_param_grads(trace, yb)
            total_loss += loss * len(idx)
            correct += int((trace.predicted_class == yb).sum())
            if lr:
                for lid, pg in grads.items():
                    for name, g in pg.items():
                        out.weights[lid][name] -= (lr * g).astype(dt, copy=False)
        metrics.append(
            {"epoch": epoch, "loss": total_loss / n, "accuracy": correct / n}
        )

    for wset in out.weights.values():
        for name in wset:
            wset[name] = wset[name].astype(np.float32)
    return out, metrics


def evaluate(model, dataset, dtype=None, chunk=64):
    """Accuracy of `model` on dataset=(X, y)."""
    X, y = dataset
    X = np.asarray(X)
    y = check_labels(y, model.n_classes)
    correct = 0
    for start in range(0, X.shape[0], chunk):
        trace = forward(model, X[start : start + chunk], dtype=dtype)
        correct += int((trace.predicted_class == y[start : start + chunk]).sum())
    return correct / max(1, X.shape[0])
