"""Model graph, forward trace, and gradient extraction.

A ModelGraph is an immutable chain of layers plus optional residual skip
edges. A forward pass records every layer's activation, so gradients of any
class logit with respect to the input or to any conv feature map can be
pulled from the trace without re-running the network. Attribution gradients
target the pre-softmax logit of a class: the standard Grad-CAM convention,
which also avoids vanishing gradients at saturated softmax.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from .._precision import resolve_dtype
from ..validation import ensure_finite
from .layers import (
    LayerSpec,
    PARAMETERIZED,
    infer_shape,
    init_weights,
    layer_backward,
    layer_forward,
    stable_softmax,
)


@dataclass
class ModelGraph:
    """Layer chain with weights. Weights are canonically float32; forward
    passes upcast to the requested compute dtype."""

    layers: list
    weights: dict
    input_shape: tuple
    class_names: list

    def __post_init__(self):
        self.input_shape = tuple(self.input_shape)
        self.class_names = list(self.class_names)
        self._index = {}
        for i, spec in enumerate(self.layers):
            if spec.id in self._index:
                raise ValueError(f"duplicate layer id {spec.id!r}")
            self._index[spec.id] = i
        for spec in self.layers:
            needs = spec.kind in PARAMETERIZED
            if needs and spec.id not in self.weights:
                raise ValueError(f"missing weights for layer {spec.id!r}")
            if not needs and spec.id in self.weights:
                raise ValueError(f"unexpected weights for layer {spec.id!r}")
        self.layer_shapes = self._infer_shapes()
        out_dim = self.layer_shapes[self.logits_index()][0]
        if out_dim != len(self.class_names):
            raise ValueError(
                f"model produces {out_dim} logits but has "
                f"{len(self.class_names)} class names"
            )

    def _infer_shapes(self):
        shapes = []
        cur = self.input_shape
        for i, spec in enumerate(self.layers):
            src = None
            if spec.kind == "residual_add":
                j = self.layer_position(spec.params["source"])
                if j >= i:
                    raise ValueError(
                        f"layer {spec.id!r}: residual source must come earlier"
                    )
                src = shapes[j]
            cur = infer_shape(spec, cur, src)
            shapes.append(cur)
        return shapes

    @property
    def n_classes(self):
        return len(self.class_names)

    def layer_position(self, layer_id):
        try:
            return self._index[layer_id]
        except KeyError:
            raise KeyError(f"no layer named {layer_id!r}") from None

    def layer(self, layer_id):
        return self.layers[self.layer_position(layer_id)]

    def logits_index(self):
        """Index of the layer whose output is the pre-softmax logits."""
        last = len(self.layers) - 1
        if self.layers[last].kind == "softmax":
            if last == 0:
                raise ValueError("model consists of a lone softmax layer")
            return last - 1
        return last

    def conv_layer_ids(self):
        return [s.id for s in self.layers if s.kind == "conv2d"]

    def last_conv_id(self):
        ids = self.conv_layer_ids()
        if not ids:
            raise ValueError("model has no conv layer")
        return ids[-1]

    def copy(self):
        return ModelGraph(
            layers=list(self.layers),
            weights=copy.deepcopy(self.weights),
            input_shape=self.input_shape,
            class_names=list(self.class_names),
        )


def build_model(layer_defs, input_shape, class_names, seed=0):
    """Construct a graph from (id, kind, params) triples with seeded init."""
    rng = np.random.default_rng(seed)
    layers = [LayerSpec(id=i, kind=k, params=dict(p)) for i, k, p in layer_defs]
    weights = {}
    for spec in layers:
        w = init_weights(spec, rng)
        if w is not None:
            weights[spec.id] = w
    return ModelGraph(layers, weights, tuple(input_shape), list(class_names))


@dataclass
class ForwardTrace:
    """Every layer's activation for one forward pass, plus the prediction."""

    model: ModelGraph
    x: np.ndarray
    activations: list
    logits: np.ndarray
    probabilities: np.ndarray
    predicted_class: np.ndarray
    dtype: np.dtype = field(default=np.dtype(np.float64))

    def activation(self, layer_id):
        return self.activations[self.model.layer_position(layer_id)]


def forward(model, x, dtype=None):
    """Run the network, recording all activations.

    x is a batch shaped (N, *model.input_shape); a single sample is promoted.
    """
    dt = resolve_dtype(dtype)
    x = np.asarray(x, dtype=dt)
    if x.shape == model.input_shape:
        x = x[None]
    if x.shape[1:] != model.input_shape:
        raise ValueError(
            f"input shape {x.shape[1:]} does not match model input "
            f"{model.input_shape}"
        )
    x = np.ascontiguousarray(x)
    activations = []
    cur = x
    for spec in model.layers:
        src = None
        if spec.kind == "residual_add":
            src = activations[model.layer_position(spec.params["source"])]
        cur = layer_forward(spec, model.weights.get(spec.id), cur, src)
        activations.append(cur)
    li = model.logits_index()
    logits = activations[li]
    ensure_finite(logits, "logits")
    if model.layers[-1].kind == "softmax":
        probs = activations[-1]
    else:
        probs = stable_softmax(logits)
    pred = logits.argmax(axis=1)
    return ForwardTrace(model, x, activations, logits, probs, pred, dt)


def _check_class(model, target_class):
    c = int(target_class)
    if not 0 <= c < model.n_classes:
        raise ValueError(
            f"target class {c} out of range for {model.n_classes} classes"
        )
    return c


def _backprop(trace, grad_logits, stop_index=None, want_param_grads=False):
    """Reverse pass over the recorded trace.

    grads[i + 1] accumulates the gradient w.r.t. layer i's output and
    grads[0] the gradient w.r.t. the network input. Residual skips inject
    their upstream gradient directly into the source layer's slot. When
    stop_index is given, the walk stops after that layer's slot is complete
    and its accumulated output gradient is returned.
    """
    model = trace.model
    li = model.logits_index()
    grads = [None] * (len(model.layers) + 1)
    grads[li + 1] = grad_logits
    param_grads = {}
    lowest = 0 if stop_index is None else stop_index + 1
    for i in range(li, lowest - 1, -1):
        g_out = grads[i + 1]
        if g_out is None:
            continue
        spec = model.layers[i]
        x_in = trace.activations[i - 1] if i > 0 else trace.x
        g_in, g_src, pg = layer_backward(
            spec, model.weights.get(spec.id), x_in, trace.activations[i],
            g_out, want_param_grads,
        )
        if grads[i] is None:
            grads[i] = g_in
        else:
            grads[i] = grads[i] + g_in
        if g_src is not None:
            j = model.layer_position(spec.params["source"]) + 1
            if grads[j] is None:
                grads[j] = g_src.copy()
            else:
                grads[j] = grads[j] + g_src
        if pg is not None:
            param_grads[spec.id] = pg
    if stop_index is not None:
        return grads[stop_index + 1], param_grads
    return grads[0], param_grads


def _one_hot_logit_grad(trace, target_class):
    g = np.zeros_like(trace.logits)
    g[:, target_class] = 1.0
    return g


def gradient_wrt_input(trace, target_class):
    """d(logit of target_class) / d(input), shaped like the traced input."""
    c = _check_class(trace.model, target_class)
    g, _ = _backprop(trace, _one_hot_logit_grad(trace, c))
    return g


def gradient_wrt_layer(trace, layer_id, target_class):
    """d(logit of target_class) / d(feature map of a conv layer)."""
    model = trace.model
    c = _check_class(model, target_class)
    idx = model.layer_position(layer_id)
    li = model.logits_index()
    if idx == li:
        # The layer's output *is* the logit vector: identity Jacobian.
        return _one_hot_logit_grad(trace, c)
    if model.layers[idx].kind != "conv2d":
        raise ValueError(f"layer {layer_id!r} is not a conv layer")
    g, _ = _backprop(trace, _one_hot_logit_grad(trace, c), stop_index=idx)
    return g


def loss_and_param_grads(trace, y):
    """Mean cross-entropy over the batch and gradients for every weight."""
    logits = trace.logits
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(n), y]))
    g = stable_softmax(logits)
    g[np.arange(n), y] -= 1.0
    g /= n
    _, param_grads = _backprop(trace, g, want_param_grads=True)
    return loss, param_grads
