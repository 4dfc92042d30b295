"""Class activation maps from gradient-weighted conv feature maps.

Channel importances are the global average pool of the class logit's
gradient over a conv layer's feature maps; the map is the ReLU of the
importance-weighted channel sum, upsampled to input resolution and
normalized to [0, 1]. The ReLU keeps only channels whose increase raises
the class score, so the heatmap reads as non-negative evidence.

By default the last conv layer supplies the feature maps and the
top-predicted class is explained. The whole computation is deterministic.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ..nn.graph import forward, gradient_wrt_layer
from ..tensorops import bilinear_resize, minmax_normalize, reduce_mean_spatial


@dataclass
class ClassActivationMap:
    """Raw feature-map-resolution heatmap plus its display form."""

    raw_map: np.ndarray          # (H', W'), non-negative, importance scale
    upsampled_map: np.ndarray    # (H, W), normalized to [0, 1]
    target_class: int
    layer_id: str
    channel_weights: np.ndarray  # one importance weight per channel
    params: dict


def channel_weights(trace, layer_id, target_class):
    """Per-channel importance: spatial mean of the logit gradient."""
    grad = gradient_wrt_layer(trace, layer_id, target_class)
    return reduce_mean_spatial(grad[0])


def grad_cam(model, image, target_class=None, layer=None, dtype=None):
    """Compute the class activation map for one image.

    model may be a ModelGraph or a fitted estimator wrapping one. layer
    defaults to the last conv layer, target_class to the top prediction.
    """
    model = getattr(model, "model_", model)
    layer_id = model.last_conv_id() if layer is None else layer
    trace = forward(model, np.asarray(image)[None], dtype=dtype)
    c = int(trace.predicted_class[0]) if target_class is None else int(target_class)

    weights = channel_weights(trace, layer_id, c)
    feature_maps = trace.activation(layer_id)[0]
    raw = np.maximum(np.tensordot(weights, feature_maps, axes=1), 0)

    # Canonicalize the weight scale before building the display map: the
    # quotients a_k / max|a| are unchanged when every a_k carries a common
    # positive factor (e.g. a rescaled classifier head), which makes the
    # normalized heatmap exactly invariant to that factor. Normalizing only
    # at the end would cancel it merely up to rounding.
    amax = np.max(np.abs(weights))
    unit = weights / amax if amax != 0 else np.zeros_like(weights)
    display = np.maximum(np.tensordot(unit, feature_maps, axes=1), 0)
    h, w = trace.x.shape[2], trace.x.shape[3]
    upsampled = minmax_normalize(bilinear_resize(display, h, w))

    return ClassActivationMap(
        raw_map=raw,
        upsampled_map=upsampled,
        target_class=c,
        layer_id=layer_id,
        channel_weights=weights,
        params={"layer": layer_id, "target_class": c, "dtype": str(trace.dtype)},
    )


class GradCam(BaseEstimator):
    """Estimator-style wrapper around :func:`grad_cam`.

    Parameters
    ----------
    layer : str or None
        Conv layer id to read feature maps from; None picks the last one.
    target_class : int or None
        Class to explain; None explains the top prediction.
    precision : str or None
        "f32"/"f64" compute override.
    """

    def __init__(self, layer=None, target_class=None, precision=None):
        self.layer = layer
        self.target_class = target_class
        self.precision = precision

    def explain(self, model, image):
        return grad_cam(
            model,
            image,
            target_class=self.target_class,
            layer=self.layer,
            dtype=self.precision,
        )
