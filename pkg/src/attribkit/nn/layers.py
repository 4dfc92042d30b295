"""Layer definitions with forward and reverse-mode backward rules.

All activations are batch-first: images are (N, C, H, W), vectors (N, F).
Convolution is im2col + matmul; its backward scatters column gradients back
with k*k shifted adds, which keeps memory bounded and the reduction order
fixed (bitwise reproducible run-to-run).
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

KINDS = (
    "conv2d",
    "relu",
    "maxpool2x2",
    "global_avg_pool",
    "dense",
    "softmax",
    "residual_add",
)
PARAMETERIZED = ("conv2d", "dense")


@dataclass(frozen=True)
class LayerSpec:
    """One node of the layer chain.

    params by kind:
      conv2d       in_channels, out_channels, kernel, stride (1), pad (kernel//2)
      dense        in_features, out_features
      residual_add source (id of an earlier layer whose output is added)
      relu / maxpool2x2 / global_avg_pool / softmax  no parameters
    """

    id: str
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"layer {self.id!r}: unknown kind {self.kind!r}")


def init_weights(spec, rng, dtype=np.float32):
    """He-style fan-in scaled Gaussian weights, zero biases."""
    p = spec.params
    if spec.kind == "conv2d":
        cin, cout, k = p["in_channels"], p["out_channels"], p["kernel"]
        fan_in = cin * k * k
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(cout, cin, k, k))
        return {"w": w.astype(dtype), "b": np.zeros(cout, dtype=dtype)}
    if spec.kind == "dense":
        fin, fout = p["in_features"], p["out_features"]
        w = rng.normal(0.0, np.sqrt(2.0 / fin), size=(fout, fin))
        return {"w": w.astype(dtype), "b": np.zeros(fout, dtype=dtype)}
    return None


def infer_shape(spec, in_shape, source_shape=None):
    """Output shape (per sample) of a layer, raising on inconsistency."""
    p = spec.params
    if spec.kind == "conv2d":
        if len(in_shape) != 3 or in_shape[0] != p["in_channels"]:
            raise ValueError(
                f"layer {spec.id!r}: expects ({p['in_channels']}, H, W) input, "
                f"got {in_shape}"
            )
        k, s = p["kernel"], p.get("stride", 1)
        pad = p.get("pad", k // 2)
        ho = (in_shape[1] + 2 * pad - k) // s + 1
        wo = (in_shape[2] + 2 * pad - k) // s + 1
        if ho < 1 or wo < 1:
            raise ValueError(f"layer {spec.id!r}: kernel larger than padded input {in_shape}")
        return (p["out_channels"], ho, wo)
    if spec.kind == "maxpool2x2":
        if len(in_shape) != 3:
            raise ValueError(f"layer {spec.id!r}: expects (C, H, W) input, got {in_shape}")
        c, h, w = in_shape
        if h % 2 or w % 2:
            raise ValueError(f"layer {spec.id!r}: spatial extents must be even, got {in_shape}")
        return (c, h // 2, w // 2)
    if spec.kind == "global_avg_pool":
        if len(in_shape) != 3:
            raise ValueError(f"layer {spec.id!r}: expects (C, H, W) input, got {in_shape}")
        return (in_shape[0],)
    if spec.kind == "dense":
        if len(in_shape) != 1 or in_shape[0] != p["in_features"]:
            raise ValueError(
                f"layer {spec.id!r}: expects ({p['in_features']},) input, got {in_shape}"
            )
        return (p["out_features"],)
    if spec.kind == "softmax":
        if len(in_shape) != 1:
            raise ValueError(f"layer {spec.id!r}: expects a vector input, got {in_shape}")
        return in_shape
    if spec.kind == "residual_add":
        if source_shape is None:
            raise ValueError(f"layer {spec.id!r}: residual source missing")
        if tuple(source_shape) != tuple(in_shape):
            raise ValueError(
                f"layer {spec.id!r}: residual shapes differ, "
                f"{in_shape} vs source {source_shape}"
            )
        return in_shape
    # relu
    return in_shape


def _conv_geometry(spec, x):
    p = spec.params
    k, s = p["kernel"], p.get("stride", 1)
    pad = p.get("pad", k // 2)
    n, c, h, w = x.shape
    ho = (h + 2 * pad - k) // s + 1
    wo = (w + 2 * pad - k) // s + 1
    return k, s, pad, n, c, ho, wo


def _im2col(x, k, s, pad):
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::s, ::s]
    n, c, ho, wo = win.shape[:4]
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5))
    return cols.reshape(n * ho * wo, c * k * k), (n, c, ho, wo)


def conv2d_forward(spec, weights, x):
    k, s, pad, n, c, ho, wo = _conv_geometry(spec, x)
    w = weights["w"].astype(x.dtype, copy=False)
    b = weights["b"].astype(x.dtype, copy=False)
    cols, (_, _, ho, wo) = _im2col(x, k, s, pad)
    out = cols @ w.reshape(w.shape[0], -1).T + b
    return np.ascontiguousarray(out.reshape(n, ho, wo, -1).transpose(0, 3, 1, 2))


def conv2d_backward(spec, weights, x, grad_out, want_param_grads=False):
    k, s, pad, n, c, ho, wo = _conv_geometry(spec, x)
    w = weights["w"].astype(x.dtype, copy=False)
    f = w.shape[0]
    gmat = np.ascontiguousarray(grad_out.transpose(0, 2, 3, 1)).reshape(n * ho * wo, f)
    dcols = (gmat @ w.reshape(f, -1)).reshape(n, ho, wo, c, k, k)
    h, wdt = x.shape[2], x.shape[3]
    dxp = np.zeros((n, c, h + 2 * pad, wdt + 2 * pad), dtype=x.dtype)
    for ky in range(k):
        for kx in range(k):
            dxp[:, :, ky : ky + s * ho : s, kx : kx + s * wo : s] += (
                dcols[:, :, :, :, ky, kx].transpose(0, 3, 1, 2)
            )
    dx = dxp[:, :, pad : pad + h, pad : pad + wdt] if pad else dxp
    grads = None
    if want_param_grads:
        cols, _ = _im2col(x, k, s, pad)
        dw = (gmat.T @ cols).reshape(f, c, k, k)
        grads = {"w": dw, "b": gmat.sum(axis=0)}
    return np.ascontiguousarray(dx), grads


def maxpool_forward(x):
    n, c, h, w = x.shape
    xr = x.reshape(n, c, h // 2, 2, w // 2, 2)
    tiles = np.ascontiguousarray(xr.transpose(0, 1, 2, 4, 3, 5)).reshape(
        n, c, h // 2, w // 2, 4
    )
    return tiles.max(axis=-1)


def maxpool_backward(x, grad_out):
    # Recompute the (deterministic, first-max) winner positions from the input.
    n, c, h, w = x.shape
    xr = x.reshape(n, c, h // 2, 2, w // 2, 2)
    tiles = np.ascontiguousarray(xr.transpose(0, 1, 2, 4, 3, 5)).reshape(
        n, c, h // 2, w // 2, 4
    )
    idx = tiles.argmax(axis=-1)
    dtiles = np.zeros_like(tiles)
    np.put_along_axis(dtiles, idx[..., None], grad_out[..., None], axis=-1)
    dxr = dtiles.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return np.ascontiguousarray(dxr).reshape(n, c, h, w)


def stable_softmax(z):
    """Shifted-exponent softmax over the last axis."""
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def layer_forward(spec, weights, x, source=None):
    if spec.kind == "conv2d":
        return conv2d_forward(spec, weights, x)
    if spec.kind == "relu":
        return np.maximum(x, 0)
    if spec.kind == "maxpool2x2":
        return maxpool_forward(x)
    if spec.kind == "global_avg_pool":
        return x.mean(axis=(2, 3))
    if spec.kind == "dense":
        w = weights["w"].astype(x.dtype, copy=False)
        b = weights["b"].astype(x.dtype, copy=False)
        return x @ w.T + b
    if spec.kind == "softmax":
        return stable_softmax(x)
    if spec.kind == "residual_add":
        return x + source
    raise AssertionError(spec.kind)


def layer_backward(spec, weights, x, out, grad_out, want_param_grads=False):
    """Gradient w.r.t. the layer input (and params when requested).

    Returns (grad_in, grad_source, param_grads); grad_source is non-None only
    for residual_add, where both addends receive the same upstream gradient.
    """
    if spec.kind == "conv2d":
        dx, grads = conv2d_backward(spec, weights, x, grad_out, want_param_grads)
        return dx, None, grads
    if spec.kind == "relu":
        return grad_out * (x > 0), None, None
    if spec.kind == "maxpool2x2":
        return maxpool_backward(x, grad_out), None, None
    if spec.kind == "global_avg_pool":
        n, c, h, w = x.shape
        scale = grad_out / (h * w)
        return np.broadcast_to(scale[:, :, None, None], x.shape).copy(), None, None
    if spec.kind == "dense":
        w = weights["w"].astype(x.dtype, copy=False)
        dx = grad_out @ w
        grads = None
        if want_param_grads:
            grads = {"w": grad_out.T @ x, "b": grad_out.sum(axis=0)}
        return dx, None, grads
    if spec.kind == "softmax":
        # J^T g = y * (g - <g, y>)
        inner = (grad_out * out).sum(axis=-1, keepdims=True)
        return out * (grad_out - inner), None, None
    if spec.kind == "residual_add":
        return grad_out, grad_out, None
    raise AssertionError(spec.kind)
