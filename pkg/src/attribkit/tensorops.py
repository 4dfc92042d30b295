"""Dense tensor operations every other module builds on.

Tensors are plain numpy float arrays (rank 1-4, row-major, batch x channel x
height x width for images). Operations are pure, never broadcast beyond a
scalar second operand, and guarantee finite outputs.
"""

import numpy as np

from .validation import as_tensor, ensure_finite

_BINARY = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.divide,
}
_UNARY = {
    "relu": lambda a: np.maximum(a, 0),
    "exp": np.exp,
}


def elementwise(op, a, b=None):
    """Apply an elementwise op; shapes must match exactly or b is a scalar.

    op is one of add, sub, mul, div (binary) or relu, exp (unary).
    """
    a = as_tensor(a, dtype=np.asarray(a).dtype, name="a")
    if op in _UNARY:
        out = _UNARY[op](a)
    elif op in _BINARY:
        if b is None:
            raise ValueError(f"op {op!r} needs a second operand")
        if np.ndim(b) == 0:
            out = _BINARY[op](a, np.asarray(b, dtype=a.dtype))
        else:
            b = np.asarray(b, dtype=a.dtype)
            if b.shape != a.shape:
                raise ValueError(
                    f"shape mismatch for {op!r}: {a.shape} vs {b.shape}"
                )
            out = _BINARY[op](a, b)
    else:
        raise ValueError(f"unknown elementwise op {op!r}")
    return ensure_finite(out, f"elementwise({op}) result")


def reduce_mean_spatial(t):
    """Spatial mean of a (C, H, W) tensor: out[c] = mean over H and W."""
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError(f"expected rank-3 (C, H, W) input, got shape {t.shape}")
    if t.shape[1] == 0 or t.shape[2] == 0:
        raise ValueError(f"empty spatial extent in shape {t.shape}")
    return t.mean(axis=(1, 2))


def bilinear_resize(t, out_h, out_w):
    """Align-corners bilinear resize of a (H, W) map.

    Output position i maps to source coordinate i * (H-1) / (out_h-1); an
    output extent of 1 reads source coordinate 0. Resizing to the input size
    returns a bit-identical copy. Output values are clamped to the input's
    [min, max] so interpolation rounding can never escape the range.
    """
    t = np.asarray(t)
    if t.dtype.kind != "f":
        t = t.astype(np.float64)
    if t.ndim != 2:
        raise ValueError(f"expected a rank-2 (H, W) map, got shape {t.shape}")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output extents must be >= 1, got {(out_h, out_w)}")
    h, w = t.shape

    def _coords(n_in, n_out):
        if n_out == 1:
            return np.zeros(1)
        return np.arange(n_out) * ((n_in - 1) / (n_out - 1))

    ys = _coords(h, out_h)
    xs = _coords(w, out_w)
    y0 = np.minimum(np.floor(ys).astype(np.intp), h - 1)
    x0 = np.minimum(np.floor(xs).astype(np.intp), w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0).astype(t.dtype, copy=False)
    fx = (xs - x0).astype(t.dtype, copy=False)

    top = t[y0[:, None], x0[None, :]] * (1 - fx)[None, :] + t[y0[:, None], x1[None, :]] * fx[None, :]
    bot = t[y1[:, None], x0[None, :]] * (1 - fx)[None, :] + t[y1[:, None], x1[None, :]] * fx[None, :]
    out = top * (1 - fy)[:, None] + bot * fy[:, None]
    return np.clip(out, t.min(), t.max())


def minmax_normalize(t):
    """Linear rescale to [0, 1]; a constant input maps to all zeros.

    The degenerate branch is explicit: an uninformative (constant) map
    renders blank rather than producing NaN from a 0/0 division.
    """
    t = np.asarray(t)
    lo = t.min()
    hi = t.max()
    if hi == lo:
        return np.zeros_like(t)
    return (t - lo) / (hi - lo)
