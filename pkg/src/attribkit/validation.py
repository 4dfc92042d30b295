"""Input validation helpers shared across the package.

Images are float arrays in channel-first layout: a single image is (C, H, W),
a batch is (N, C, H, W), both row-major. Validators return contiguous arrays
in the requested compute dtype and raise ValueError with the offending shape
spelled out.
"""

import numpy as np

from ._precision import resolve_dtype


def as_tensor(data, dtype=None, name="tensor"):
    """Coerce to a finite, contiguous, rank<=4 float array."""
    arr = np.ascontiguousarray(data, dtype=resolve_dtype(dtype))
    if arr.ndim < 1 or arr.ndim > 4:
        raise ValueError(f"{name} must have rank 1-4, got shape {arr.shape}")
    ensure_finite(arr, name)
    return arr


def ensure_finite(arr, name="tensor"):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_single_image(image, dtype=None):
    """Validate one (C, H, W) image."""
    arr = np.ascontiguousarray(image, dtype=resolve_dtype(dtype))
    if arr.ndim != 3:
        raise ValueError(f"expected a (C, H, W) image, got shape {arr.shape}")
    ensure_finite(arr, "image")
    return arr


def check_image_batch(X, dtype=None):
    """Validate a (N, C, H, W) batch; a single (C, H, W) image is promoted."""
    arr = np.ascontiguousarray(X, dtype=resolve_dtype(dtype))
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4:
        raise ValueError(f"expected a (N, C, H, W) batch, got shape {arr.shape}")
    ensure_finite(arr, "image batch")
    return arr


def check_labels(y, n_classes):
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {y.shape}")
    y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(
            f"labels must lie in [0, {n_classes}), got range "
            f"[{y.min()}, {y.max()}]"
        )
    return y


def check_rgb_image(img):
    """Validate a (H, W, 3) uint8 image."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected a (H, W, 3) image, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 channels, got {arr.dtype}")
    return np.ascontiguousarray(arr)
