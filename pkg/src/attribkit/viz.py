"""Rendering of attribution outputs as RGB images.

Three artifact families: heatmap overlays for class activation maps,
attribution masks plus overlays for path-integral attributions, and region
isolation / signed green-red renderings for segment explanations.

The heatmap colormap is piecewise linear with fixed control colors

    value 0.0 -> (0, 0, 255)   blue
    value 0.5 -> (0, 255, 0)   green
    value 1.0 -> (255, 0, 0)   red

interpolated per channel as round(255 * blend) with round-half-to-even
(numpy rint), which makes rendered outputs bit-reproducible. The canonical
on-disk format is binary PPM (P6, maxval 255), chosen because its bytes are
the pixels; PNG is supported for human consumption.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from .tensorops import minmax_normalize
from .validation import check_rgb_image

_CONTROL = np.array([[0.0, 0.0, 255.0], [0.0, 255.0, 0.0], [255.0, 0.0, 0.0]])
GREEN = np.array([0, 255, 0], dtype=np.uint8)
RED = np.array([255, 0, 0], dtype=np.uint8)


def colormap(values):
    """Map a (H, W) array of values in [0, 1] to the blue-green-red ramp."""
    v = np.asarray(values, dtype=np.float64)
    if v.size and (v.min() < 0 or v.max() > 1):
        raise ValueError(
            f"colormap input must lie in [0, 1], got range "
            f"[{v.min():g}, {v.max():g}]; normalize first"
        )
    lo = np.clip(v * 2.0, 0.0, 1.0)            # blend blue -> green
    hi = np.clip(v * 2.0 - 1.0, 0.0, 1.0)      # blend green -> red
    rgb = (
        (1 - lo)[..., None] * _CONTROL[0]
        + (lo - hi)[..., None] * _CONTROL[1]
        + hi[..., None] * _CONTROL[2]
    )
    return np.rint(rgb).astype(np.uint8)


def overlay(base, heat, alpha):
    """Blend two equal-size RGB images: round((1-alpha)*base + alpha*heat)."""
    base = check_rgb_image(base)
    heat = check_rgb_image(heat)
    if base.shape != heat.shape:
        raise ValueError(f"dimension mismatch: base {base.shape} vs heat {heat.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    mixed = (1.0 - alpha) * base.astype(np.float64) + alpha * heat.astype(np.float64)
    return np.rint(np.clip(mixed, 0, 255)).astype(np.uint8)


def to_rgb(image):
    """(C, H, W) float image in [0, 1] -> (H, W, 3) uint8."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ValueError(f"expected a (3, H, W) image, got shape {arr.shape}")
    return np.rint(np.clip(arr, 0, 1) * 255).astype(np.uint8).transpose(1, 2, 0)


def from_rgb(img):
    """(H, W, 3) uint8 -> (C, H, W) float32 in [0, 1]."""
    img = check_rgb_image(img)
    return (img.astype(np.float32) / 255.0).transpose(2, 0, 1)


def attribution_magnitude(attributions):
    """Reduce signed per-channel attributions to a [0, 1] display map by
    summing magnitudes over channels and min-max normalizing."""
    a = np.asarray(attributions)
    if a.ndim == 3:
        a = np.abs(a).sum(axis=0)
    else:
        a = np.abs(a)
    return minmax_normalize(a)


def attribution_signed_rgb(attributions):
    """Two-color signed rendering: green for positive, red for negative,
    intensity proportional to magnitude."""
    a = np.asarray(attributions, dtype=np.float64)
    if a.ndim == 3:
        a = a.sum(axis=0)
    scale = np.abs(a).max()
    if scale == 0:
        return np.zeros(a.shape + (3,), dtype=np.uint8)
    unit = a / scale
    rgb = np.zeros(a.shape + (3,), dtype=np.float64)
    rgb[..., 1] = np.clip(unit, 0, 1) * 255
    rgb[..., 0] = np.clip(-unit, 0, 1) * 255
    return np.rint(rgb).astype(np.uint8)


def _tint_strengths(coefficients):
    return minmax_normalize(np.abs(np.asarray(coefficients, dtype=np.float64)))


def render_lime(image, explanation, mode="signed", top_k=5, tint_alpha=0.5):
    """Render a segment explanation over an RGB image.

    mode="isolate" shows the top_k positive-coefficient segments on a
    neutral background (the image's per-channel mean color, matching the
    perturbation fill). mode="signed" tints positive segments green and
    negative segments red, with tint strength proportional to the min-max
    scaled coefficient magnitude; only segments with nonzero scaled
    coefficients are touched.
    """
    img = check_rgb_image(image)
    seg = explanation.segments
    if seg.ids.shape != img.shape[:2]:
        raise ValueError(
            f"segment map {seg.ids.shape} does not match image {img.shape[:2]}"
        )
    coef = np.asarray(explanation.coefficients, dtype=np.float64)
    if mode == "isolate":
        fill = np.rint(img.reshape(-1, 3).mean(axis=0)).astype(np.uint8)
        out = np.broadcast_to(fill, img.shape).copy()
        pos = np.nonzero(coef > 0)[0]
        chosen = pos[np.argsort(-coef[pos], kind="stable")][:top_k]
        show = np.isin(seg.ids, chosen)
        out[show] = img[show]
        return out
    if mode == "signed":
        strengths = _tint_strengths(coef)
        out = img.astype(np.float64)
        for k in np.nonzero(strengths > 0)[0]:
            color = GREEN if coef[k] > 0 else RED
            a = tint_alpha * strengths[k]
            sel = seg.ids == k
            out[sel] = (1.0 - a) * out[sel] + a * color.astype(np.float64)
        return np.rint(np.clip(out, 0, 255)).astype(np.uint8)
    raise ValueError(f"unknown render mode {mode!r}")


def write_image(img, path):
    """Write an RGB image; format from the suffix (.ppm canonical, .png)."""
    img = check_rgb_image(img)
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".ppm":
        h, w = img.shape[:2]
        with open(path, "wb") as fh:
            fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
            fh.write(img.tobytes())
    elif suffix == ".png":
        Image.fromarray(img, mode="RGB").save(path, format="PNG")
    else:
        raise ValueError(f"unsupported image format {suffix!r} (use .ppm or .png)")
    return path


def _read_ppm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    # Header: magic, width, height, maxval, separated by whitespace;
    # '#' starts a comment running to end of line.
    fields = []
    i = 0
    while len(fields) < 4:
        if i >= len(data):
            raise ValueError(f"{path}: truncated PPM header")
        ch = data[i : i + 1]
        if ch == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace() \
                    and data[j : j + 1] != b"#":
                j += 1
            fields.append(data[i:j])
            i = j
    if fields[0] != b"P6":
        raise ValueError(f"{path}: not a binary (P6) PPM file")
    w, h, maxval = (int(v) for v in fields[1:])
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    i += 1  # single whitespace byte after maxval
    pixels = data[i : i + w * h * 3]
    if len(pixels) != w * h * 3:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w, 3).copy()


def read_image(path):
    """Read a .ppm or .png file into a (H, W, 3) uint8 array."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such image: {path}")
    suffix = path.suffix.lower()
    if suffix == ".ppm":
        return _read_ppm(path)
    if suffix == ".png":
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    raise ValueError(f"unsupported image format {suffix!r} (use .ppm or .png)")
