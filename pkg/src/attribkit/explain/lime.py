"""Local surrogate explanations over image segments.

An image is partitioned into interpretable segments; binary masks over the
segments define perturbed variants (absent segments are filled with the
image's per-channel mean color). Each mask is weighted by an exponential
kernel exp(-d^2 / sigma^2) where d is by default the cosine distance
between the mask and the all-ones vector, and a weighted ridge surrogate
fit over (mask, black-box probability) pairs yields one signed coefficient
per segment: positive marks segments that raise the explained class's
probability, negative marks segments that suppress it.

The black box only ever sees perturbed images (model-agnostic): any
callable mapping an image batch to class probabilities works, as does a
ModelGraph or fitted classifier. Sampling is seeded and fully deterministic.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .._precision import resolve_dtype
from ..nn.graph import forward


@dataclass
class SegmentMap:
    ids: np.ndarray        # (H, W) int, values in [0, n_segments)
    n_segments: int
    method: str            # "grid" or "slic"


@dataclass
class PerturbationBatch:
    """Masks, black-box outputs for one class, and kernel weights."""

    masks: np.ndarray      # (N, K) in {0, 1}; row 0 is all ones
    outputs: np.ndarray    # (N,) target-class probabilities
    weights: np.ndarray    # (N,) kernel weights in (0, 1]
    seed: int | None = None


@dataclass
class LimeExplanation:
    coefficients: np.ndarray   # (K,) signed segment importances
    intercept: float
    r2: float                  # weighted goodness of fit, <= 1
    segments: SegmentMap
    target_class: int
    n_samples: int
    params: dict


def _grid_axis(length, k):
    if k < 1:
        raise ValueError(f"grid count must be >= 1, got {k}")
    base = length // k
    if base < 1:
        raise ValueError(f"grid of {k} cells is larger than extent {length}")
    edges = [i * base for i in range(k)] + [length]
    return edges


def segment(image, grid_k=8, method="grid", seed=0, slic_iters=10,
            slic_compactness=0.1):
    """Partition an image into segments.

    The default is a regular grid with grid_k cells per axis (a pair gives
    per-axis counts); cells are as equal as floor division allows and the
    trailing row/column absorbs the remainder. method="slic" runs a
    SLIC-like iterative clustering on (position, color) features instead,
    followed by a connectivity cleanup; it is deterministic for a given
    image but its segment count may differ slightly from grid_k**2.
    """
    image = np.asarray(image)
    if image.ndim != 3:
        raise ValueError(f"expected a (C, H, W) image, got shape {image.shape}")
    h, w = image.shape[1], image.shape[2]
    ky, kx = (grid_k, grid_k) if np.ndim(grid_k) == 0 else grid_k
    if method == "grid":
        ye = _grid_axis(h, ky)
        xe = _grid_axis(w, kx)
        ids = np.empty((h, w), dtype=np.int64)
        for gy in range(ky):
            for gx in range(kx):
                ids[ye[gy] : ye[gy + 1], xe[gx] : xe[gx + 1]] = gy * kx + gx
        return SegmentMap(ids=ids, n_segments=ky * kx, method="grid")
    if method == "slic":
        return _slic_segment(image, ky, kx, slic_iters, slic_compactness)
    raise ValueError(f"unknown segmentation method {method!r}")


def _slic_segment(image, ky, kx, iters, compactness):
    h, w = image.shape[1], image.shape[2]
    if ky > h or kx > w:
        raise ValueError(f"grid of {(ky, kx)} cells is larger than image {(h, w)}")
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    # Feature space: scaled coordinates plus channels.
    step = np.sqrt(h * w / (ky * kx))
    pos_scale = compactness / step
    feats = np.concatenate(
        [
            (yy * pos_scale)[None],
            (xx * pos_scale)[None],
            image.astype(np.float64),
        ],
        axis=0,
    ).reshape(image.shape[0] + 2, -1).T  # (H*W, C+2)

    ye = _grid_axis(h, ky)
    xe = _grid_axis(w, kx)
    centers = []
    for gy in range(ky):
        for gx in range(kx):
            cy = (ye[gy] + ye[gy + 1]) // 2
            cx = (xe[gx] + xe[gx + 1]) // 2
            centers.append(feats[cy * w + cx])
    centers = np.array(centers)

    assign = None
    for _ in range(iters):
        d2 = ((feats[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for k in range(centers.shape[0]):
            sel = feats[assign == k]
            if len(sel):
                centers[k] = sel.mean(axis=0)
    ids = _enforce_connectivity(assign.reshape(h, w))
    return SegmentMap(ids=ids, n_segments=int(ids.max()) + 1, method="slic")


def _enforce_connectivity(labels):
    """Relabel 4-connected components; orphan fragments merge into the
    neighboring component they share the longest border with."""
    h, w = labels.shape
    comp = np.full((h, w), -1, dtype=np.int64)
    comp_size = []
    comp_label = []
    for sy in range(h):
        for sx in range(w):
            if comp[sy, sx] >= 0:
                continue
            cid = len(comp_size)
            stack = [(sy, sx)]
            comp[sy, sx] = cid
            size = 0
            while stack:
                y, x = stack.pop()
                size += 1
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if 0 <= ny < h and 0 <= nx < w and comp[ny, nx] < 0 \
                            and labels[ny, nx] == labels[sy, sx]:
                        comp[ny, nx] = cid
                        stack.append((ny, nx))
            comp_size.append(size)
            comp_label.append(labels[sy, sx])
    # Keep the largest component per label; merge the rest into neighbors.
    n_comp = len(comp_size)
    keep = np.zeros(n_comp, dtype=bool)
    best = {}
    for cid in range(n_comp):
        lab = comp_label[cid]
        if lab not in best or comp_size[cid] > comp_size[best[lab]]:
            best[lab] = cid
    for cid in best.values():
        keep[cid] = True
    # Fold every orphan fragment into the kept component it shares the
    # longest border with; repeat until none are left (a fragment whose
    # neighbors are all orphans gains a kept neighbor on a later pass).
    pending = [cid for cid in range(n_comp) if not keep[cid]]
    while pending:
        still = []
        for cid in pending:
            mask = comp == cid
            border = {}
            ys, xs = np.nonzero(mask)
            for y, x in zip(ys, xs):
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if 0 <= ny < h and 0 <= nx < w:
                        nc = comp[ny, nx]
                        if nc != cid and keep[nc]:
                            border[nc] = border.get(nc, 0) + 1
            if border:
                target = max(sorted(border), key=lambda kk: border[kk])
                comp[mask] = target
            else:
                still.append(cid)
        if len(still) == len(pending):
            break
        pending = still
    # Compact ids in scan order.
    out = np.empty_like(comp)
    remap = {}
    for y in range(h):
        for x in range(w):
            cid = comp[y, x]
            if cid not in remap:
                remap[cid] = len(remap)
            out[y, x] = remap[cid]
    return out


def mean_fill_color(image):
    """Per-channel mean, the fill for absent segments. Mean fill avoids
    injecting an artificial black-image class signal that zeros would."""
    return np.asarray(image).mean(axis=(1, 2))


def perturb(image, segments, mask):
    """Copy present segments from the image, fill absent ones with the
    per-channel mean color."""
    image = np.asarray(image)
    mask = np.asarray(mask)
    if mask.shape != (segments.n_segments,):
        raise ValueError(
            f"mask length {mask.shape} does not match segment count "
            f"{segments.n_segments}"
        )
    present = mask.astype(bool)[segments.ids]  # (H, W)
    fill = mean_fill_color(image).astype(image.dtype)
    return np.where(present[None], image, fill[:, None, None])


def mask_cosine_distance(mask):
    """Cosine distance between a binary mask and the all-ones vector.
    The all-zeros mask, where the cosine is undefined, is assigned the
    maximum distance 1."""
    mask = np.asarray(mask, dtype=np.float64)
    k = mask.shape[-1]
    ones = mask.sum(axis=-1)
    with np.errstate(invalid="ignore"):
        sim = ones / (np.sqrt(ones) * np.sqrt(k))
    return np.where(ones == 0, 1.0, 1.0 - sim)


def kernel_weight(mask, sigma=0.25):
    """Exponential locality kernel exp(-d^2 / sigma^2) on mask distance."""
    if sigma <= 0:
        raise ValueError(f"kernel width must be positive, got {sigma}")
    d = mask_cosine_distance(mask)
    return np.exp(-(d ** 2) / (sigma ** 2))


def fit_surrogate(batch, ridge_lambda=1.0):
    """Closed-form weighted ridge fit of outputs on masks.

    Minimizes sum_n w_n (y_n - beta . z_n - beta0)^2 + lambda ||beta||^2
    with an unpenalized intercept (handled by weighted centering). Returns
    (coefficients, intercept, weighted_r2).
    """
    z = np.asarray(batch.masks, dtype=np.float64)
    y = np.asarray(batch.outputs, dtype=np.float64)
    w = np.asarray(batch.weights, dtype=np.float64)
    if ridge_lambda < 0:
        raise ValueError(f"ridge lambda must be >= 0, got {ridge_lambda}")
    wsum = w.sum()
    z_bar = (w[:, None] * z).sum(axis=0) / wsum
    y_bar = float((w * y).sum() / wsum)
    zc = z - z_bar
    yc = y - y_bar
    gram = zc.T @ (w[:, None] * zc)
    k = gram.shape[0]
    gram_reg = gram + ridge_lambda * np.eye(k)
    rhs = zc.T @ (w * yc)
    if ridge_lambda == 0:
        if np.linalg.matrix_rank(gram, hermitian=True) < k:
            raise np.linalg.LinAlgError(
                "singular normal equations with lambda=0; use lambda > 0"
            )
    beta = np.linalg.solve(gram_reg, rhs)
    intercept = y_bar - float(z_bar @ beta)
    resid = yc - zc @ beta
    ss_res = float((w * resid ** 2).sum())
    ss_tot = float((w * yc ** 2).sum())
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-30 else -np.inf
    else:
        r2 = 1.0 - ss_res / ss_tot
    return beta, intercept, r2


def _as_predict_fn(model, dtype):
    if callable(model) and not hasattr(model, "layers") \
            and not hasattr(model, "model_"):
        return model
    if hasattr(model, "model_"):
        model = model.model_
    def predict(batch):
        return forward(model, batch, dtype=dtype).probabilities
    return predict


def explain(model, image, num_samples=1000, top_labels=3, seed=0,
            sigma=0.25, ridge_lambda=1.0, grid_k=8, method="grid",
            distance_mode="cosine", dtype=None, chunk=64, segments=None):
    """Explain the top predicted classes of one image.

    One shared batch of num_samples masks is drawn (independent
    Bernoulli(1/2) per segment; the first sample is always the unperturbed
    all-ones mask), the black box is evaluated on every perturbed image,
    and a weighted ridge surrogate is fit per explained class. Returns one
    LimeExplanation per top label, most probable class first. Identical
    seeds give bit-identical results.
    """
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    if top_labels < 1:
        raise ValueError(f"top_labels must be >= 1, got {top_labels}")
    if distance_mode not in ("cosine", "pixel"):
        raise ValueError(f"unknown distance mode {distance_mode!r}")
    dt = resolve_dtype(dtype)
    image = np.ascontiguousarray(image, dtype=dt)
    predict = _as_predict_fn(model, dt)
    seg = segments if segments is not None else segment(image, grid_k, method=method)
    k = seg.n_segments

    rng = np.random.default_rng(seed)
    masks = np.ones((num_samples, k), dtype=np.int8)
    if num_samples > 1:
        masks[1:] = rng.integers(0, 2, size=(num_samples - 1, k), dtype=np.int8)

    fill = mean_fill_color(image).astype(image.dtype)
    outputs = []
    pixel_d = np.zeros(num_samples)
    for start in range(0, num_samples, chunk):
        mb = masks[start : start + chunk]
        present = mb.astype(bool)[:, seg.ids]               # (n, H, W)
        batch = np.where(present[:, None], image[None], fill[None, :, None, None])
        probs = np.asarray(predict(batch))
        if probs.ndim != 2 or probs.shape[0] != len(mb):
            raise ValueError(
                f"black box returned shape {probs.shape} for a batch of {len(mb)}"
            )
        outputs.append(probs)
        if distance_mode == "pixel":
            delta = (batch - image[None]).reshape(len(mb), -1).astype(np.float64)
            pixel_d[start : start + len(mb)] = np.sqrt((delta ** 2).sum(axis=1))
    outputs = np.concatenate(outputs, axis=0)

    if distance_mode == "cosine":
        weights = kernel_weight(masks, sigma)
    else:
        if sigma <= 0:
            raise ValueError(f"kernel width must be positive, got {sigma}")
        weights = np.exp(-(pixel_d ** 2) / (sigma ** 2))

    order = np.argsort(-outputs[0], kind="stable")
    labels = order[: min(top_labels, outputs.shape[1])]
    results = []
    for label in labels:
        batch_view = PerturbationBatch(
            masks=masks, outputs=outputs[:, label], weights=weights, seed=seed,
        )
        coef, intercept, r2 = fit_surrogate(batch_view, ridge_lambda)
        results.append(
            LimeExplanation(
                coefficients=coef,
                intercept=intercept,
                r2=r2,
                segments=seg,
                target_class=int(label),
                n_samples=num_samples,
                params={
                    "num_samples": int(num_samples),
                    "top_labels": int(top_labels),
                    "seed": seed,
                    "sigma": sigma,
                    "ridge_lambda": ridge_lambda,
                    "grid_k": grid_k,
                    "method": seg.method,
                    "distance_mode": distance_mode,
                },
            )
        )
    return results


class LimeImageExplainer(BaseEstimator):
    """Estimator-style wrapper around :func:`explain`."""

    def __init__(self, num_samples=1000, top_labels=3, seed=0, sigma=0.25,
                 ridge_lambda=1.0, grid_k=8, method="grid",
                 distance_mode="cosine", precision=None, chunk=64):
        self.num_samples = num_samples
        self.top_labels = top_labels
        self.seed = seed
        self.sigma = sigma
        self.ridge_lambda = ridge_lambda
        self.grid_k = grid_k
        self.method = method
        self.distance_mode = distance_mode
        self.precision = precision
        self.chunk = chunk

    def explain(self, model, image):
        return explain(
            model, image, num_samples=self.num_samples,
            top_labels=self.top_labels, seed=self.seed, sigma=self.sigma,
            ridge_lambda=self.ridge_lambda, grid_k=self.grid_k,
            method=self.method, distance_mode=self.distance_mode,
            dtype=self.precision, chunk=self.chunk,
        )
