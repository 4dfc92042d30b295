"""Dataset ingestion and the synthetic planted-patch corpus.

Real data loads from the directory layout root/<class_name>/*.{ppm,png};
images are decoded, bilinearly resized to the target input size and scaled
to [0, 1], and split per class with a deterministic seeded 80-20 split.

The synthetic corpus is a desk-scale stand-in with known ground truth: each
image is gray textured noise plus one bright 12x12 colored patch. The class
determines both the quadrant the patch lands in and the channel it lights
up; the color cue is what lets a network whose head is global average
pooling (hence translation-invariant) learn the task, while the quadrant
keeps the class readable off the patch position alone. Patch bounding boxes
are stored so attribution quality can be scored objectively.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensorops import bilinear_resize
from .validation import check_labels
from . import viz

QUADRANTS = ("top-left", "top-right", "bottom-left", "bottom-right", "center")


@dataclass
class DatasetManifest:
    root: str
    class_names: list
    files: dict               # class name -> sorted file list
    target_size: int
    split: float
    seed: int


@dataclass
class LoadedDataset:
    manifest: DatasetManifest
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    train_files: list
    test_files: list


@dataclass
class SynthDataset:
    images: np.ndarray        # (N, 3, S, S) float32 in [0, 1]
    labels: np.ndarray        # (N,)
    boxes: np.ndarray         # (N, 4) patch (y0, x0, height, width)
    class_names: list
    patch_size: int
    seed: int

    def subset(self, idx):
        return SynthDataset(
            images=self.images[idx], labels=self.labels[idx],
            boxes=self.boxes[idx], class_names=self.class_names,
            patch_size=self.patch_size, seed=self.seed,
        )


def split_indices(labels, split=0.8, seed=0):
    """Deterministic per-class-proportional split into (train, test)."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in np.unique(labels):
        idx = np.nonzero(labels == cls)[0]
        perm = idx[rng.permutation(len(idx))]
        n_train = int(np.floor(split * len(idx)))
        train.extend(perm[:n_train].tolist())
        test.extend(perm[n_train:].tolist())
    return np.array(sorted(train), dtype=np.intp), np.array(sorted(test), dtype=np.intp)


def _resize_image(x, target):
    if x.shape[1] == target and x.shape[2] == target:
        return x
    return np.stack([bilinear_resize(ch, target, target) for ch in x])


def load_image_file(path, target_size):
    """Decode one image file to a (3, S, S) float32 tensor in [0, 1]."""
    try:
        rgb = viz.read_image(path)
    except (ValueError, OSError) as exc:
        raise ValueError(f"cannot decode image {path}: {exc}") from None
    return _resize_image(viz.from_rgb(rgb), target_size).astype(np.float32)


def load_dataset(root, target_size=64, split=0.8, seed=0):
    """Load a root/<class>/*.{ppm,png} tree into train/test tensors."""
    root = Path(root)
    if not root.is_dir():
        raise ValueError(f"dataset root {root} is not a directory")
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not class_dirs:
        raise ValueError(f"dataset root {root} has no class subdirectories")
    files = {}
    for d in class_dirs:
        listing = sorted(p for p in d.iterdir() if p.suffix.lower() in (".ppm", ".png"))
        if not listing:
            raise ValueError(f"class directory {d} contains no images")
        files[d.name] = listing

    class_names = [d.name for d in class_dirs]
    all_files, labels = [], []
    for ci, name in enumerate(class_names):
        for p in files[name]:
            all_files.append(p)
            labels.append(ci)
    labels = np.array(labels)
    images = np.stack([load_image_file(p, target_size) for p in all_files])

    train_idx, test_idx = split_indices(labels, split=split, seed=seed)
    manifest = DatasetManifest(
        root=str(root), class_names=class_names,
        files={k: [str(p) for p in v] for k, v in files.items()},
        target_size=target_size, split=split, seed=seed,
    )
    return LoadedDataset(
        manifest=manifest,
        X_train=images[train_idx], y_train=labels[train_idx],
        X_test=images[test_idx], y_test=labels[test_idx],
        train_files=[str(all_files[i]) for i in train_idx],
        test_files=[str(all_files[i]) for i in test_idx],
    )


def _quadrant_bounds(quadrant, size, patch):
    half = size // 2
    if quadrant == "top-left":
        return 0, half - patch, 0, half - patch
    if quadrant == "top-right":
        return 0, half - patch, half, size - patch
    if quadrant == "bottom-left":
        return half, size - patch, 0, half - patch
    if quadrant == "bottom-right":
        return half, size - patch, half, size - patch
    lo = max(0, (size - patch) // 2 - size // 8)
    hi = min(size - patch, (size - patch) // 2 + size // 8)
    return lo, hi, lo, hi


def class_quadrant(label):
    return QUADRANTS[4] if label >= 4 else QUADRANTS[label]


def synth_dataset(n_per_class, classes=3, size=64, seed=0, patch=12):
    """Generate the planted-patch corpus.

    Class k's patch sits in quadrant k (classes past the fourth use the
    center) and lights channel k % 3 to ~0.95 over a gray textured-noise
    background, so the patch is both the brightest region and the only
    colored one. Bit-identical for a given seed.
    """
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    if classes < 1 or classes > 5:
        raise ValueError(f"classes must be in [1, 5], got {classes}")
    if size < 2 * patch + 4:
        raise ValueError(f"size {size} too small for {patch}x{patch} patches")
    rng = np.random.default_rng(seed)
    n = n_per_class * classes
    labels = np.repeat(np.arange(classes), n_per_class)
    images = np.empty((n, 3, size, size), dtype=np.float32)
    boxes = np.empty((n, 4), dtype=np.int64)
    coarse = max(4, size // 8)
    for i, label in enumerate(labels):
        rough = rng.normal(0.0, 1.0, size=(coarse, coarse))
        texture = bilinear_resize(rough, size, size)
        fine = rng.normal(0.0, 1.0, size=(size, size))
        gray = 0.45 + 0.08 * texture + 0.02 * fine
        img = np.repeat(gray[None].astype(np.float32), 3, axis=0)

        y_lo, y_hi, x_lo, x_hi = _quadrant_bounds(class_quadrant(label), size, patch)
        y0 = int(rng.integers(y_lo, y_hi + 1))
        x0 = int(rng.integers(x_lo, x_hi + 1))
        block = np.full((3, patch, patch), 0.45, dtype=np.float32)
        block[label % 3] = 0.95
        block += rng.normal(0.0, 0.02, size=block.shape).astype(np.float32)
        img[:, y0 : y0 + patch, x0 : x0 + patch] = block
        images[i] = np.clip(img, 0.0, 1.0)
        boxes[i] = (y0, x0, patch, patch)
    class_names = [f"class{c}" for c in range(classes)]
    check_labels(labels, classes)
    return SynthDataset(
        images=images, labels=labels, boxes=boxes,
        class_names=class_names, patch_size=patch, seed=seed,
    )


def split_synth(ds, split=0.8, seed=0):
    train_idx, test_idx = split_indices(ds.labels, split=split, seed=seed)
    return ds.subset(train_idx), ds.subset(test_idx)
