"""Timing benchmark comparing explanation cost across models and methods.

Each (model, method, image) cell is timed with a monotonic clock wrapped
tightly around explanation generation: model loading, image decoding and
file output sit outside the timer, because the comparison is about method
cost, not I/O. Warmup runs are discarded. The harness runs everything on
the calling thread (no explainer-level parallelism), which keeps the
qualitative ordering meaningful across machines; absolute seconds are
hardware-dependent and not comparable across reports.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .explain.gradcam import grad_cam
from .explain.integrated_gradients import integrated_gradients
from .explain.lime import explain as lime_explain

METHOD_NAMES = ("gradcam", "ig", "lime")
ENV_NOTE = "single-threaded measurement (explanations run sequentially on one thread)"


@dataclass
class BenchRecord:
    model: str
    method: str
    image_id: str
    seconds: float
    params: dict = field(default_factory=dict)


@dataclass
class BenchReport:
    records: list
    models: list
    methods: list
    env_note: str = ENV_NOTE

    def mean_seconds(self, model, method):
        vals = [r.seconds for r in self.records
                if r.model == model and r.method == method]
        if not vals:
            raise KeyError(f"no records for ({model}, {method})")
        return float(np.mean(vals)), len(vals)

    def summary_grid(self):
        """{model: {method: mean seconds}} over all requested pairs."""
        return {
            m: {meth: self.mean_seconds(m, meth)[0] for meth in self.methods}
            for m in self.models
        }

    def write_records_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model", "method", "image_id", "seconds"])
            for r in self.records:
                writer.writerow([r.model, r.method, r.image_id, f"{r.seconds:.9f}"])
        return path

    def write_summary_csv(self, path):
        grid = self.summary_grid()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model", "gradcam_mean_s", "ig_mean_s", "lime_mean_s"])
            for m in self.models:
                row = [m]
                for meth in METHOD_NAMES:
                    row.append(f"{grid[m][meth]:.9f}" if meth in grid[m] else "")
                writer.writerow(row)
        return path


def _make_runner(method, seed, params):
    p = dict(params or {})
    if method == "gradcam":
        return lambda model, img: grad_cam(model, img, layer=p.get("layer"))
    if method == "ig":
        return lambda model, img: integrated_gradients(
            model, img, steps=p.get("steps", 50), baseline=p.get("baseline", "zeros"),
        )
    if method == "lime":
        return lambda model, img: lime_explain(
            model, img, num_samples=p.get("num_samples", 1000),
            top_labels=p.get("top_labels", 3), seed=seed,
            sigma=p.get("sigma", 0.25), ridge_lambda=p.get("ridge_lambda", 1.0),
            grid_k=p.get("grid_k", 8),
        )
    raise ValueError(f"unknown method {method!r}; valid names: {list(METHOD_NAMES)}")


def bench(models, methods, images, warmup=1, seed=0, method_params=None,
          image_ids=None):
    """Time every (model, method, image) triple.

    models: {name: ModelGraph}; methods: subset of gradcam/ig/lime;
    images: (N, C, H, W) array or list of single images. Returns a
    BenchReport; CSV serialization is on the report.
    """
    if not models:
        raise ValueError("no models given")
    if not methods:
        raise ValueError(f"no methods requested; valid names: {list(METHOD_NAMES)}")
    for m in methods:
        if m not in METHOD_NAMES:
            raise ValueError(f"unknown method {m!r}; valid names: {list(METHOD_NAMES)}")
    images = list(np.asarray(img) for img in images)
    if not images:
        raise ValueError("no images given")
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    if image_ids is None:
        image_ids = [f"img{i:04d}" for i in range(len(images))]
    elif len(image_ids) != len(images):
        raise ValueError(f"{len(image_ids)} ids for {len(images)} images")
    method_params = method_params or {}

    records = []
    for model_name, model in models.items():
        for method in methods:
            run = _make_runner(method, seed, method_params.get(method))
            for _ in range(warmup):
                run(model, images[0])
            for img_id, img in zip(image_ids, images):
                t0 = time.perf_counter()
                run(model, img)
                seconds = time.perf_counter() - t0
                records.append(
                    BenchRecord(
                        model=model_name, method=method, image_id=img_id,
                        seconds=seconds,
                        params=dict(method_params.get(method) or {}),
                    )
                )
    return BenchReport(records=records, models=list(models), methods=list(methods))
