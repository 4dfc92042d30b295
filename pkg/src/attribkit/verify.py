"""Self-check suites for the `verify` CLI command.

Three suites cover the mathematical contracts the attribution methods rest
on: analytic gradients against central finite differences, the
path-integral completeness identity, and surrogate recovery of a linear
black box. Each returns a SuiteResult; the CLI fails the process if any
suite fails. All suites run in double precision.
"""

from dataclasses import dataclass

import numpy as np

from .data import split_synth, synth_dataset
from .explain.integrated_gradients import integrated_gradients
from .explain.lime import PerturbationBatch, fit_surrogate, kernel_weight
from .nn.architectures import minivgg, miniresnet
from .nn.graph import build_model, forward, gradient_wrt_input
from .nn.train import train


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def fd_input_gradient(model, x, target_class, h=1e-4, chunk=256):
    """Central-difference d(logit)/d(input), forward passes only."""
    x = np.asarray(x, dtype=np.float64)
    flat = x.reshape(-1)
    n = flat.size
    probes = np.empty((2 * n,) + x.shape, dtype=np.float64)
    for i in range(n):
        plus = flat.copy()
        minus = flat.copy()
        plus[i] += h
        minus[i] -= h
        probes[2 * i] = plus.reshape(x.shape)
        probes[2 * i + 1] = minus.reshape(x.shape)
    vals = np.empty(2 * n)
    for start in range(0, 2 * n, chunk):
        trace = forward(model, probes[start : start + chunk], dtype=np.float64)
        vals[start : start + chunk] = trace.logits[:, target_class]
    grad = (vals[0::2] - vals[1::2]) / (2 * h)
    return grad.reshape(x.shape)


def max_relative_error(analytic, numeric, floor=1e-8):
    """Largest relative disagreement, ignoring entries where both sides
    are below the floor (finite differences are pure noise there)."""
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    b = np.asarray(numeric, dtype=np.float64).reshape(-1)
    live = (np.abs(a) >= floor) | (np.abs(b) >= floor)
    if not live.any():
        return 0.0
    denom = np.maximum(np.abs(a[live]), np.abs(b[live]))
    return float((np.abs(a[live] - b[live]) / denom).max())


def _layer_kind_models(seed):
    """Small single-purpose graphs exercising every layer kind."""
    rng = np.random.default_rng(seed)
    cases = []

    def _model(defs, input_shape, n_classes):
        m = build_model(defs, input_shape, [f"c{i}" for i in range(n_classes)], seed=seed)
        return m

    cases.append(("conv2d", _model(
        [("conv", "conv2d", {"in_channels": 2, "out_channels": 3, "kernel": 3,
                             "stride": 1, "pad": 1}),
         ("gap", "global_avg_pool", {}),
         ("out", "dense", {"in_features": 3, "out_features": 3})],
        (2, 6, 6), 3)))
    cases.append(("relu", _model(
        [("conv", "conv2d", {"in_channels": 1, "out_channels": 2, "kernel": 3,
                             "stride": 1, "pad": 1}),
         ("act", "relu", {}),
         ("gap", "global_avg_pool", {}),
         ("out", "dense", {"in_features": 2, "out_features": 2})],
        (1, 6, 6), 2)))
    cases.append(("maxpool2x2", _model(
        [("conv", "conv2d", {"in_channels": 1, "out_channels": 2, "kernel": 3,
                             "stride": 1, "pad": 1}),
         ("pool", "maxpool2x2", {}),
         ("gap", "global_avg_pool", {}),
         ("out", "dense", {"in_features": 2, "out_features": 2})],
        (1, 6, 6), 2)))
    cases.append(("global_avg_pool", _model(
        [("gap", "global_avg_pool", {}),
         ("out", "dense", {"in_features": 2, "out_features": 2})],
        (2, 4, 4), 2)))
    cases.append(("dense", _model(
        [("fc1", "dense", {"in_features": 5, "out_features": 4}),
         ("act", "relu", {}),
         ("fc2", "dense", {"in_features": 4, "out_features": 3})],
        (5,), 3)))
    cases.append(("softmax", _model(
        [("fc1", "dense", {"in_features": 4, "out_features": 4}),
         ("mid", "softmax", {}),
         ("fc2", "dense", {"in_features": 4, "out_features": 3})],
        (4,), 3)))
    cases.append(("residual_add", _model(
        [("conv_a", "conv2d", {"in_channels": 2, "out_channels": 2, "kernel": 3,
                               "stride": 1, "pad": 1}),
         ("act", "relu", {}),
         ("conv_b", "conv2d", {"in_channels": 2, "out_channels": 2, "kernel": 3,
                               "stride": 1, "pad": 1}),
         ("add", "residual_add", {"source": "act"}),
         ("gap", "global_avg_pool", {}),
         ("out", "dense", {"in_features": 2, "out_features": 2})],
        (2, 6, 6), 2)))
    del rng
    return cases


def gradient_suite(seeds=range(3), tol=1e-4, arch_size=16):
    """Analytic vs finite-difference input gradients, all layer kinds plus
    both reference architectures."""
    worst = 0.0
    worst_case = ""
    for seed in seeds:
        rng = np.random.default_rng(1000 + seed)
        for name, model in _layer_kind_models(seed):
            x = rng.normal(0.0, 1.0, size=model.input_shape)
            c = int(rng.integers(model.n_classes))
            trace = forward(model, x, dtype=np.float64)
            analytic = gradient_wrt_input(trace, c)[0]
            numeric = fd_input_gradient(model, x, c)
            err = max_relative_error(analytic, numeric)
            if err > worst:
                worst, worst_case = err, f"{name} seed={seed}"
        for arch_name, builder in (("minivgg", minivgg), ("miniresnet", miniresnet)):
            model = builder(input_size=arch_size, seed=seed)
            x = rng.uniform(0.0, 1.0, size=model.input_shape)
            c = int(rng.integers(model.n_classes))
            trace = forward(model, x, dtype=np.float64)
            analytic = gradient_wrt_input(trace, c)[0]
            numeric = fd_input_gradient(model, x, c)
            err = max_relative_error(analytic, numeric)
            if err > worst:
                worst, worst_case = err, f"{arch_name} seed={seed}"
    return SuiteResult(
        name="gradient-check",
        passed=worst <= tol,
        detail=f"max relative error {worst:.3e} ({worst_case}), tolerance {tol:g}",
    )


def completeness_suite(seed=0, n_images=8, steps=50, rel_tol=0.01):
    """Relative completeness gap at the default step count, on a briefly
    trained model so score deltas are meaningfully large."""
    ds = synth_dataset(n_per_class=30, seed=seed)
    train_ds, test_ds = split_synth(ds, seed=seed)
    model = minivgg(seed=seed)
    model, _ = train(model, (train_ds.images, train_ds.labels), epochs=2, lr=0.1,
                     seed=seed)
    checked = 0
    worst = 0.0
    for img in test_ds.images[:n_images]:
        res = integrated_gradients(model, img, steps=steps, dtype=np.float64)
        delta = abs(res.params["score_delta"])
        if delta <= 0.1:
            continue
        checked += 1
        worst = max(worst, res.completeness_gap / delta)
    passed = checked > 0 and worst <= rel_tol
    return SuiteResult(
        name="ig-completeness",
        passed=passed,
        detail=(
            f"worst relative gap {worst:.4%} over {checked} images at "
            f"m={steps}, tolerance {rel_tol:.0%}"
        ),
    )


def surrogate_suite(seed=0, k=4, n=200, lam=1e-6, coef_tol=1e-3, r2_min=0.999):
    """Recovery of a black box linear in the mask vector."""
    rng = np.random.default_rng(seed)
    masks = np.ones((n, k), dtype=np.int8)
    masks[1:] = rng.integers(0, 2, size=(n - 1, k), dtype=np.int8)
    outputs = masks.mean(axis=1)
    batch = PerturbationBatch(
        masks=masks, outputs=outputs, weights=kernel_weight(masks), seed=seed,
    )
    coef, intercept, r2 = fit_surrogate(batch, ridge_lambda=lam)
    err = float(np.abs(coef - 1.0 / k).max())
    passed = err <= coef_tol and r2 >= r2_min
    return SuiteResult(
        name="lime-surrogate",
        passed=passed,
        detail=(
            f"max coefficient error {err:.2e} (tolerance {coef_tol:g}), "
            f"weighted R^2 {r2:.6f} (minimum {r2_min}), intercept {intercept:.4f}"
        ),
    )


def run_all(seed=0):
    return [
        gradient_suite(seeds=range(seed, seed + 3)),
        completeness_suite(seed=seed),
        surrogate_suite(seed=seed),
    ]
