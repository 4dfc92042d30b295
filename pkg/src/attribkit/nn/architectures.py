"""Reference mini architectures.

MiniVGG is a plain conv stack; MiniResNet spends the same depth budget on
two residual blocks with doubled channel width, giving it roughly 4-5x the
parameter count (the denser of the two models). Both end in global average
pooling, a dense classifier and softmax, and accept any square input whose
side is a multiple of 4 (64 is the desk-scale default, 224 the
compatibility size).
"""

from .graph import build_model


def _check_size(input_size):
    if input_size < 8 or input_size % 4:
        raise ValueError(f"input size must be a multiple of 4 and >= 8, got {input_size}")


def _names(n_classes, class_names):
    if class_names is None:
        return [f"class{i}" for i in range(n_classes)]
    if len(class_names) != n_classes:
        raise ValueError(f"{len(class_names)} class names for {n_classes} classes")
    return list(class_names)


def conv(cin, cout, k=3):
    return {"in_channels": cin, "out_channels": cout, "kernel": k, "stride": 1, "pad": k // 2}


def minivgg(input_size=64, n_classes=3, class_names=None, seed=0):
    """[conv3x3(8)-relu-conv3x3(8)-relu-maxpool] x2 -> gap -> dense -> softmax."""
    _check_size(input_size)
    defs = [
        ("conv1", "conv2d", conv(3, 8)),
        ("relu1", "relu", {}),
        ("conv2", "conv2d", conv(8, 8)),
        ("relu2", "relu", {}),
        ("pool1", "maxpool2x2", {}),
        ("conv3", "conv2d", conv(8, 8)),
        ("relu3", "relu", {}),
        ("conv4", "conv2d", conv(8, 8)),
        ("relu4", "relu", {}),
        ("pool2", "maxpool2x2", {}),
        ("gap", "global_avg_pool", {}),
        ("dense", "dense", {"in_features": 8, "out_features": n_classes}),
        ("softmax", "softmax", {}),
    ]
    return build_model(defs, (3, input_size, input_size), _names(n_classes, class_names), seed)


def miniresnet(input_size=64, n_classes=3, class_names=None, seed=0):
    """Stem conv plus two residual blocks at 16 channels.

    Each block's skip adds the block input back onto its second conv output,
    so zeroing the branch convs collapses the block to an identity (modulo
    the trailing relu, a no-op on already non-negative inputs).
    """
    _check_size(input_size)
    width = 16
    defs = [
        ("stem_conv", "conv2d", conv(3, width)),
        ("stem_relu", "relu", {}),
        ("b1_conv1", "conv2d", conv(width, width)),
        ("b1_relu", "relu", {}),
        ("b1_conv2", "conv2d", conv(width, width)),
        ("b1_add", "residual_add", {"source": "stem_relu"}),
        ("b1_out", "relu", {}),
        ("pool1", "maxpool2x2", {}),
        ("b2_conv1", "conv2d", conv(width, width)),
        ("b2_relu", "relu", {}),
        ("b2_conv2", "conv2d", conv(width, width)),
        ("b2_add", "residual_add", {"source": "pool1"}),
        ("b2_out", "relu", {}),
        ("pool2", "maxpool2x2", {}),
        ("gap", "global_avg_pool", {}),
        ("dense", "dense", {"in_features": width, "out_features": n_classes}),
        ("softmax", "softmax", {}),
    ]
    return build_model(defs, (3, input_size, input_size), _names(n_classes, class_names), seed)


ARCHITECTURES = {"minivgg": minivgg, "miniresnet": miniresnet}


def make_model(name, **kwargs):
    try:
        builder = ARCHITECTURES[name]
    except KeyError:
        raise ValueError(
            f"unknown architecture {name!r}; valid names: {sorted(ARCHITECTURES)}"
        ) from None
    return builder(**kwargs)


def parameter_count(model):
    return sum(int(arr.size) for w in model.weights.values() for arr in w.values())
