from .architectures import ARCHITECTURES, make_model, minivgg, miniresnet, parameter_count
from .graph import (
    ForwardTrace,
    ModelGraph,
    build_model,
    forward,
    gradient_wrt_input,
    gradient_wrt_layer,
    loss_and_param_grads,
)
from .io import ModelFormatError, load_model, save_model
from .layers import KINDS, LayerSpec, stable_softmax
from .train import evaluate, train

__all__ = [
    "ARCHITECTURES",
    "ForwardTrace",
    "KINDS",
    "LayerSpec",
    "ModelFormatError",
    "ModelGraph",
    "build_model",
    "evaluate",
    "forward",
    "gradient_wrt_input",
    "gradient_wrt_layer",
    "load_model",
    "loss_and_param_grads",
    "make_model",
    "minivgg",
    "miniresnet",
    "parameter_count",
    "save_model",
    "train",
]
