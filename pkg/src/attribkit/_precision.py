"""Runtime precision selection.

Compute dtype is chosen per call chain: an explicit argument wins, then the
ATTRIB_PRECISION environment variable ("f32" or "f64"), then float32.
Model weights are always held and serialized as float32; verification-grade
computations upcast to float64 at the arithmetic level.
"""

import os

import numpy as np

_NAMES = {"f32": np.float32, "f64": np.float64}


def resolve_dtype(precision=None):
    """Map a precision spec to a numpy dtype.

    ``precision`` may be None (consult ATTRIB_PRECISION, default f32),
    one of the strings "f32"/"f64", or a numpy float dtype.
    """
    if precision is None:
        precision = os.environ.get("ATTRIB_PRECISION", "f32")
    if isinstance(precision, str):
        try:
            return np.dtype(_NAMES[precision])
        except KeyError:
            raise ValueError(
                f"unknown precision {precision!r}; expected one of {sorted(_NAMES)}"
            ) from None
    dt = np.dtype(precision)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported compute dtype {dt}; use f32 or f64")
    return dt
