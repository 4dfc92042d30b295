"""Model serialization.

Byte layout (all integers little-endian):

    offset  size  field
    0       4     magic  b"CNA1"
    4       4     uint32 format version (currently 1)
    8       8     uint64 length L of the JSON header
    16      L     UTF-8 JSON header
    16+L    ...   weight blobs, raw float32 little-endian, C order

The JSON header carries: format_version, input_shape, class_names, layers
(list of {id, kind, params}), and weights (list of {layer, name, shape}
describing each blob in file order). Blob order equals header order equals
layer declaration order. load(save(m)) reproduces weights bit-exactly.
"""

import json
import os

import numpy as np

from .graph import ModelGraph
from .layers import LayerSpec

MAGIC = b"CNA1"
FORMAT_VERSION = 1


def save_model(model, path):
    entries = []
    blobs = []
    for spec in model.layers:
        if spec.id not in model.weights:
            continue
        for name in sorted(model.weights[spec.id]):
            arr = np.ascontiguousarray(model.weights[spec.id][name], dtype="<f4")
            entries.append({"layer": spec.id, "name": name, "shape": list(arr.shape)})
            blobs.append(arr.tobytes())
    header = {
        "format_version": FORMAT_VERSION,
        "input_shape": list(model.input_shape),
        "class_names": list(model.class_names),
        "layers": [
            {"id": s.id, "kind": s.kind, "params": s.params} for s in model.layers
        ],
        "weights": entries,
    }
    payload = json.dumps(header).encode("utf-8")
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint32(FORMAT_VERSION).tobytes())
        fh.write(np.uint64(len(payload)).tobytes())
        fh.write(payload)
        for blob in blobs:
            fh.write(blob)
    os.replace(tmp, path)


class ModelFormatError(ValueError):
    pass


def _field(header, key):
    try:
        return header[key]
    except KeyError:
        raise ModelFormatError(f"model file missing field {key!r}") from None


def load_model(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ModelFormatError("bad magic: not an attribkit model file")
    if len(raw) < 16:
        raise ModelFormatError("truncated file: header length missing")
    version = int(np.frombuffer(raw[4:8], dtype="<u4")[0])
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {version}")
    hlen = int(np.frombuffer(raw[8:16], dtype="<u8")[0])
    if len(raw) < 16 + hlen:
        raise ModelFormatError("truncated file: JSON header incomplete")
    try:
        header = json.loads(raw[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt JSON header: {exc}") from None

    layers = []
    for entry in _field(header, "layers"):
        for key in ("id", "kind", "params"):
            if key not in entry:
                raise ModelFormatError(f"layer entry missing field {key!r}")
        layers.append(LayerSpec(entry["id"], entry["kind"], dict(entry["params"])))

    weights = {}
    offset = 16 + hlen
    for entry in _field(header, "weights"):
        for key in ("layer", "name", "shape"):
            if key not in entry:
                raise ModelFormatError(f"weight entry missing field {key!r}")
        shape = tuple(int(v) for v in entry["shape"])
        nbytes = int(np.prod(shape)) * 4
        if offset + nbytes > len(raw):
            raise ModelFormatError(
                f"truncated file: weight blob {entry['layer']}/{entry['name']} "
                f"needs {nbytes} bytes past offset {offset}"
            )
        arr = np.frombuffer(raw, dtype="<f4", count=int(np.prod(shape)), offset=offset)
        weights.setdefault(entry["layer"], {})[entry["name"]] = (
            arr.reshape(shape).astype(np.float32)
        )
        offset += nbytes
    if offset != len(raw):
        raise ModelFormatError(f"{len(raw) - offset} trailing bytes after weight blobs")

    return ModelGraph(
        layers=layers,
        weights=weights,
        input_shape=tuple(_field(header, "input_shape")),
        class_names=list(_field(header, "class_names")),
    )
