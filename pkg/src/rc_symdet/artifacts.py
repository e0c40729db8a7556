"""Save and load trained reservoir detectors.

An artifact is a single ``.npz`` archive.  Its ``header`` entry is a JSON
document naming the model kind, the format version and, per layer, the
reservoir spec, seed, input gain and chosen delay.  The remaining entries
hold the weight arrays (``layer<i>_w_s``, ``layer<i>_w_in``,
``layer<i>_w_tout`` and, for time-frequency layers, ``layer<i>_w_fout``).
No pickled objects are stored, so loading never executes code.
"""

import json

import numpy as np

from .detectors import RcLayer, RcnetModel, TfReadout, TimeReadout
from .errors import ConfigError, NotTrainedError
from .reservoir import ReservoirSpec, ReservoirWeights

__all__ = ["FORMAT_VERSION", "save_model", "load_model"]

FORMAT_VERSION = 1

_KINDS = {"time-rc", "tf-rc", "deep-time", "deep-tf"}


def _layers_of(model):
    if isinstance(model, RcnetModel):
        return model.kind, model.layers
    if isinstance(model, RcLayer):
        if isinstance(model.readout, TfReadout):
            return "tf-rc", [model]
        return "time-rc", [model]
    raise ConfigError(f"cannot serialize {type(model).__name__}")


def save_model(path, model, metadata=None):
    """Write ``model`` (an ``RcLayer`` or ``RcnetModel``) to ``path``.

    ``metadata`` is any JSON-serializable dict stored alongside, e.g. the
    subframe configuration the model was trained for.
    """
    kind, layers = _layers_of(model)
    arrays = {}
    layer_headers = []
    for i, layer in enumerate(layers):
        if layer.readout is None:
            raise NotTrainedError(f"layer {i} has no trained readout")
        w = layer.weights
        arrays[f"layer{i}_w_s"] = w.w_s
        arrays[f"layer{i}_w_in"] = w.w_in
        arrays[f"layer{i}_w_tout"] = layer.readout.w_tout
        if isinstance(layer.readout, TfReadout):
            arrays[f"layer{i}_w_fout"] = layer.readout.w_fout
        layer_headers.append({
            "spec": w.spec.to_dict(),
            "n_streams": int(w.n_streams),
            "seed": None if w.seed is None else int(w.seed),
            "input_gain": float(layer.input_gain),
            "p_star": int(layer.readout.p_star),
        })
    header = {
        "format": "rc-symdet-model",
        "version": FORMAT_VERSION,
        "kind": kind,
        "layers": layer_headers,
        "metadata": metadata or {},
    }
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_model(path):
    """Inverse of :func:`save_model`; returns the model and its metadata."""
    with np.load(path, allow_pickle=False) as data:
        if "header" not in data.files:
            raise ConfigError(f"{path} is not a model artifact")
        header = json.loads(str(data["header"]))
        if header.get("format") != "rc-symdet-model":
            raise ConfigError(f"{path} is not a model artifact")
        if header.get("version") != FORMAT_VERSION:
            raise ConfigError(f"unsupported artifact version {header.get('version')}")
        kind = header["kind"]
        if kind not in _KINDS:
            raise ConfigError(f"unknown model kind {kind!r}")
        layers = []
        for i, lh in enumerate(header["layers"]):
            spec = ReservoirSpec(**lh["spec"])
            weights = ReservoirWeights(data[f"layer{i}_w_s"], data[f"layer{i}_w_in"], spec,
                                       lh["n_streams"], lh["seed"])
            if f"layer{i}_w_fout" in data:
                readout = TfReadout(data[f"layer{i}_w_tout"], data[f"layer{i}_w_fout"], lh["p_star"])
            else:
                readout = TimeReadout(data[f"layer{i}_w_tout"], lh["p_star"])
            layers.append(RcLayer(weights, readout, lh["input_gain"]))
    if kind in ("time-rc", "tf-rc"):
        return layers[0], header["metadata"]
    return RcnetModel(kind, layers), header["metadata"]
