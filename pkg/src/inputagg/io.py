"""On-disk formats: JSON-lines video datasets, JSON model files, JSON metrics.

Floats are written with Python's shortest round-trip repr (17 significant
digits at most), so save -> load reproduces every parameter bit for bit.
"""

import json

import numpy as np

from .aggregation import AggregationParams
from .frames import FrameEmbedder
from .mapping import MlpParams
from .synth import Video
from .train import FORMAT_VERSION, ModelBundle


class FormatError(ValueError):
    pass


def write_dataset(path, videos):
    with open(path, "w") as fh:
        for v in videos:
            fh.write(json.dumps({"label": v.label, "frames": v.frames.tolist()}) + "\n")


def read_dataset(path):
    videos, dim = [], None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                label = str(rec["label"])
                frames = np.array(rec["frames"], dtype=np.float64)
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: bad record ({exc})") from None
            if frames.ndim != 2 or frames.shape[0] == 0:
                raise FormatError(f"{path}:{lineno}: frames must be a non-empty list of equal-length vectors")
            if dim is not None and frames.shape[1] != dim:
                raise FormatError(f"{path}:{lineno}: frame dim {frames.shape[1]} differs from {dim}")
            dim = frames.shape[1]
            videos.append(Video(label, frames))
    return videos


def _tensor(a):
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": a.reshape(-1).tolist()}


def _array(entry, name):
    try:
        return np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"tensor {name!r}: {exc}") from None


def model_to_dict(model):
    emb = model.embedder
    return {
        "format_version": FORMAT_VERSION,
        "pooling": model.pooling,
        "labels": list(model.labels),
        "embedder": {
            "kind": emb.kind,
            "in_dim": emb.in_dim,
            "activations": emb.params.activations if emb.trainable else [],
        },
        "aggregation": {"t": model.aggregation.t} if model.aggregation is not None else None,
        "encoder": {"activations": model.encoder.activations},
        "tensors": {k: _tensor(v) for k, v in model.named().items()},
    }


def _mlp(tensors, prefix, activations):
    weights = [tensors[f"{prefix}W{i}"] for i in range(len(activations))]
    biases = [tensors[f"{prefix}b{i}"] for i in range(len(activations))]
    return MlpParams(weights, biases, activations)


def model_from_dict(doc):
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported model format version {version!r}")
    tensors = {k: _array(v, k) for k, v in doc["tensors"].items()}
    e = doc["embedder"]
    emb_params = _mlp(tensors, "emb.", e["activations"]) if e["kind"] != "passthrough" else None
    embedder = FrameEmbedder(e["kind"], emb_params, e["in_dim"])
    aggp = None
    if doc["aggregation"] is not None:
        aggp = AggregationParams(tensors["agg.W"], tensors["agg.b"], doc["aggregation"]["t"])
    encoder = _mlp(tensors, "enc.", doc["encoder"]["activations"])
    return ModelBundle(embedder, aggp, encoder, tensors["cls.W"], tensors["cls.b"],
                       list(doc["labels"]), doc["pooling"])


def save_model(path, model):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except ValueError as exc:
            raise FormatError(f"{path}: not a model file ({exc})") from None
    return model_from_dict(doc)


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
