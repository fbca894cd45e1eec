"""Versioned binary checkpoints for the corrector.

Layout: one magic line, one JSON header line (sorted keys: model config,
vocab streams, tensor manifest with shapes, training state), then the raw
little-endian float32 payload of every manifest entry in order. Parameters
are listed by sorted name so the byte stream is reproducible regardless of
construction order, and a save/load/save round trip is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import torch

from ..errors import FormatError
from .model import ModelConfig, Seq2SeqTransformer
from .vocab import Vocab

MAGIC = "aeckit-seq2seq-ckpt 1"


@dataclass
class CheckpointBundle:
    model: Seq2SeqTransformer
    vocab: Vocab
    training: dict
    optimizer_moments: dict | None


def _named_params(model: Seq2SeqTransformer):
    return sorted(model.named_parameters(), key=lambda kv: kv[0])


def save_checkpoint(
    path: str,
    model: Seq2SeqTransformer,
    vocab: Vocab,
    training: dict | None = None,
    optimizer: torch.optim.Optimizer | None = None,
) -> None:
    params = _named_params(model)
    manifest = []
    payload: list[np.ndarray] = []
    for name, param in params:
        arr = param.detach().cpu().numpy().astype("<f4")
        manifest.append([name, list(arr.shape)])
        payload.append(arr)
    steps: dict[str, float] = {}
    if optimizer is not None:
        lookup = {id(p): optimizer.state.get(p, {}) for _, p in params}
        for name, param in params:
            state = lookup[id(param)]
            for slot, key in (("m1", "exp_avg"), ("m2", "exp_avg_sq")):
                tensor = state.get(key)
                if tensor is None:
                    arr = np.zeros(param.shape, dtype="<f4")
                else:
                    arr = tensor.detach().cpu().numpy().astype("<f4")
                manifest.append(["%s.%s" % (slot, name), list(arr.shape)])
                payload.append(arr)
            step = state.get("step", 0)
            steps[name] = float(step) if not torch.is_tensor(step) else float(step.item())
    header = {
        "config": asdict(model.config),
        "vocab": {
            "source": list(vocab.source),
            "target": list(vocab.target),
            "ipa": list(vocab.ipa),
        },
        "tensors": manifest,
        "training": dict(training or {}),
        "optimizer_steps": steps if optimizer is not None else None,
    }
    with open(path, "wb") as fh:
        fh.write((MAGIC + "\n").encode("ascii"))
        fh.write(
            (json.dumps(header, sort_keys=True, ensure_ascii=True) + "\n").encode(
                "ascii"
            )
        )
        for arr in payload:
            fh.write(np.ascontiguousarray(arr).tobytes())


def load_checkpoint(path: str) -> CheckpointBundle:
    with open(path, "rb") as fh:
        magic = fh.readline().decode("ascii", "replace").rstrip("\n")
        if magic != MAGIC:
            raise FormatError("not a corrector checkpoint: %r" % (magic,))
        try:
            header = json.loads(fh.readline().decode("ascii"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError("unreadable checkpoint header: %s" % exc) from exc
        blob = fh.read()
    config = ModelConfig(**header["config"])
    voc = header["vocab"]
    vocab = Vocab(
        source=tuple(voc["source"]),
        target=tuple(voc["target"]),
        ipa=tuple(voc["ipa"]),
    )
    tensors: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in header["tensors"]:
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 4
        if offset + nbytes > len(blob):
            raise FormatError("checkpoint payload truncated at %r" % (name,))
        tensors[name] = np.frombuffer(
            blob, dtype="<f4", count=count, offset=offset
        ).reshape(shape)
        offset += nbytes
    if offset != len(blob):
        raise FormatError("trailing bytes after checkpoint payload")
    model = Seq2SeqTransformer(
        config,
        n_source=len(vocab.source),
        n_target=len(vocab.target),
        n_ipa=len(vocab.ipa),
    )
    with torch.no_grad():
        for name, param in model.named_parameters():
            if name not in tensors:
                raise FormatError("checkpoint missing tensor %r" % (name,))
            arr = tensors[name]
            if tuple(arr.shape) != tuple(param.shape):
                raise FormatError("shape mismatch for %r" % (name,))
            param.copy_(torch.from_numpy(arr.copy()))
    model.train(False)
    moments = None
    if header.get("optimizer_steps") is not None:
        moments = {"steps": header["optimizer_steps"], "m1": {}, "m2": {}}
        for name, _ in model.named_parameters():
            moments["m1"][name] = torch.from_numpy(tensors["m1." + name].copy())
            moments["m2"][name] = torch.from_numpy(tensors["m2." + name].copy())
    return CheckpointBundle(
        model=model,
        vocab=vocab,
        training=header.get("training", {}),
        optimizer_moments=moments,
    )


def restore_optimizer(
    optimizer: torch.optim.Optimizer,
    model: Seq2SeqTransformer,
    moments: dict,
) -> None:
    """Load saved Adam moments into a freshly built optimizer."""
    template = optimizer.state_dict()
    state = {}
    for idx, (name, _) in enumerate(model.named_parameters()):
        state[idx] = {
            "step": torch.tensor(float(moments["steps"][name])),
            "exp_avg": moments["m1"][name].clone(),
            "exp_avg_sq": moments["m2"][name].clone(),
        }
    template["state"] = state
    optimizer.load_state_dict(template)
