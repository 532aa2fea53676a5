"""Checkpoint bundles.

A bundle is a single zip archive (stored, not compressed) holding
``metadata.json`` (format version, config echo, tensor manifest with
shapes, optional parent checksum) and ``tensors.bin`` with the raw
little-endian float32 tensor data concatenated in manifest order.  The
format is language-neutral and bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import zipfile
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .configs import ExperimentConfig, config_as_dict, config_from_dict

FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Missing, malformed, or incompatible checkpoint."""


@dataclass
class CheckpointBundle:
    config: ExperimentConfig
    tensors: dict[str, np.ndarray]  # name -> float32 array, insertion-ordered
    extra: dict  # free-form metadata (stage, step, parent_checksum, ...)

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name in self.tensors:
            h.update(name.encode())
            h.update(self.tensors[name].tobytes())
        return h.hexdigest()


def module_tensors(prefix: str, module: nn.Module) -> dict[str, np.ndarray]:
    out = {}
    for name, t in module.state_dict().items():
        out[f"{prefix}/{name}"] = t.detach().cpu().numpy().astype("<f4")
    return out


def load_module(bundle: CheckpointBundle, prefix: str, module: nn.Module) -> None:
    state = module.state_dict()
    want = {f"{prefix}/{n}" for n in state}
    have = {n for n in bundle.tensors if n.startswith(prefix + "/")}
    if want != have:
        raise CheckpointError(f"tensor set mismatch for {prefix!r}: "
                              f"missing {sorted(want - have)}, "
                              f"unexpected {sorted(have - want)}")
    new_state = {}
    for name, t in state.items():
        arr = bundle.tensors[f"{prefix}/{name}"]
        if tuple(arr.shape) != tuple(t.shape):
            raise CheckpointError(f"shape mismatch for {prefix}/{name}: "
                                  f"{arr.shape} vs {tuple(t.shape)}")
        new_state[name] = torch.from_numpy(arr.copy()).to(t.dtype)
    module.load_state_dict(new_state)


def save_bundle(path, bundle: CheckpointBundle) -> None:
    manifest = [{"name": n, "shape": list(a.shape), "dtype": "float32"}
                for n, a in bundle.tensors.items()]
    meta = {
        "version": FORMAT_VERSION,
        "config": config_as_dict(bundle.config),
        "manifest": manifest,
        "extra": bundle.extra,
    }
    blob = b"".join(a.astype("<f4", copy=False).tobytes() for a in bundle.tensors.values())
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr("metadata.json", json.dumps(meta, indent=2, sort_keys=True))
        zf.writestr("tensors.bin", blob)


def load_bundle(path) -> CheckpointBundle:
    try:
        with zipfile.ZipFile(path, "r") as zf:
            meta = json.loads(zf.read("metadata.json").decode("utf-8"))
            blob = zf.read("tensors.bin")
    except (FileNotFoundError, zipfile.BadZipFile, KeyError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if meta.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {meta.get('version')}")
    config = config_from_dict(meta["config"])
    tensors: dict[str, np.ndarray] = {}
    offset = 0
    for entry in meta["manifest"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        nbytes = 4 * count
        if offset + nbytes > len(blob):
            raise CheckpointError("tensor blob size does not match manifest")
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        tensors[entry["name"]] = arr.reshape(entry["shape"]).copy()
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError("tensor blob size does not match manifest")
    return CheckpointBundle(config=config, tensors=tensors, extra=meta.get("extra", {}))
