"""Binary checkpoint format.

Layout: magic ``IMAXNET\\0`` | uint32 version | uint32 header length |
UTF-8 JSON header | raw little-endian float64 payload. The header lists
each named array with its shape and offset (in float64 units) and carries
free-form ``meta``. A JSON sidecar (``<path>.json``) repeats the header for
humans and tooling.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .net import ParamNet

MAGIC = b"IMAXNET\0"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> Path:
    path = Path(path)
    entries, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        chunks.append(a.tobytes())
        offset += a.size
    header = {"version": VERSION, "arrays": entries, "meta": meta or {}}
    blob = json.dumps(header, sort_keys=True).encode()
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for c in chunks:
            fh.write(c)
    tmp.replace(path)
    Path(str(path) + ".json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return path


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version, hlen = struct.unpack("<II", raw[8:16])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    header = json.loads(raw[16 : 16 + hlen].decode())
    payload = np.frombuffer(raw[16 + hlen :], dtype="<f8")
    out = {}
    for e in header["arrays"]:
        n = int(np.prod(e["shape"])) if e["shape"] else 1
        out[e["name"]] = payload[e["offset"] : e["offset"] + n].reshape(e["shape"]).astype(np.float64)
    return out, header["meta"]


def net_arrays(net: ParamNet, prefix: str) -> dict[str, np.ndarray]:
    return {f"{prefix}/{n}": p for n, p in zip(net.param_names(), net.params())}


def net_spec(net: ParamNet) -> dict:
    return {"sizes": list(net.sizes), "activation": net.activation, "layer_norm": net.layer_norm}


def net_from_arrays(spec: dict, arrays: dict[str, np.ndarray], prefix: str) -> ParamNet:
    net = ParamNet(list(spec["sizes"]), spec["activation"], spec["layer_norm"])
    for n, p in zip(net.param_names(), net.params()):
        key = f"{prefix}/{n}"
        if key not in arrays:
            raise CheckpointError(f"missing array {key}")
        p[...] = arrays[key]
    return net


def save_nets(path, nets: dict[str, ParamNet], meta: dict | None = None) -> Path:
    """Store several nets under role tags (e.g. ``policy``, ``psi_Q``)."""
    arrays = {}
    for role, net in nets.items():
        arrays.update(net_arrays(net, role))
    meta = dict(meta or {})
    meta["nets"] = {role: net_spec(net) for role, net in nets.items()}
    return save_arrays(path, arrays, meta)


def load_nets(path) -> tuple[dict[str, ParamNet], dict]:
    arrays, meta = load_arrays(path)
    nets = {role: net_from_arrays(spec, arrays, role) for role, spec in meta.get("nets", {}).items()}
    return nets, meta
