"""Versioned flat checkpoint format ("PCSTCKPT/1").

Layout: magic line, little-endian u32 header length, JSON header (model config,
metadata, and a tensor index with dtype/shape), then the raw tensor bytes in
index order. Writing is byte-deterministic for identical state.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

MAGIC = b"PCSTCKPT/1\n"

_DTYPES = {"float32": np.float32, "float64": np.float64, "int64": np.int64}


def save_checkpoint(path, state_dict: dict, model_config: dict, meta: dict | None = None) -> None:
    """Serialize a name->tensor map plus config/metadata."""
    index = []
    blobs = []
    for name in sorted(state_dict):
        arr = state_dict[name]
        if torch.is_tensor(arr):
            arr = arr.detach().cpu().numpy()
        arr = np.ascontiguousarray(arr)
        if arr.dtype.name not in _DTYPES:
            raise ValueError(f"unsupported tensor dtype {arr.dtype} for {name}")
        index.append({"name": name, "dtype": arr.dtype.name, "shape": list(arr.shape)})
        blobs.append(arr.astype(arr.dtype.newbyteorder("<")).tobytes())
    header = json.dumps(
        {"version": 1, "model_config": model_config, "meta": meta or {}, "tensors": index},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path):
    """Returns (state_dict of torch tensors, model_config, meta)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with open(path, "rb") as f:
        raw = f.read()
    if not raw.startswith(MAGIC):
        raise ValueError(f"{path}: not a PCSTCKPT/1 checkpoint")
    pos = len(MAGIC)
    (header_len,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    header = json.loads(raw[pos: pos + header_len].decode("utf-8"))
    pos += header_len
    if header.get("version") != 1:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
    state = {}
    for entry in header["tensors"]:
        dtype = np.dtype(_DTYPES[entry["dtype"]]).newbyteorder("<")
        n = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
        nbytes = dtype.itemsize * n
        arr = np.frombuffer(raw[pos: pos + nbytes], dtype=dtype).reshape(entry["shape"])
        pos += nbytes
        state[entry["name"]] = torch.from_numpy(arr.astype(entry["dtype"]))
    return state, header["model_config"], header["meta"]
