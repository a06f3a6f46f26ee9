"""Deterministic binary persistence for trained model bundles.

Layout: 8-byte magic, u32 format version, u64 header length, JSON header
(sorted keys; numpy arrays appear as {"__nd__": index} placeholders), then
the arrays in placeholder order as (dtype, shape, raw little-endian bytes).
Identical training runs produce byte-identical files, and a round trip
preserves every prediction bit-exactly.
"""

import dataclasses
import json
import struct

import numpy as np

from .config import PipelineConfig
from .detectors import ForestModel, SharpenerModel
from .duration_prior import DurationPrior
from .gmm import DiagonalGMM
from .hmm import HmmModel
from .pipeline import ModelBundle

MAGIC = b"ODOCBNDL"
FORMAT_VERSION = 1

_TYPE_KEY = "__type__"


def _to_state(obj):
    if isinstance(obj, ModelBundle):
        state = {f.name: _to_state(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        state[_TYPE_KEY] = "ModelBundle"
        return state
    if isinstance(obj, (PipelineConfig, ForestModel, SharpenerModel, DurationPrior,
                        DiagonalGMM, HmmModel)):
        state = {f.name: _to_state(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        state[_TYPE_KEY] = type(obj).__name__
        return state
    if isinstance(obj, dict):
        return {k: _to_state(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_state(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


_CLASSES = {
    "PipelineConfig": PipelineConfig,
    "ForestModel": ForestModel,
    "SharpenerModel": SharpenerModel,
    "DurationPrior": DurationPrior,
    "DiagonalGMM": DiagonalGMM,
    "HmmModel": HmmModel,
    "ModelBundle": ModelBundle,
}

_TUPLE_FIELDS = {
    ("DurationPrior", "components"),
}


def _from_state(obj):
    if isinstance(obj, dict):
        type_name = obj.pop(_TYPE_KEY, None)
        decoded = {k: _from_state(v) for k, v in obj.items()}
        if type_name is None:
            return decoded
        cls = _CLASSES[type_name]
        for key, value in decoded.items():
            if (type_name, key) in _TUPLE_FIELDS and isinstance(value, list):
                decoded[key] = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        instance = cls.__new__(cls)
        for key, value in decoded.items():
            setattr(instance, key, value)
        return instance
    if isinstance(obj, list):
        return [_from_state(v) for v in obj]
    return obj


def _extract_arrays(node, arrays):
    if isinstance(node, np.ndarray):
        arrays.append(node)
        return {"__nd__": len(arrays) - 1}
    if isinstance(node, dict):
        # Sorted traversal keeps array numbering canonical, so a load/save
        # round trip reproduces the file byte-for-byte.
        return {k: _extract_arrays(node[k], arrays) for k in sorted(node)}
    if isinstance(node, list):
        return [_extract_arrays(v, arrays) for v in node]
    return node


def _restore_arrays(node, arrays):
    if isinstance(node, dict):
        if set(node.keys()) == {"__nd__"}:
            return arrays[node["__nd__"]]
        return {k: _restore_arrays(v, arrays) for k, v in node.items()}
    if isinstance(node, list):
        return [_restore_arrays(v, arrays) for v in node]
    return node


def save_bundle(bundle, path):
    state = _extract_arrays(_to_state(bundle), arrays := [])
    header = json.dumps(state, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(struct.pack("<I", len(arrays)))
        for arr in arrays:
            arr = np.ascontiguousarray(arr)
            if arr.dtype.byteorder == ">":
                arr = arr.astype(arr.dtype.newbyteorder("<"))
            dtype_str = arr.dtype.str.encode()
            fh.write(struct.pack("<I", len(dtype_str)))
            fh.write(dtype_str)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b"")
            raw = arr.tobytes()
            fh.write(struct.pack("<Q", len(raw)))
            fh.write(raw)


def load_bundle(path):
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a model bundle (bad magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported bundle format version {version}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        state = json.loads(fh.read(header_len))
        (n_arrays,) = struct.unpack("<I", fh.read(4))
        arrays = []
        for _ in range(n_arrays):
            (dlen,) = struct.unpack("<I", fh.read(4))
            dtype = np.dtype(fh.read(dlen).decode())
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim)) if ndim else ()
            (nbytes,) = struct.unpack("<Q", fh.read(8))
            arrays.append(np.frombuffer(fh.read(nbytes), dtype=dtype).reshape(shape).copy())
    return _from_state(_restore_arrays(state, arrays))
