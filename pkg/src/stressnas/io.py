"""Raw-binary + JSON-manifest serialization.

Every on-disk artifact in this project (converted recordings, feature
tensors, parameter checkpoints) uses the same convention: one flat binary
file per array plus a manifest.json describing name, file, dtype, and
shape. Supported dtypes: f32le, f64le, u8, i32le.
"""

import json
import os

import numpy as np

from .errors import DataError

_DTYPES = {
    "f32le": np.dtype("<f4"),
    "f64le": np.dtype("<f8"),
    "u8": np.dtype("u1"),
    "i32le": np.dtype("<i4"),
}


def dtype_of(tag: str) -> np.dtype:
    if tag not in _DTYPES:
        raise DataError(f"unknown dtype tag {tag!r}")
    return _DTYPES[tag]


def write_array(path: str, arr: np.ndarray, tag: str) -> int:
    """Write arr as flat little-endian binary; returns element count."""
    data = np.ascontiguousarray(arr, dtype=dtype_of(tag))
    with open(path, "wb") as f:
        f.write(data.tobytes())
    return data.size


def read_array(path: str, tag: str, n: int | None = None) -> np.ndarray:
    dt = dtype_of(tag)
    try:
        raw = np.fromfile(path, dtype=dt)
    except OSError as e:
        raise DataError(f"unreadable file {path}: {e}") from e
    if n is not None and raw.size != n:
        raise DataError(
            f"{path}: expected {n} samples, file holds {raw.size}"
        )
    return raw


def write_manifest(path: str, manifest: dict) -> None:
    # sort_keys + fixed separators so reruns are byte-identical
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def read_manifest(path: str) -> dict:
    if not os.path.isfile(path):
        raise DataError(f"manifest not found: {path}")
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"bad manifest {path}: {e}") from e


def save_tensors(out_dir: str, tensors: dict, tag: str = "f64le") -> None:
    """Write a named-array bundle (checkpoints, feature sets)."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        fname = name.replace("/", "__") + ".bin"
        write_array(os.path.join(out_dir, fname), arr, tag)
        entries.append(
            {"name": name, "file": fname, "dtype": tag, "shape": list(arr.shape)}
        )
    write_manifest(os.path.join(out_dir, "manifest.json"), {"tensors": entries})


def load_tensors(in_dir: str) -> dict:
    manifest = read_manifest(os.path.join(in_dir, "manifest.json"))
    out = {}
    for ent in manifest.get("tensors", []):
        n = int(np.prod(ent["shape"])) if ent["shape"] else 1
        flat = read_array(os.path.join(in_dir, ent["file"]), ent["dtype"], n)
        out[ent["name"]] = flat.reshape(ent["shape"])
    return out
