"""Raw-volume file access: little-endian blob plus JSON sidecar header.

A volume ``foo.raw`` is described by ``foo.raw.json`` with keys
``dims`` ([nx, ny, nz]), ``dtype`` ("f32" gray / "u8" mask), ``order``
("x-fastest"), and ``kind`` ("gray" / "mask").  Arrays are indexed
[z, y, x]; the round trip is bit-exact.  This format is the only contract
with the volume generator and the classical segmentation tools.
"""

import json
import os

import numpy as np


class VolumeFormatError(Exception):
    """Missing, unreadable, or inconsistent volume header/blob."""


def _header_path(path):
    return os.fspath(path) + ".json"


def write_volume(path, arr):
    arr = np.asarray(arr)
    if arr.ndim != 3:
        raise VolumeFormatError(f"expected a 3d array, got shape {arr.shape}")
    if arr.dtype == bool:
        blob = arr.astype("<u1")
        dtype, kind = "u8", "mask"
    else:
        blob = arr.astype("<f4")
        dtype, kind = "f32", "gray"
    nz, ny, nx = arr.shape
    header = {"dims": [nx, ny, nz], "dtype": dtype,
              "order": "x-fastest", "kind": kind}
    with open(_header_path(path), "w") as fh:
        json.dump(header, fh)
    blob.tofile(path)


def read_volume(path):
    """Read a raw volume; returns float32 (gray) or bool (mask)."""
    try:
        with open(_header_path(path)) as fh:
            header = json.load(fh)
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        raise VolumeFormatError(f"bad volume header for {path}: {exc}") from exc
    try:
        nx, ny, nz = header["dims"]
        dtype = header["dtype"]
    except (KeyError, ValueError) as exc:
        raise VolumeFormatError(f"malformed header for {path}") from exc
    if header.get("order") != "x-fastest":
        raise VolumeFormatError(f"unsupported order {header.get('order')!r}")
    if dtype == "f32":
        np_dtype = np.dtype("<f4")
    elif dtype == "u8":
        np_dtype = np.dtype("<u1")
    else:
        raise VolumeFormatError(f"unsupported dtype {dtype!r}")
    blob = np.fromfile(path, dtype=np_dtype)
    if blob.size != nx * ny * nz:
        raise VolumeFormatError(
            f"{path}: blob has {blob.size} voxels, header says {nx * ny * nz}"
        )
    arr = blob.reshape(nz, ny, nx)
    if dtype == "u8":
        return arr.astype(bool)
    return arr.astype(np.float32)


def load_manifest(path):
    """Load a dataset manifest, rebasing relative volume paths onto it."""
    with open(path) as fh:
        manifest = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    for entry in manifest.get("entries", []):
        for key in ("gray_path", "truth_path"):
            if key in entry and not os.path.isabs(entry[key]):
                candidate = os.path.join(base, os.path.basename(entry[key]))
                if os.path.exists(candidate):
                    entry[key] = candidate
    return manifest
