"""Dense 3d volumes and the shared primitives built on them.

Grayvalue volumes are ``float32`` arrays, binary masks are ``bool`` arrays.
Arrays are indexed ``[z, y, x]`` so that a C-order dump is x-fastest, which
is also the on-disk layout (raw little-endian blob plus a JSON sidecar
header ``<path>.json``).
"""

import json
import math
import os

import numpy as np
from scipy import ndimage

from .errors import CorruptFileError, FormatError, ParameterError, ShapeError

__all__ = [
    "gaussian_blur",
    "gaussian_kernel1d",
    "dilate",
    "invert",
    "write_volume",
    "read_volume",
]


def gaussian_kernel1d(sigma, order=0):
    """Sampled Gaussian (derivative) kernel truncated at radius ceil(4*sigma).

    order 0 is normalized to unit mass; order 1 and 2 are derivatives of the
    sampled order-0 kernel, sign convention such that correlation with the
    kernel approximates the derivative of the image.
    """
    radius = int(math.ceil(4.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    g /= g.sum()
    if order == 0:
        return g
    if order == 1:
        # correlation does not flip the kernel, so the sign is +x;
        # rescaled for an exact response on linear ramps
        k = g * (x / sigma**2)
        return k / np.sum(k * x)
    if order == 2:
        # zero-mean and moment-normalized: exact on constants and quadratics
        k = g * ((x**2 - sigma**2) / sigma**4)
        k -= k.sum() / k.size
        return k / (np.sum(k * x**2) / 2.0)
    raise ParameterError(f"unsupported derivative order {order}")


def _check_sigma(sigma):
    if not np.isfinite(sigma):
        raise ParameterError(f"sigma must be finite, got {sigma!r}")
    if sigma != 0 and sigma < 0.5:
        raise ParameterError(f"sigma must be 0 or >= 0.5, got {sigma}")


def gaussian_blur(vol, sigma):
    """Separable Gaussian smoothing with mirror borders.

    sigma = 0 returns an identical copy.  Kernel truncation radius is
    ceil(4*sigma), border handling mirrors the image at the faces.
    """
    _check_sigma(sigma)
    vol = np.asarray(vol, dtype=np.float32)
    if sigma == 0:
        return vol.copy()
    kernel = gaussian_kernel1d(sigma)
    out = vol.astype(np.float64)
    for axis in range(3):
        out = ndimage.correlate1d(out, kernel, axis=axis, mode="mirror")
    return out.astype(np.float32)


def dilate(mask, width):
    """Morphological dilation with a cubic structuring element of side width.

    width must be odd; width 1 returns a copy.
    """
    if width < 1 or width % 2 == 0:
        raise ParameterError(f"dilation width must be odd and positive, got {width}")
    mask = np.asarray(mask, dtype=bool)
    if width == 1:
        return mask.copy()
    out = ndimage.maximum_filter(mask.view(np.uint8), size=width, mode="constant", cval=0)
    return out.astype(bool)


def invert(vol):
    """Grayvalue inversion: max(vol) - vol."""
    vol = np.asarray(vol, dtype=np.float32)
    return vol.max() - vol


def _header_path(path):
    return os.fspath(path) + ".json"


def write_volume(path, arr):
    """Write a volume or mask as raw blob + JSON sidecar header.

    float arrays are stored as little-endian f32 ("gray"), bool arrays as
    u8 0/1 ("mask").  Round-trip through :func:`read_volume` is bit-exact.
    """
    arr = np.asarray(arr)
    if arr.ndim != 3:
        raise ShapeError(f"expected a 3d array, got shape {arr.shape}")
    if arr.dtype == bool:
        blob = arr.astype("<u1")
        dtype, kind = "u8", "mask"
    else:
        blob = arr.astype("<f4")
        dtype, kind = "f32", "gray"
    nz, ny, nx = arr.shape
    header = {"dims": [nx, ny, nz], "dtype": dtype, "order": "x-fastest", "kind": kind}
    with open(_header_path(path), "w") as fh:
        json.dump(header, fh)
    blob.tofile(path)


def read_volume(path):
    """Read a volume written by :func:`write_volume`; returns float32 or bool."""
    try:
        with open(_header_path(path)) as fh:
            header = json.load(fh)
    except FileNotFoundError as exc:
        raise FormatError(f"missing volume header {_header_path(path)}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"unreadable volume header {_header_path(path)}") from exc
    try:
        nx, ny, nz = header["dims"]
        dtype = header["dtype"]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad volume header {_header_path(path)}: {exc}") from exc
    if dtype == "f32":
        np_dtype = np.dtype("<f4")
    elif dtype == "u8":
        np_dtype = np.dtype("<u1")
    else:
        raise FormatError(f"unknown dtype {dtype!r} in {_header_path(path)}")
    raw = np.fromfile(path, dtype=np_dtype)
    if raw.size != nx * ny * nz:
        raise CorruptFileError(
            f"{path}: blob has {raw.size} samples, header says {nx * ny * nz}"
        )
    arr = raw.reshape(nz, ny, nx)
    if dtype == "u8":
        return arr.astype(bool)
    return arr.astype(np.float32)
