"""Orientation-searching segmentation: template matching and adaptive
plane morphology.

Both methods score plate-like structure against a set of candidate normals
sampled on the unit hemisphere.  Internally they operate on the inverted
image, where cracks are bright.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, signal

from .errors import ParameterError
from .features import eigenvalues3, hessian
from .volume import invert

__all__ = [
    "DirectionSet",
    "TemplateParams",
    "AdaptiveMorphParams",
    "sphere_directions",
    "template_match",
    "template_correlation",
    "adaptive_morph",
]


@dataclass
class DirectionSet:
    n: int
    dirs: np.ndarray  # (k, 3) unit vectors, upper hemisphere


@dataclass
class TemplateParams:
    half_width: int = 3        # N: template is (2N+1) x (2N+1) in-plane
    background: int = 3        # b: background layer thickness
    crack: int = 3             # c: crack layer thickness
    n: int = 15                # sphere discretization
    t4: float = 0.65

    def __post_init__(self):
        if self.half_width < 1 or self.background < 1 or self.crack < 1:
            raise ParameterError("template dimensions must be positive")
        if not 0.0 <= self.t4 <= 1.0:
            raise ParameterError(f"t4 must be in [0, 1], got {self.t4}")


@dataclass
class AdaptiveMorphParams:
    sigma: float = 1.0         # Hessian scale for the normal estimate, 0 allowed
    half_length: int = 3       # N: plate is (2N+1) x (2N+1) x 1
    n: int = 20
    delta_max: float = 0.5     # half opening angle of the search cone (radians)
    k: float = 4.5             # threshold multiplier in t5 = mu + k*sigma

    def __post_init__(self):
        if not 0.0 < self.delta_max < np.pi / 2:
            raise ParameterError(f"delta_max must be in (0, pi/2), got {self.delta_max}")
        if self.half_length < 1:
            raise ParameterError("half_length must be >= 1")


def sphere_directions(n):
    """Regular hemisphere sampling by latitude bands.

    Rings of constant polar angle between pole and equator carry point
    counts proportional to their circumference; the total is close to
    n*(n/4+1).  Deterministic in n.
    """
    if n < 4:
        raise ParameterError(f"sphere discretization needs n >= 4, got {n}")
    rings = max(1, round(n / 4))
    dirs = [(0.0, 0.0, 1.0)]
    for ring in range(1, rings + 1):
        polar = ring * (np.pi / 2) / rings
        count = max(1, round((np.pi * n / 2) * np.sin(polar)))
        for j in range(count):
            azimuth = 2.0 * np.pi * j / count
            dirs.append(
                (
                    np.sin(polar) * np.cos(azimuth),
                    np.sin(polar) * np.sin(azimuth),
                    np.cos(polar),
                )
            )
    arr = np.array(dirs, dtype=np.float64)
    arr /= np.linalg.norm(arr, axis=1, keepdims=True)
    return DirectionSet(n=n, dirs=arr)


def _orthonormal_frame(normal):
    """Two unit vectors spanning the plane orthogonal to ``normal``."""
    ref = np.array([0.0, 0.0, 1.0])
    if abs(normal @ ref) > 0.9:
        ref = np.array([1.0, 0.0, 0.0])
    u = np.cross(normal, ref)
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    return u, v


def _rotated_template(params, normal):
    """Nearest-neighbor rotated template as (offsets (k,3) zyx, values (k,))."""
    half_n = params.half_width
    b, c = params.background, params.crack
    u, v = _orthonormal_frame(normal)
    cells = {}
    # template frame: (i, j) in-plane, w along the normal
    ws = np.arange(2 * b + c) - (b + (c - 1) / 2.0)
    for i in range(-half_n, half_n + 1):
        for j in range(-half_n, half_n + 1):
            for widx, w in enumerate(ws):
                value = 1.0 if abs(w) <= (c - 1) / 2.0 + 1e-9 else 0.0
                pos = i * u + j * v + w * normal    # (x, y, z)
                key = tuple(int(round(p)) for p in pos[::-1])  # (z, y, x)
                cells.setdefault(key, []).append(value)
    offsets = np.array(list(cells.keys()), dtype=np.int64)
    values = np.array([float(np.mean(vals)) for vals in cells.values()])
    return offsets, values


def _footprint_kernels(offsets, values):
    """Dense (kernel, indicator) arrays for correlation, centered."""
    lo = offsets.min(axis=0)
    hi = offsets.max(axis=0)
    span = hi - lo + 1
    # symmetric support so 'same' correlation stays centered
    radius = np.maximum(np.abs(lo), np.abs(hi))
    shape = 2 * radius + 1
    kernel = np.zeros(shape)
    indicator = np.zeros(shape)
    idx = offsets + radius
    kernel[idx[:, 0], idx[:, 1], idx[:, 2]] = values
    indicator[idx[:, 0], idx[:, 1], idx[:, 2]] = 1.0
    return kernel, indicator


def _mirror_correlate(vol, kernel):
    """FFT cross-correlation with mirror padding at the faces."""
    pad = [(s // 2, s // 2) for s in kernel.shape]
    padded = np.pad(vol, pad, mode="reflect")
    # correlation = convolution with the flipped kernel
    out = signal.fftconvolve(padded, kernel[::-1, ::-1, ::-1], mode="valid")
    return out


def template_correlation(vol, params):
    """Per-voxel maximum of the normalized cross-correlation over rotations.

    The correlation for one rotation is mean-centered and normalized over
    the voxels covered by the rotated template; windows with zero grayvalue
    variance score 0.
    """
    work = invert(np.asarray(vol, dtype=np.float32)).astype(np.float64)
    work2 = work**2
    dirs = sphere_directions(params.n).dirs
    best = np.full(work.shape, -np.inf)
    for normal in dirs:
        offsets, values = _rotated_template(params, normal)
        t_mean = values.mean()
        t_std = values.std()
        if t_std == 0:
            continue
        centered = values - t_mean
        kernel, indicator = _footprint_kernels(offsets, centered)
        count = len(values)
        num = _mirror_correlate(work, kernel)
        s1 = _mirror_correlate(work, indicator)
        s2 = _mirror_correlate(work2, indicator)
        var = s2 / count - (s1 / count) ** 2
        var = np.maximum(var, 0.0)
        i_std = np.sqrt(var)
        good = i_std > 1e-9
        corr = np.zeros_like(num)
        corr[good] = num[good] / (count * i_std[good] * t_std)
        np.maximum(best, corr, out=best)
    best[~np.isfinite(best)] = 0.0
    return best.astype(np.float32)


def template_match(vol, params):
    """Threshold the rotation-maximal template correlation at t4."""
    return template_correlation(vol, params) >= params.t4


# ---------------------------------------------------------------------------
# Adaptive plane morphology
# ---------------------------------------------------------------------------

def _plate_footprint(normal, half_length):
    """Boolean footprint of the (2N+1)^2 x 1 plate orthogonal to ``normal``."""
    u, v = _orthonormal_frame(normal)
    cells = set()
    for i in range(-half_length, half_length + 1):
        for j in range(-half_length, half_length + 1):
            pos = i * u + j * v
            cells.add(tuple(int(round(p)) for p in pos[::-1]))
    return _cells_to_footprint(cells)


def _line_footprint(normal, half_length):
    cells = set()
    for t in range(-half_length, half_length + 1):
        pos = t * normal
        cells.add(tuple(int(round(p)) for p in pos[::-1]))
    return _cells_to_footprint(cells)


def _cells_to_footprint(cells):
    offsets = np.array(sorted(cells), dtype=np.int64)
    radius = np.abs(offsets).max(axis=0)
    footprint = np.zeros(2 * radius + 1, dtype=bool)
    idx = offsets + radius
    footprint[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    return footprint


def adaptive_morph_difference(vol, params):
    """Difference of the best plate median and the normal-line median.

    Works on the inverted image (cracks bright).  For each voxel, plate
    medians are taken only over directions within the search cone of the
    local Hessian normal; voxels with a vanishing Hessian fall back to the
    full direction set.
    """
    work = invert(np.asarray(vol, dtype=np.float32))
    dirs = sphere_directions(params.n).dirs
    eig = eigenvalues3(hessian(vol, params.sigma), want_direction=True)
    normal = eig.direction                                 # (..., 3) as (x, y, z)
    cos_max = np.cos(params.delta_max)

    best = np.full(work.shape, -np.inf, dtype=np.float32)
    best_dir = np.zeros(work.shape, dtype=np.int16)
    # a vanishing Hessian gives no usable normal: search every direction there
    flat_region = eig.lam3 == 0.0
    for d_idx, direction in enumerate(dirs):
        dot = np.abs(
            normal[..., 0] * direction[0]
            + normal[..., 1] * direction[1]
            + normal[..., 2] * direction[2]
        )
        allowed = (dot >= cos_max) | flat_region
        if not allowed.any():
            continue
        med = ndimage.median_filter(
            work, footprint=_plate_footprint(direction, params.half_length),
            mode="mirror",
        )
        take = allowed & (med > best)
        best[take] = med[take]
        best_dir[take] = d_idx

    best[~np.isfinite(best)] = 0.0
    line_med = np.zeros_like(work)
    for d_idx, direction in enumerate(dirs):
        sel = best_dir == d_idx
        if not sel.any():
            continue
        med = ndimage.median_filter(
            work, footprint=_line_footprint(direction, params.half_length),
            mode="mirror",
        )
        line_med[sel] = med[sel]
    return best - line_med


def adaptive_morph(vol, params):
    """Segment via adaptive plane morphology; threshold t5 = mu + k*sigma.

    mu and sigma are the global mean and standard deviation of the
    plate-minus-line difference volume; a zero-variance difference yields an
    empty mask.
    """
    diff = adaptive_morph_difference(vol, params)
    mu = float(diff.mean())
    std = float(diff.std())
    if std == 0:
        return np.zeros(diff.shape, dtype=bool)
    return diff >= mu + params.k * std
