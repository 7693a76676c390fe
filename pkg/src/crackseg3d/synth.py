"""Ground-truthed synthetic crack volumes.

A crack is the graph of a fractional Brownian surface, discretized into a
binary mask and dilated to the requested width.  The background is a
Boolean-model concrete phantom (matrix + aggregates + air pores); crack
grayvalues are drawn i.i.d. normal (defaults estimated from the phantom's
pore phase) and the transition zone is smoothed with a narrow Gaussian.
"""

import hashlib
import json
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft

from .errors import GenerationError, ParameterError, ShapeError
from .volume import dilate, gaussian_blur, write_volume

__all__ = [
    "FbsField",
    "CrackSpec",
    "PhantomSpec",
    "CompositeParams",
    "simulate_fbs",
    "rasterize_crack",
    "build_crack_mask",
    "synthesize_background",
    "composite",
    "generate_dataset",
    "generation_profile",
    "GENERATION_PROFILES",
]

# Named generation profiles: (phantom overrides, composite overrides).
# "high-contrast" keeps the aggregate texture visible but makes the crack
# the dominant grayvalue feature: no pores (which share the crack's gray
# range) and a small matrix/aggregate gap, so phase boundaries stay well
# below the crack's contrast.
GENERATION_PROFILES = {
    "default": ({}, {}),
    "high-contrast": (
        {
            "pore_fraction": 0.0,
            "matrix_gray": (140.0, 3.0),
            "aggregate_gray": (152.0, 4.0),
        },
        {"crack_gray_mean": 20.0, "crack_gray_std": 4.0},
    ),
}


def generation_profile(name):
    """Look up a named generation profile.

    Returns (phantom overrides, composite overrides) as dicts suitable for
    building ``PhantomSpec`` / ``CompositeParams``; explicit settings should
    take precedence over the profile's.
    """
    try:
        phantom, comp = GENERATION_PROFILES[name]
    except KeyError:
        raise ParameterError(
            f"unknown generation profile {name!r}; "
            f"known: {sorted(GENERATION_PROFILES)}"
        ) from None
    return dict(phantom), dict(comp)


@dataclass
class FbsField:
    """Realization of a fractional Brownian surface on a 2^n x 2^n grid."""

    n: int
    hurst: float
    heights: np.ndarray
    seed: int


@dataclass
class CrackSpec:
    n: int = 7
    hurst: float = 0.99
    width: int = 3
    plane: str = "z"            # normal axis of the (first) crack
    count: int = None           # surfaces; defaults to 1 (single) or 2
    arrangement: str = "single"  # single | parallel | orthogonal
    seed: int = 0

    def __post_init__(self):
        if self.width % 2 == 0 or self.width < 1:
            raise ParameterError(f"crack width must be odd, got {self.width}")
        if self.arrangement not in ("single", "parallel", "orthogonal"):
            raise ParameterError(f"unknown arrangement {self.arrangement!r}")
        if self.count is None:
            self.count = 1 if self.arrangement == "single" else 2
        if (self.arrangement == "single") != (self.count == 1):
            raise ParameterError("arrangement 'single' requires count 1 and vice versa")


@dataclass
class PhantomSpec:
    """Boolean-model concrete phantom: aggregates and pores over a matrix."""

    dims: tuple = (128, 128, 128)   # (nx, ny, nz)
    matrix_gray: tuple = (130.0, 12.0)
    aggregate_fraction: float = 0.25
    aggregate_radius: tuple = (6.0, 14.0)
    aggregate_gray: tuple = (170.0, 10.0)
    pore_fraction: float = 0.02
    pore_radius: tuple = (2.0, 5.0)
    pore_gray: tuple = (30.0, 10.0)
    blur_sigma: float = 0.8
    seed: int = 0

    def __post_init__(self):
        for frac in (self.aggregate_fraction, self.pore_fraction):
            if not 0.0 <= frac <= 1.0:
                raise ParameterError(f"volume fraction {frac} outside [0,1]")
        if self.aggregate_fraction + self.pore_fraction >= 1.0:
            raise ParameterError("phase fractions must sum to < 1")
        for lo, hi in (self.aggregate_radius, self.pore_radius):
            if lo <= 0 or hi < lo:
                raise ParameterError("radius ranges must be positive and ordered")


@dataclass
class CompositeParams:
    crack_gray_mean: float = 30.0
    crack_gray_std: float = 10.0
    transition_sigma: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.crack_gray_std < 0:
            raise ParameterError("crack_gray_std must be >= 0")


# ---------------------------------------------------------------------------
# Fractional Brownian surface
# ---------------------------------------------------------------------------

def _embedding_coefficients(alpha, big_r):
    """Coefficients of the intrinsically stationary covariance embedding."""
    if alpha <= 1.5:
        beta = 0.0
        c2 = alpha / 2.0
        c0 = 1.0 - alpha / 2.0
    else:
        beta = alpha * (2.0 - alpha) / (3.0 * big_r * (big_r**2 - 1.0))
        c2 = (alpha - beta * (big_r - 1.0) ** 2 * (big_r + 2.0)) / 2.0
        c0 = beta * (big_r - 1.0) ** 3 + 1.0 - c2
    return beta, c2, c0


@lru_cache(maxsize=8)
def _embedding_sqrt_eigenvalues(n, hurst):
    """Square roots of the circulant-embedding eigenvalues for a 2^n grid.

    The surface is built on a grid of 2*2^n points covering [0, 2]; only the
    [0, 1] quarter is kept, where the covariance embedding is exact.
    """
    alpha = 2.0 * hurst
    big_r = 2.0
    beta, c2, c0 = _embedding_coefficients(alpha, big_r)
    m = 2 * 2**n          # grid over [0, R]
    full = 2 * m          # circulant size (wrap-around distances)
    idx = np.arange(full)
    offs = np.minimum(idx, full - idx) * (big_r / m)
    r = np.sqrt(offs[:, None] ** 2 + offs[None, :] ** 2)
    cov = np.where(r <= 1.0, c0 - r**alpha + c2 * r**2, 0.0)
    mid = (r > 1.0) & (r <= big_r)
    cov[mid] = beta * (big_r - r[mid]) ** 3 / r[mid]
    lam = fft.fft2(cov).real / full**2
    lam[lam < 0] = 0.0
    return np.sqrt(lam), c2


def simulate_fbs(n, hurst, seed):
    """Simulate a fractional Brownian surface by circulant embedding.

    Stein's intrinsic embedding of the covariance gives a Gaussian field
    whose increments satisfy E|z(p)-z(q)|^2 = (h |p-q|)^(2H) exactly on the
    returned grid (h the grid spacing), so the log-log structure-function
    slope is 2H.  Deterministic given the seed.
    """
    if not 3 <= n <= 12:
        raise ParameterError(f"n must be in [3, 12], got {n}")
    if not 0.0 < hurst <= 1.0:
        raise ParameterError(f"hurst must be in (0, 1], got {hurst}")
    side = 2**n
    sqrt_lam, c2 = _embedding_sqrt_eigenvalues(n, hurst)
    full = sqrt_lam.shape[0]
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((full, full)) + 1j * rng.standard_normal((full, full))
    field = fft.fft2(sqrt_lam * noise).real[:side, :side]
    field -= field[0, 0]
    # restore the random linear drift removed by the c2 r^2 term
    coords = np.arange(side) * (2.0 / (2 * side))
    gx, gy = rng.standard_normal(2)
    field += np.sqrt(2.0 * c2) * (gy * coords[:, None] + gx * coords[None, :])
    return FbsField(n=n, hurst=hurst, heights=field.astype(np.float64), seed=seed)


def _round_half_away(values):
    return np.copysign(np.floor(np.abs(values) + 0.5), values)


def rasterize_crack(field, width, plane="z", center=None):
    """Discretize an fBS into a binary crack mask of side 2^n.

    Heights are affinely scaled to integers in [-2^(n-1)+1, 2^(n-1)-1]
    (rounded half away from zero), 0 maps to the slice at ``center``
    (default: mid-slice), and the surface graph is dilated to ``width``.
    ``plane`` names the normal axis so cracks can lie in orthogonal planes.
    """
    side = 2 ** field.n
    if center is None:
        center = side // 2
    z = field.heights
    lo, hi = -(side // 2) + 1, side // 2 - 1
    zmin, zmax = z.min(), z.max()
    if zmax > zmin:
        scaled = lo + (z - zmin) * (hi - lo) / (zmax - zmin)
    else:
        scaled = np.zeros_like(z)
    levels = _round_half_away(scaled).astype(np.int64) + center
    np.clip(levels, 0, side - 1, out=levels)
    mask = np.zeros((side, side, side), dtype=bool)
    qq, pp = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    mask[levels, qq, pp] = True
    mask = dilate(mask, width)
    if plane == "z":
        return mask
    if plane == "y":
        return np.ascontiguousarray(np.swapaxes(mask, 0, 1))
    if plane == "x":
        return np.ascontiguousarray(np.swapaxes(mask, 0, 2))
    raise ParameterError(f"plane must be one of x, y, z, got {plane!r}")


def build_crack_mask(spec):
    """Crack ground truth for a :class:`CrackSpec` (one or two surfaces).

    Parallel cracks sit at quarter and three-quarter depth; orthogonal
    cracks are the union of a ``plane``-normal and a perpendicular surface.
    """
    side = 2**spec.n
    seeds = np.random.SeedSequence(spec.seed).spawn(2)
    f1 = simulate_fbs(spec.n, spec.hurst, seeds[0])
    if spec.arrangement == "single":
        return rasterize_crack(f1, spec.width, spec.plane)
    f2 = simulate_fbs(spec.n, spec.hurst, seeds[1])
    if spec.arrangement == "parallel":
        m1 = rasterize_crack(f1, spec.width, spec.plane, center=side // 4)
        m2 = rasterize_crack(f2, spec.width, spec.plane, center=3 * side // 4)
    else:
        other = "x" if spec.plane == "z" else "z"
        m1 = rasterize_crack(f1, spec.width, spec.plane)
        m2 = rasterize_crack(f2, spec.width, other)
    return m1 | m2


# ---------------------------------------------------------------------------
# Background phantom and compositing
# ---------------------------------------------------------------------------

def _place_balls(labels, value, target_fraction, radius_range, rng):
    """Add random balls until the phase reaches its volume fraction."""
    if target_fraction <= 0:
        return
    nz, ny, nx = labels.shape
    total = labels.size
    count = int(np.count_nonzero(labels == value))
    attempts = 0
    while count / total < target_fraction:
        attempts += 1
        if attempts > 10_000:
            raise GenerationError(
                f"could not reach volume fraction {target_fraction} "
                f"with radii {radius_range} after {attempts - 1} attempts"
            )
        r = rng.uniform(*radius_range)
        cz, cy, cx = rng.uniform(0, nz), rng.uniform(0, ny), rng.uniform(0, nx)
        ir = int(np.ceil(r))
        z0, z1 = max(0, int(cz) - ir), min(nz, int(cz) + ir + 2)
        y0, y1 = max(0, int(cy) - ir), min(ny, int(cy) + ir + 2)
        x0, x1 = max(0, int(cx) - ir), min(nx, int(cx) + ir + 2)
        zz, yy, xx = np.ogrid[z0:z1, y0:y1, x0:x1]
        ball = (zz - cz) ** 2 + (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        region = labels[z0:z1, y0:y1, x0:x1]
        count += int(np.count_nonzero(ball & (region != value)))
        region[ball] = value


def synthesize_background(spec, return_labels=False):
    """Generate a concrete phantom volume from a :class:`PhantomSpec`.

    Phase labels: 0 matrix, 1 aggregate, 2 pore.  Grayvalues are i.i.d.
    normal per phase, followed by a Gaussian blur of ``blur_sigma``.
    """
    nx, ny, nz = spec.dims
    rng = np.random.default_rng(spec.seed)
    labels = np.zeros((nz, ny, nx), dtype=np.uint8)
    _place_balls(labels, 1, spec.aggregate_fraction, spec.aggregate_radius, rng)
    _place_balls(labels, 2, spec.pore_fraction, spec.pore_radius, rng)
    vol = rng.normal(spec.matrix_gray[0], spec.matrix_gray[1], labels.shape)
    for value, (mean, std) in ((1, spec.aggregate_gray), (2, spec.pore_gray)):
        phase = labels == value
        vol[phase] = rng.normal(mean, std, int(phase.sum()))
    vol = gaussian_blur(vol.astype(np.float32), spec.blur_sigma)
    if return_labels:
        return vol, labels
    return vol


def composite(background, crack, params):
    """Insert a crack into a background volume.

    Crack voxels get i.i.d. normal grayvalues; the transition is smoothed by
    blending the blurred volume back in only over the crack support dilated
    one structuring step, so the far field stays bit-identical.
    """
    background = np.asarray(background, dtype=np.float32)
    crack = np.asarray(crack, dtype=bool)
    if background.shape != crack.shape:
        raise ShapeError(f"dims mismatch: {background.shape} vs {crack.shape}")
    out = background.copy()
    if not crack.any():
        return out
    rng = np.random.default_rng(params.seed)
    out[crack] = rng.normal(
        params.crack_gray_mean, params.crack_gray_std, int(crack.sum())
    ).astype(np.float32)
    if params.transition_sigma > 0:
        region = dilate(crack, 3)
        blurred = gaussian_blur(out, params.transition_sigma)
        out[region] = blurred[region]
    return out


# ---------------------------------------------------------------------------
# Dataset assembly
# ---------------------------------------------------------------------------

def _derive_seed(master_seed, index, stream):
    digest = hashlib.sha256(f"{master_seed}:{index}:{stream}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _assign_splits(entries):
    """Per width group: one train entry per arrangement, then one val entry.

    Everything not used for training is eligible for evaluation; the
    manifest's ``eval`` id list therefore includes the val entries.
    """
    by_width = {}
    for entry in entries:
        by_width.setdefault(entry["width"], []).append(entry)
    for group in by_width.values():
        seen_arrangements = set()
        for entry in group:
            if entry["arrangement"] not in seen_arrangements:
                seen_arrangements.add(entry["arrangement"])
                entry["split"] = "train"
        val_pending = True
        for entry in group:
            if entry["split"] is None:
                if val_pending:
                    entry["split"] = "val"
                    val_pending = False
                else:
                    entry["split"] = "eval"


def generate_dataset(recipe, out_dir, master_seed=0):
    """Generate (gray, truth) pairs plus a JSON manifest.

    ``recipe`` is a list of (CrackSpec, PhantomSpec, CompositeParams)
    triples.  Entries whose specs carry seed ``None`` get deterministic
    per-entry seeds derived from ``master_seed`` and the entry index.
    Returns the manifest dict (also written to ``out_dir/manifest.json``).
    """
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for index, (crack_spec, phantom_spec, comp_params) in enumerate(recipe):
        crack_seed = crack_spec.seed
        if crack_seed is None:
            crack_seed = _derive_seed(master_seed, index, "crack")
        phantom_seed = phantom_spec.seed
        if phantom_seed is None:
            phantom_seed = _derive_seed(master_seed, index, "phantom")
        comp_seed = comp_params.seed
        if comp_seed is None:
            comp_seed = _derive_seed(master_seed, index, "composite")

        spec = CrackSpec(**{**crack_spec.__dict__, "seed": crack_seed})
        phantom = PhantomSpec(**{**phantom_spec.__dict__, "seed": phantom_seed})
        params = CompositeParams(**{**comp_params.__dict__, "seed": comp_seed})

        truth = build_crack_mask(spec)
        side = 2**spec.n
        if tuple(phantom.dims) != (side, side, side):
            raise ShapeError(
                f"phantom dims {phantom.dims} incompatible with crack side {side}"
            )
        background = synthesize_background(phantom)
        gray = composite(background, truth, params)

        entry_id = f"{index:03d}_w{spec.width}_{spec.arrangement}"
        gray_path = os.path.join(out_dir, f"{entry_id}_gray.raw")
        truth_path = os.path.join(out_dir, f"{entry_id}_truth.raw")
        write_volume(gray_path, gray)
        write_volume(truth_path, truth)
        entries.append(
            {
                "id": entry_id,
                "width": spec.width,
                "arrangement": spec.arrangement,
                "gray_path": gray_path,
                "truth_path": truth_path,
                "split": None,
                "seeds": {
                    "crack": crack_seed,
                    "phantom": phantom_seed,
                    "composite": comp_seed,
                },
            }
        )
    _assign_splits(entries)
    manifest = {
        "entries": entries,
        "splits": {
            "train": [e["id"] for e in entries if e["split"] == "train"],
            "val": [e["id"] for e in entries if e["split"] == "val"],
            "eval": [e["id"] for e in entries if e["split"] != "train"],
        },
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest
