"""Scale-space derivatives, the voxelwise 3x3 Hessian, and the feature bank.

Hessian entries are Gaussian second-derivative responses multiplied by the
scale factor sigma (an option switches to the sigma^2 normalization common
in the filter literature).  sigma = 0 falls back to plain central finite
differences.  Eigenvalues are solved in closed form (Cardano) and sorted
voxelwise by absolute value, |l1| <= |l2| <= |l3|.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ParameterError
from .volume import gaussian_blur, gaussian_kernel1d

__all__ = [
    "HessianField",
    "EigenField",
    "FeatureBankConfig",
    "gaussian_derivative",
    "hessian",
    "eigenvalues3",
    "principal_direction",
    "feature_bank",
    "feature_names",
]

# entry order used everywhere a Hessian is flattened
HESSIAN_KEYS = ("xx", "xy", "xz", "yy", "yz", "zz")

_FD_FIRST = np.array([-0.5, 0.0, 0.5])      # correlate1d => central difference
_FD_SECOND = np.array([1.0, -2.0, 1.0])


@dataclass
class HessianField:
    """The six unique entries of the symmetric Hessian at one scale."""

    sigma: float
    xx: np.ndarray
    xy: np.ndarray
    xz: np.ndarray
    yy: np.ndarray
    yz: np.ndarray
    zz: np.ndarray

    def entries(self):
        return [getattr(self, k) for k in HESSIAN_KEYS]


@dataclass
class EigenField:
    """Voxelwise eigenvalues sorted by absolute value, optional l3 direction."""

    lam1: np.ndarray
    lam2: np.ndarray
    lam3: np.ndarray
    direction: np.ndarray | None = None   # unit eigenvector of lam3,
    # shape (..., 3) with components in (x, y, z) order


def gaussian_derivative(vol, sigma, orders):
    """Separable Gaussian derivative, orders given per axis as (oz, oy, ox).

    sigma = 0 uses central finite differences instead of Gaussian kernels.
    """
    out = np.asarray(vol, dtype=np.float64)
    for axis, order in enumerate(orders):
        if sigma == 0:
            if order == 0:
                continue
            kernel = _FD_FIRST if order == 1 else _FD_SECOND
            if order > 2:
                raise ParameterError(f"unsupported derivative order {order}")
        else:
            kernel = gaussian_kernel1d(sigma, order)
        out = ndimage.correlate1d(out, kernel, axis=axis, mode="mirror")
    return out.astype(np.float32)


def hessian(vol, sigma, sigma_power=1):
    """Hessian of the image at scale sigma.

    Each entry is the convolution with the corresponding Gaussian
    second-derivative kernel, scaled by sigma**sigma_power (sigma_power 1 by
    default; 2 selects the Lindeberg normalization).  sigma = 0 computes
    unscaled finite-difference second derivatives.
    """
    if sigma != 0 and sigma < 0.5:
        raise ParameterError(f"hessian scale must be 0 or >= 0.5, got {sigma}")
    vol = np.asarray(vol, dtype=np.float32)
    scale = 1.0 if sigma == 0 else float(sigma) ** sigma_power
    orders = {
        "xx": (0, 0, 2), "xy": (0, 1, 1), "xz": (1, 0, 1),
        "yy": (0, 2, 0), "yz": (1, 1, 0), "zz": (2, 0, 0),
    }
    parts = {
        key: scale * gaussian_derivative(vol, sigma, orders[key])
        for key in HESSIAN_KEYS
    }
    return HessianField(sigma=sigma, **parts)


def _symmetric_eigenvalues(xx, xy, xz, yy, yz, zz):
    """Closed-form (Cardano) eigenvalues of symmetric 3x3 matrices.

    Returns three arrays in ascending signed order.
    """
    q = (xx + yy + zz) / 3.0
    p1 = xy**2 + xz**2 + yz**2
    p2 = (xx - q) ** 2 + (yy - q) ** 2 + (zz - q) ** 2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    safe_p = np.where(p > 0, p, 1.0)
    bxx, byy, bzz = (xx - q) / safe_p, (yy - q) / safe_p, (zz - q) / safe_p
    bxy, bxz, byz = xy / safe_p, xz / safe_p, yz / safe_p
    det_b = (
        bxx * (byy * bzz - byz**2)
        - bxy * (bxy * bzz - byz * bxz)
        + bxz * (bxy * byz - byy * bxz)
    )
    r = np.clip(det_b / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    mid = 3.0 * q - hi - lo
    degenerate = p == 0
    for arr in (hi, mid, lo):
        arr[degenerate] = q[degenerate]
    return lo, mid, hi


def eigenvalues3(h, want_direction=False):
    """Eigenvalues of a :class:`HessianField`, sorted voxelwise by |l|.

    Ties under the absolute-value sort are broken by ascending signed value.
    With ``want_direction`` the unit eigenvector of the largest-|l|
    eigenvalue is computed as well.
    """
    entries = [np.asarray(e, dtype=np.float64) for e in h.entries()]
    shape = entries[0].shape
    flat = [e.ravel() for e in entries]
    lo, mid, hi = _symmetric_eigenvalues(*flat)
    vals = np.stack([lo, mid, hi])                     # ascending signed
    order = np.lexsort((vals, np.abs(vals)), axis=0)   # |l| first, signed tiebreak
    ordered = np.take_along_axis(vals, order, axis=0)
    lam1 = ordered[0].reshape(shape).astype(np.float32)
    lam2 = ordered[1].reshape(shape).astype(np.float32)
    lam3 = ordered[2].reshape(shape).astype(np.float32)
    direction = None
    if want_direction:
        direction = _eigenvector(flat, ordered[2]).reshape(shape + (3,))
    return EigenField(lam1=lam1, lam2=lam2, lam3=lam3, direction=direction)


def _eigenvector(flat_entries, lam):
    """Unit eigenvector for eigenvalue lam of symmetric 3x3 matrices.

    Uses the largest cross product of rows of (A - lam I); degenerate
    voxels (repeated eigenvalue or zero matrix) fall back to the z axis.
    """
    xx, xy, xz, yy, yz, zz = flat_entries
    r0 = np.stack([xx - lam, xy, xz], axis=-1)
    r1 = np.stack([xy, yy - lam, yz], axis=-1)
    r2 = np.stack([xz, yz, zz - lam], axis=-1)
    crosses = np.stack(
        [np.cross(r0, r1), np.cross(r0, r2), np.cross(r1, r2)], axis=0
    )
    norms = np.linalg.norm(crosses, axis=-1)
    best = np.argmax(norms, axis=0)
    idx = np.arange(lam.size)
    vec = crosses[best, idx, :]
    norm = norms[best, idx]
    bad = norm < 1e-12
    vec[bad] = (0.0, 0.0, 1.0)
    norm[bad] = 1.0
    return (vec / norm[:, None]).astype(np.float32)


def principal_direction(vol, sigma):
    """Unit normal estimate: eigenvector of the largest-|l| Hessian eigenvalue."""
    eig = eigenvalues3(hessian(vol, sigma), want_direction=True)
    return eig.direction


# ---------------------------------------------------------------------------
# Feature bank
# ---------------------------------------------------------------------------

@dataclass
class FeatureBankConfig:
    """Per-transform sigma lists; the default is the width-3 training bank."""

    gaussian_sigmas: tuple = (0.5, 0.75, 1.0, 1.5, 2.5, 3.5, 5.0)
    log_sigmas: tuple = (0.5, 1.0, 1.5, 2.5, 3.5, 5.0)
    gradient_sigmas: tuple = (0.5, 1.0, 1.5, 2.5, 3.5, 5.0)
    dog_pairs: tuple = ((1.0, 0.75), (1.5, 1.0), (2.5, 1.5), (3.5, 2.5), (5.0, 3.5))
    hessian_sigmas: tuple = (0.5, 0.75, 1.0)
    structure_sigmas: tuple = (0.5, 0.75, 1.0)

    def __post_init__(self):
        sigmas = (
            list(self.gaussian_sigmas) + list(self.log_sigmas)
            + list(self.gradient_sigmas) + [s for pair in self.dog_pairs for s in pair]
            + list(self.hessian_sigmas) + list(self.structure_sigmas)
        )
        if any(s < 0.5 for s in sigmas):
            raise ParameterError("all feature-bank sigmas must be >= 0.5")

    def to_dict(self):
        return {
            "gaussian_sigmas": list(self.gaussian_sigmas),
            "log_sigmas": list(self.log_sigmas),
            "gradient_sigmas": list(self.gradient_sigmas),
            "dog_pairs": [list(p) for p in self.dog_pairs],
            "hessian_sigmas": list(self.hessian_sigmas),
            "structure_sigmas": list(self.structure_sigmas),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            gaussian_sigmas=tuple(data["gaussian_sigmas"]),
            log_sigmas=tuple(data["log_sigmas"]),
            gradient_sigmas=tuple(data["gradient_sigmas"]),
            dog_pairs=tuple(tuple(p) for p in data["dog_pairs"]),
            hessian_sigmas=tuple(data["hessian_sigmas"]),
            structure_sigmas=tuple(data["structure_sigmas"]),
        )


def feature_names(config):
    """Fixed, documented feature order; part of the trained-model contract."""
    names = [f"gaussian_s{s}" for s in config.gaussian_sigmas]
    names += [f"log_s{s}" for s in config.log_sigmas]
    names += [f"gradmag_s{s}" for s in config.gradient_sigmas]
    names += [f"dog_s{a}_s{b}" for a, b in config.dog_pairs]
    for s in config.hessian_sigmas:
        names += [f"hessian_{k}_s{s}" for k in HESSIAN_KEYS]
        names += [f"hessian_lam{i}_s{s}" for i in (1, 2, 3)]
    for s in config.structure_sigmas:
        names += [f"structure_lam{i}_s{s}" for i in (1, 2, 3)]
    return names


def _structure_tensor_eigenvalues(vol, sigma):
    gz = gaussian_derivative(vol, sigma, (1, 0, 0))
    gy = gaussian_derivative(vol, sigma, (0, 1, 0))
    gx = gaussian_derivative(vol, sigma, (0, 0, 1))
    tensor = HessianField(
        sigma=sigma,
        xx=gx * gx, xy=gx * gy, xz=gx * gz,
        yy=gy * gy, yz=gy * gz, zz=gz * gz,
    )
    eig = eigenvalues3(tensor)
    return [eig.lam1, eig.lam2, eig.lam3]


def feature_bank(vol, config=None):
    """Compute the ordered list of feature volumes for one input volume.

    Order matches :func:`feature_names`: Gaussians, Laplacians of Gaussian,
    gradient magnitudes, differences of Gaussians, then per Hessian scale the
    six entries plus three eigenvalues, then structure-tensor eigenvalues.
    """
    if config is None:
        config = FeatureBankConfig()
    vol = np.asarray(vol, dtype=np.float32)
    features = []
    blurred = {}

    def blur(sigma):
        if sigma not in blurred:
            blurred[sigma] = gaussian_blur(vol, sigma)
        return blurred[sigma]

    for s in config.gaussian_sigmas:
        features.append(blur(s))
    for s in config.log_sigmas:
        log = (
            gaussian_derivative(vol, s, (0, 0, 2))
            + gaussian_derivative(vol, s, (0, 2, 0))
            + gaussian_derivative(vol, s, (2, 0, 0))
        )
        features.append(log)
    for s in config.gradient_sigmas:
        gz = gaussian_derivative(vol, s, (1, 0, 0))
        gy = gaussian_derivative(vol, s, (0, 1, 0))
        gx = gaussian_derivative(vol, s, (0, 0, 1))
        features.append(np.sqrt(gx**2 + gy**2 + gz**2))
    for s1, s2 in config.dog_pairs:
        features.append(blur(s1) - blur(s2))
    for s in config.hessian_sigmas:
        h = hessian(vol, s)
        features.extend(h.entries())
        eig = eigenvalues3(h)
        features.extend([eig.lam1, eig.lam2, eig.lam3])
    for s in config.structure_sigmas:
        features.extend(_structure_tensor_eigenvalues(vol, s))
    return features
