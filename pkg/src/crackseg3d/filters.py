"""Sheet and Frangi filter responses plus thresholding.

Both filters score how plate-like the local Hessian spectrum is; cracks are
dark, so plate voxels have lam3 > 0 and the responses are zero wherever
lam3 <= 0.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .features import eigenvalues3, hessian

__all__ = [
    "SheetParams",
    "FrangiParams",
    "sheet_response",
    "frangi_response",
    "normalize_to_8bit",
    "threshold",
]


@dataclass
class SheetParams:
    sigma: float = 1.5
    rho: float = 1.0
    delta: float = 1.5
    t1: float = 0.8

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0:
            raise ParameterError(f"rho must be in (0, 1], got {self.rho}")
        if self.delta <= 0:
            raise ParameterError(f"delta must be > 0, got {self.delta}")


@dataclass
class FrangiParams:
    sigma_min: float = 1.5
    sigma_max: float = 1.5
    alpha: float = 0.3
    beta: float = 0.3
    t2: float = 24.0

    def __post_init__(self):
        if not 0.5 <= self.sigma_min <= self.sigma_max:
            raise ParameterError(
                f"need 0.5 <= sigma_min <= sigma_max, got "
                f"({self.sigma_min}, {self.sigma_max})"
            )
        if self.alpha <= 0 or self.beta <= 0:
            raise ParameterError("alpha and beta must be > 0")


def _sheet_g(lam_s, lam_t, rho, delta):
    """Discrepancy weight g(lam_s, lam_t); lam_t is assumed > 0 where used."""
    abs_t = np.abs(lam_t)
    safe_t = np.where(abs_t > 0, abs_t, 1.0)
    ratio = lam_s / safe_t
    out = np.zeros_like(lam_s)
    first = (lam_s <= 0) & (abs_t >= np.abs(lam_s)) & (abs_t > 0)
    out[first] = np.maximum(1.0 + ratio[first], 0.0) ** delta
    second = (lam_s > 0) & (lam_s <= abs_t / rho)
    # clamp against rounding at the branch edge (negative base ** fractional
    # delta would be nan)
    out[second] = np.maximum(1.0 - rho * ratio[second], 0.0) ** delta
    return out


def sheet_response(vol, sigma, rho=1.0, delta=1.5):
    """Sheet filter S = lam3 * g(lam1, lam3) * g(lam2, lam3) where lam3 > 0."""
    SheetParams(sigma=sigma, rho=rho, delta=delta)  # validate ranges
    eig = eigenvalues3(hessian(vol, sigma))
    lam1 = eig.lam1.astype(np.float64)
    lam2 = eig.lam2.astype(np.float64)
    lam3 = eig.lam3.astype(np.float64)
    response = lam3 * _sheet_g(lam1, lam3, rho, delta) * _sheet_g(lam2, lam3, rho, delta)
    response[lam3 <= 0] = 0.0
    return response.astype(np.float32)


def frangi_response(vol, params):
    """Plate-adapted Frangi response, the max over the scale loop.

    Per scale: Q_A = |l2|/|l3|, Q_B = |l1|/sqrt(|l2| |l3|),
    R = sqrt(sum l_i^2), eta = volume-wide max of R, and
    E = exp(-Q_A^2/alpha) * exp(-Q_B^2/beta) * (1 - exp(-R^2/eta)), with the
    Q_B factor dropped where l2 = 0 and E = 0 where l3 <= 0.  Values lie in
    [0, 1).  Scales run from sigma_min to sigma_max in steps of 0.5.
    """
    vol = np.asarray(vol, dtype=np.float32)
    sigmas = np.arange(params.sigma_min, params.sigma_max + 1e-9, 0.5)
    best = np.zeros(vol.shape, dtype=np.float64)
    for sigma in sigmas:
        eig = eigenvalues3(hessian(vol, float(sigma)))
        a1 = np.abs(eig.lam1.astype(np.float64))
        a2 = np.abs(eig.lam2.astype(np.float64))
        a3 = np.abs(eig.lam3.astype(np.float64))
        lam3 = eig.lam3.astype(np.float64)
        r2 = a1**2 + a2**2 + a3**2
        eta = np.sqrt(r2.max())
        if eta == 0:
            continue
        safe3 = np.where(a3 > 0, a3, 1.0)
        qa2 = (a2 / safe3) ** 2
        qb2 = np.where(a2 > 0, a1**2 / np.where(a2 * a3 > 0, a2 * a3, 1.0), 0.0)
        e = np.exp(-qa2 / params.alpha) * (1.0 - np.exp(-r2 / eta))
        has_l2 = a2 > 0
        e = np.where(has_l2, e * np.exp(-qb2 / params.beta), e)
        e[lam3 <= 0] = 0.0
        np.maximum(best, e, out=best)
    return best.astype(np.float32)


def normalize_to_8bit(vol):
    """Min-max normalization to [0, 255]; a constant volume maps to 0."""
    vol = np.asarray(vol, dtype=np.float32)
    lo, hi = float(vol.min()), float(vol.max())
    if hi == lo:
        return np.zeros_like(vol)
    return (vol - lo) * (255.0 / (hi - lo))


def threshold(vol, t):
    """Binary mask of voxels with value >= t."""
    return np.asarray(vol) >= t
