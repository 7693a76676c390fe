"""Patch grid covering a volume with fixed-side, fixed-overlap patches."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class PatchGrid:
    """Origins of side^3 patches tiling a volume with the given overlap.

    Adjacent origins differ by ``side - overlap`` except for the trailing
    patch on each axis, which is shifted back so it ends exactly at the
    volume boundary.  Every voxel is covered by at least one patch.
    """

    shape: tuple
    side: int = 64
    overlap: int = 14
    origins: list = field(init=False)

    def __post_init__(self):
        if self.overlap < 0 or self.overlap >= self.side:
            raise ValueError(f"overlap {self.overlap} outside [0, side)")
        axes = [self._axis_origins(dim) for dim in self.shape]
        self.origins = [
            (z, y, x) for z in axes[0] for y in axes[1] for x in axes[2]
        ]

    def _axis_origins(self, dim):
        if dim <= self.side:
            return [0]
        stride = self.side - self.overlap
        origins = list(range(0, dim - self.side, stride))
        origins.append(dim - self.side)
        return origins

    def slices(self):
        s = self.side
        for z, y, x in self.origins:
            yield (slice(z, z + s), slice(y, y + s), slice(x, x + s))


def pad_to_side(vol, side, value=0.0):
    """Zero-pad (trailing) so every axis is at least ``side`` long."""
    pads = [(0, max(0, side - dim)) for dim in vol.shape]
    if not any(p[1] for p in pads):
        return vol, vol.shape
    return np.pad(vol, pads, constant_values=value), vol.shape


def merge_patches(shape, side, patches_with_origins):
    """Average overlapping patch predictions back into a full volume."""
    acc = np.zeros(shape, dtype=np.float64)
    count = np.zeros(shape, dtype=np.int64)
    for (z, y, x), patch in patches_with_origins:
        sl = (slice(z, z + side), slice(y, y + side), slice(x, x + side))
        acc[sl] += patch
        count[sl] += 1
    if (count == 0).any():
        raise ValueError("patch set does not cover the volume")
    return (acc / count).astype(np.float32)
