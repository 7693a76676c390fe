"""3-level 3d U-Net, class weighting, and the voxelwise weighted BCE loss."""

import numpy as np
import torch
from torch import nn


class TrainingDataError(Exception):
    """Training set unusable (e.g. no crack voxels for class weighting)."""


def class_weights(truth):
    """(w_crack, w_bg) from the class fractions: w_crack = p0/p1, w_bg = 1."""
    truth = np.asarray(truth, dtype=bool)
    p1 = truth.mean()
    if p1 == 0.0:
        raise TrainingDataError("no crack voxels; cannot derive class weight")
    return float((1.0 - p1) / p1), 1.0


def weighted_bce(probs, target, w_crack):
    """Mean BCE with crack voxels weighted by ``w_crack`` (background 1).

    With ``w_crack=1`` this is exactly the plain voxelwise BCE mean.
    """
    probs = probs.clamp(1e-7, 1.0 - 1e-7)
    loss = -(target * torch.log(probs) + (1.0 - target) * torch.log(1.0 - probs))
    weights = torch.where(target > 0.5, torch.as_tensor(
        w_crack, dtype=loss.dtype), torch.as_tensor(1.0, dtype=loss.dtype))
    return (weights * loss).mean()


def _block(c_in, c_out):
    return nn.Sequential(
        nn.Conv3d(c_in, c_out, 3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv3d(c_out, c_out, 3, padding=1),
        nn.ReLU(inplace=True),
    )


class UNet3d(nn.Module):
    """Encoder/decoder with 3 pooling levels, skip connections, and
    dropout at the bottleneck; sigmoid head gives voxel probabilities."""

    def __init__(self, base=16, dropout=0.5):
        super().__init__()
        self.base = base
        self.enc1 = _block(1, base)
        self.enc2 = _block(base, base * 2)
        self.enc3 = _block(base * 2, base * 4)
        self.pool = nn.MaxPool3d(2)
        self.bottleneck = _block(base * 4, base * 8)
        self.drop = nn.Dropout3d(dropout)
        self.up3 = nn.ConvTranspose3d(base * 8, base * 4, 2, stride=2)
        self.dec3 = _block(base * 8, base * 4)
        self.up2 = nn.ConvTranspose3d(base * 4, base * 2, 2, stride=2)
        self.dec2 = _block(base * 4, base * 2)
        self.up1 = nn.ConvTranspose3d(base * 2, base, 2, stride=2)
        self.dec1 = _block(base * 2, base)
        self.head = nn.Conv3d(base, 1, 1)

    def forward(self, x):
        e1 = self.enc1(x)
        e2 = self.enc2(self.pool(e1))
        e3 = self.enc3(self.pool(e2))
        b = self.drop(self.bottleneck(self.pool(e3)))
        d3 = self.dec3(torch.cat([self.up3(b), e3], dim=1))
        d2 = self.dec2(torch.cat([self.up2(d3), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up1(d2), e1], dim=1))
        return torch.sigmoid(self.head(d1))
