"""Training and prediction for the patch-based 3d U-Net."""

from dataclasses import asdict, dataclass

import numpy as np
import torch

from .model import TrainingDataError, UNet3d, class_weights, weighted_bce
from .patches import PatchGrid, merge_patches, pad_to_side

MODEL_FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    batch_size: int = 2
    epochs: int = 20
    learning_rate: float = 1e-3
    decay_factor: float = 0.5
    decay_every: int = 5
    dropout: float = 0.5
    threshold: float = 0.5           # t6 on the output probabilities
    patch_side: int = 64
    patch_overlap: int = 14
    base_channels: int = 16
    augment_copies: int = 2          # applied twice -> triples the data


def standardize(vol):
    """Per-volume zero-mean unit-variance normalization."""
    vol = np.asarray(vol, dtype=np.float32)
    std = float(vol.std())
    if std == 0.0:
        return vol - float(vol.mean())
    return (vol - float(vol.mean())) / std


def augment(gray, truth, rng):
    """One random geometric + grayvalue augmentation of a patch pair.

    Geometry (rotations by 90 degrees and axis flips) applies to both
    arrays; the grayvalue shift (+-10%) and multiplicative distortion
    (+-10%) apply to the gray patch only.
    """
    axes = [(0, 1), (0, 2), (1, 2)][rng.integers(3)]
    k = int(rng.integers(4))
    gray = np.rot90(gray, k, axes)
    truth = np.rot90(truth, k, axes)
    for axis in range(3):
        if rng.random() < 0.5:
            gray = np.flip(gray, axis)
            truth = np.flip(truth, axis)
    scale = 1.0 + rng.uniform(-0.1, 0.1)
    shift = rng.uniform(-0.1, 0.1) * (float(np.std(gray)) + 1e-6)
    gray = gray * scale + shift
    return np.ascontiguousarray(gray, np.float32), np.ascontiguousarray(truth)


def _training_patches(pairs, cfg, rng):
    samples = []
    for gray, truth in pairs:
        gray = standardize(gray)
        gray, _ = pad_to_side(gray, cfg.patch_side)
        truth, _ = pad_to_side(np.asarray(truth, bool), cfg.patch_side, False)
        grid = PatchGrid(gray.shape, cfg.patch_side, cfg.patch_overlap)
        for sl in grid.slices():
            g, t = gray[sl], truth[sl]
            samples.append((g, t))
            for _ in range(cfg.augment_copies):
                samples.append(augment(g, t, rng))
    return samples


def train_unet(pairs, cfg=None, seed=0):
    """Train on (gray, truth) pairs; returns (model, info dict)."""
    cfg = cfg or TrainConfig()
    if not pairs:
        raise TrainingDataError("need at least one training pair")
    rng = np.random.default_rng(seed)
    torch.manual_seed(seed)

    samples = _training_patches(pairs, cfg, rng)
    all_truth = np.concatenate([t.ravel() for _, t in samples])
    w_crack, _ = class_weights(all_truth)

    model = UNet3d(base=cfg.base_channels, dropout=cfg.dropout)
    optim = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    sched = torch.optim.lr_scheduler.StepLR(
        optim, step_size=cfg.decay_every, gamma=cfg.decay_factor
    )
    losses = []
    model.train()
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(samples))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [samples[i] for i in order[start:start + cfg.batch_size]]
            x = torch.from_numpy(np.stack([g for g, _ in batch])[:, None])
            y = torch.from_numpy(
                np.stack([t for _, t in batch])[:, None].astype(np.float32)
            )
            optim.zero_grad()
            loss = weighted_bce(model(x), y, w_crack)
            loss.backward()
            optim.step()
            epoch_loss += float(loss.detach())
        sched.step()
        losses.append(epoch_loss / max(1, -(-len(samples) // cfg.batch_size)))
    return model, {"w_crack": w_crack, "epoch_losses": losses,
                   "n_samples": len(samples)}


@torch.no_grad()
def predict_unet(model, vol, cfg=None):
    """Probability volume and binary mask at the configured threshold.

    The volume is standardized, zero-padded up to the patch side if
    needed, predicted patchwise on the grid, overlap-averaged, and
    cropped back to the input dims.
    """
    cfg = cfg or TrainConfig()
    model.eval()
    gray = standardize(vol)
    padded, orig_shape = pad_to_side(gray, cfg.patch_side)
    grid = PatchGrid(padded.shape, cfg.patch_side, cfg.patch_overlap)
    outputs = []
    for origin, sl in zip(grid.origins, grid.slices()):
        x = torch.from_numpy(padded[sl][None, None])
        prob = model(x)[0, 0].numpy()
        outputs.append((origin, prob))
    prob = merge_patches(padded.shape, cfg.patch_side, outputs)
    prob = prob[: orig_shape[0], : orig_shape[1], : orig_shape[2]]
    return prob, prob >= cfg.threshold


def save_model(path, model, cfg, extra=None):
    torch.save(
        {
            "format_version": MODEL_FORMAT_VERSION,
            "config": asdict(cfg),
            "state_dict": model.state_dict(),
            "extra": extra or {},
        },
        path,
    )


def load_model(path):
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise TrainingDataError(
            f"unsupported model format {payload.get('format_version')!r}"
        )
    cfg = TrainConfig(**payload["config"])
    model = UNet3d(base=cfg.base_channels, dropout=cfg.dropout)
    model.load_state_dict(payload["state_dict"])
    return model, cfg
