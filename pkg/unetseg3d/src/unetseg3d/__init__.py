"""Patch-based 3d U-Net crack segmentation over shared raw volumes."""

__version__ = "0.1.0"

from .model import TrainingDataError, UNet3d, class_weights, weighted_bce
from .patches import PatchGrid, merge_patches, pad_to_side
from .train import (
    TrainConfig,
    load_model,
    predict_unet,
    save_model,
    standardize,
    train_unet,
)
from .volume_io import (
    VolumeFormatError,
    load_manifest,
    read_volume,
    write_volume,
)
