__all__ = [
    "AugOp",
    "AugPolicy",
    "BlurOp",
    "ColorJitterOp",
    "CropOp",
    "FlipOp",
    "GrayscaleOp",
    "Image",
    "LabeledImages",
    "MaskedImage",
    "MultiCropSpec",
    "SHAPE_NAMES",
    "ViewSet",
    "apply_augmentation",
    "derive_seed",
    "gen_synthetic_dataset",
    "image_seed",
    "make_views",
    "mask_patches",
    "multicrop_pairs",
    "pair_count",
    "read_dataset",
    "substream",
    "train_val_split",
    "write_dataset",
]

from .augment import (
    AugOp,
    AugPolicy,
    BlurOp,
    ColorJitterOp,
    CropOp,
    FlipOp,
    GrayscaleOp,
    MultiCropSpec,
    ViewSet,
    apply_augmentation,
    make_views,
    multicrop_pairs,
    pair_count,
)
from .io import read_dataset, train_val_split, write_dataset
from .masking import MaskedImage, mask_patches
from .seeds import derive_seed, image_seed, substream
from .synthetic import SHAPE_NAMES, Image, LabeledImages, gen_synthetic_dataset
