from .dataset import BatchStream, DatasetIndex, batch_rng, load_dataset, rng_state_bytes
from .image import list_images, quantize, read_image, to_uint8, write_image
from .pipeline import (
    ImagePair,
    PatchBatch,
    augment,
    crop_to_scale,
    degrade,
    dihedral,
    dihedral_inverse,
    invert_dihedral,
    sample_patch,
)
from .resize import bicubic_resize, contributions

__all__ = [
    "BatchStream",
    "DatasetIndex",
    "batch_rng",
    "load_dataset",
    "rng_state_bytes",
    "list_images",
    "quantize",
    "read_image",
    "to_uint8",
    "write_image",
    "ImagePair",
    "PatchBatch",
    "augment",
    "crop_to_scale",
    "degrade",
    "dihedral",
    "dihedral_inverse",
    "invert_dihedral",
    "sample_patch",
    "bicubic_resize",
    "contributions",
]
