"""Frame-to-word extraction: pixel, texton and motion words plus the background model."""

from .background import BackgroundModel, mask_subsample
from .imageio import Frame, ImageFormatError, decode_pnm, encode_pnm, read_pnm, write_pnm
from .pixels import grid_points, pixel_word_ids, pixel_words
from .textons import Codebook, FeatureError, filter_bank_maps, filter_responses, quantize, train_codebook

__all__ = [
    "BackgroundModel",
    "Codebook",
    "FeatureError",
    "Frame",
    "ImageFormatError",
    "decode_pnm",
    "encode_pnm",
    "filter_bank_maps",
    "filter_responses",
    "grid_points",
    "mask_subsample",
    "pixel_word_ids",
    "pixel_words",
    "quantize",
    "read_pnm",
    "train_codebook",
    "write_pnm",
]
