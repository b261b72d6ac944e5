"""Colour conversion and random image colour augmentation (RICA)."""

from .convert import CHANNELS, srgb_to_lab8, lab8_to_srgb, check_rgb, check_lab
from .rica import (RicaRanges, RicaParams, channel_stats, rica_step1, rica_step2,
                   sample_rica_params, rica_lab, rica_augment, EPS)
from .augment import rica_augment_batch, augment_directory, format_manifest, MANIFEST_HEADER
from .imageio import IMAGE_EXTENSIONS, list_images, read_image, write_image, read_label, write_label
