"""Toy segmentation testbed: procedural data with a colour-domain shift, a
small segmenter with a pluggable feature generator, training and mIoU."""

from .dataset import ToyDataset, gen_toy_dataset, load_toy_dataset, shift_lab, DOMAINS
from .segmenter import SegmenterConfig, Segmenter, build_segmenter, POSITIONS
from .train import train_segmenter, make_batch, format_log
from .metrics import (confusion_matrix, iou_from_confusion, mean_iou, score, predict,
                      evaluate_miou, format_report, write_report)
