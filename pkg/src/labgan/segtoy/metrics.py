"""Confusion-matrix based evaluation."""

import csv
import io
from concurrent.futures import ThreadPoolExecutor

import numpy

from ..nnlosses import IGNORE_INDEX
from ..ndtensor import from_images, no_grad
from ..util import atomic_write


def confusion_matrix(pred, label, classes, ignore_index=IGNORE_INDEX):
    """Integer (classes, classes) matrix, rows = ground truth."""
    pred, label = numpy.asarray(pred).ravel(), numpy.asarray(label).ravel()
    if pred.shape != label.shape:
        raise ValueError('prediction has %d pixels but label %d' % (pred.size, label.size))
    keep = label != ignore_index
    idx = label[keep].astype(numpy.int64)*classes + pred[keep].astype(numpy.int64)
    return numpy.bincount(idx, minlength=classes*classes).reshape(classes, classes)

def iou_from_confusion(cm):
    """Per-class IoU = TP/(TP+FP+FN); NaN for classes absent from both
    prediction and ground truth."""
    cm = numpy.asarray(cm, dtype=numpy.int64)
    tp = numpy.diag(cm)
    denom = cm.sum(axis=0) + cm.sum(axis=1) - tp
    with numpy.errstate(invalid='ignore', divide='ignore'):
        return numpy.where(denom > 0, tp/numpy.maximum(denom, 1), numpy.nan)

def mean_iou(ious):
    ious = numpy.asarray(ious, dtype=numpy.float64)
    present = ~numpy.isnan(ious)
    if not present.any():
        raise ValueError('no class present in prediction or ground truth')
    return float(ious[present].mean())

def score(preds, labels, classes):
    """(per-class IoU list, mIoU) of a set of predicted label maps."""
    if len(labels) == 0:
        raise ValueError('empty dataset')
    cm = confusion_matrix(preds, labels, classes)
    ious = iou_from_confusion(cm)
    return ious.tolist(), mean_iou(ious)


def predict(model, images, batch_size=16):
    """Arg-max label maps (N, H, W) of a batch of RGB images."""
    images = numpy.asarray(images)
    out = []
    with no_grad():
        for k in range(0, len(images), batch_size):
            logits = model(from_images(images[k:k + batch_size])).data
            out.append(numpy.argmax(logits, axis=1).astype(numpy.uint8))
    return numpy.concatenate(out) if out else numpy.zeros((0,) + images.shape[1:3], numpy.uint8)

def evaluate_miou(model, dataset, batch_size=16, workers=1):
    """Per-class IoU and mIoU of model over dataset, accumulated as one
    confusion matrix. Inference runs through a plugged generator."""
    if len(dataset) == 0:
        raise ValueError('empty dataset')
    K = dataset.classes
    chunks = [slice(k, k + batch_size) for k in range(0, len(dataset), batch_size)]

    def one(sl):
        return confusion_matrix(predict(model, dataset.images[sl], batch_size), dataset.labels[sl], K)

    if workers <= 1:
        cms = [one(sl) for sl in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cms = list(pool.map(one, chunks))
    ious = iou_from_confusion(sum(cms))
    return ious.tolist(), mean_iou(ious)


def format_report(ious, miou):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(['class', 'iou'])
    for k, v in enumerate(ious):
        writer.writerow([k, 'nan' if numpy.isnan(v) else '%.6f' % v])
    writer.writerow(['miou', '%.6f' % miou])
    return buf.getvalue()

def write_report(path, ious, miou):
    atomic_write(path, format_report(ious, miou).encode())
    return path
