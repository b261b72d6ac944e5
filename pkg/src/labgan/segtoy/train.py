"""Segmenter training (Steps 1 and 3).

With RICA enabled every batch holds the raw images followed by their
augmented copies, so the effective batch is twice the configured size. A
plugged generator is frozen and never appears in the optimizer.
"""

import csv
import io
import os
from time import time

import numpy

from ..log import info, report, plot_curve
from ..util import derive_seed, rng_for, atomic_write
from ..colorlab import rica_augment_batch, format_manifest
from ..ndtensor import from_images, backward
from ..nnlosses import cross_entropy, check_finite
from ..optim import SGD

LOG_HEADER = ['step', 'epoch', 'lr', 'cross_entropy']

defaults = dict(batch_size=8, lr=1e-2, momentum=0.9, weight_decay=1e-4, power=0.9, head_lr_mult=10.0)


def format_log(history):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(LOG_HEADER)
    for row in history:
        writer.writerow([row['step'], row['epoch'], '%.6e' % row['lr'], '%.6e' % row['cross_entropy']])
    return buf.getvalue()

def make_batch(dataset, idx, rica, seed, workers=1):
    """Raw images of idx, followed by their RICA copies when rica is set.
    Returns (images, labels, manifest rows of the copies)."""
    images, labels = dataset.images[idx], dataset.labels[idx]
    if rica is None:
        return images, labels, []
    augmented = rica_augment_batch(list(images), seed, rica, workers=workers)
    rows = [(str(i), derive_seed(seed, k), params) for k, (i, (_, params)) in enumerate(zip(idx, augmented))]
    images = numpy.concatenate([images, numpy.stack([img for img, _ in augmented])])
    return images, numpy.concatenate([labels, labels]), rows


def train_segmenter(model, dataset, rica=None, epochs=20, seed=0, log_path=None, manifest_path=None,
                    workers=1, show=1, name='Segmenter', **options):
    """Train model in place on dataset with SGD and polynomial decay.
    Returns (model, history). With manifest_path, the RICA parameters of
    every augmented copy are written there as CSV (input = dataset index)."""
    unknown = set(options) - set(defaults)
    if unknown:
        raise ValueError('unknown segmenter option(s) %s' % ', '.join(sorted(unknown)))
    params = defaults.copy()
    params.update(options)
    if len(dataset) < 1:
        raise ValueError('empty dataset')

    bs = min(params['batch_size'], len(dataset))
    per_epoch = -(-len(dataset)//bs)
    trainable = lambda ps: [p for p in ps if p.requires_grad]
    opt = SGD([(trainable(model.backbone_parameters()), 1.0),
               (trainable(model.head_parameters()), params['head_lr_mult'])],
              lr=params['lr'], max_steps=epochs*per_epoch, power=params['power'],
              momentum=params['momentum'], weight_decay=params['weight_decay'], name=name)

    history, manifest = [], []
    T = time()
    for epoch in range(epochs):
        perm = rng_for(seed, epoch).permutation(len(dataset))
        for k in range(per_epoch):
            step = opt.t
            idx = numpy.sort(perm[k*bs:(k + 1)*bs])
            images, labels, rows = make_batch(dataset, idx, rica, derive_seed(seed, epoch, k), workers)
            manifest += rows
            loss = cross_entropy(model(from_images(images)), labels)
            check_finite(dict(cross_entropy=loss), step)
            lr = opt.lr
            opt.zero_grad()
            backward(loss)
            opt.step()
            history.append(dict(step=step, epoch=epoch, lr=lr, cross_entropy=loss.item()))
            if show >= 2:
                info('%s step %d: cross_entropy=%.3e lr=%.2e', name, step, loss.item(), lr)
        epoch_loss = numpy.mean([r['cross_entropy'] for r in history[-per_epoch:]])
        report(name, 'epoch %3d' % epoch, opt.t, time() - T, epoch_loss, show)

    if log_path is not None:
        atomic_write(log_path, format_log(history).encode())
        plot_curve({'cross_entropy': [r['cross_entropy'] for r in history]}, '%s loss' % name,
                   os.path.splitext(os.fspath(log_path))[0] + '.png', show)
    if manifest_path is not None and manifest:
        atomic_write(manifest_path, format_manifest(manifest).encode())
    return model, history
