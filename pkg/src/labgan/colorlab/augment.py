"""Batch and directory-level RICA. Each image gets its own random stream,
derived from (seed, image index), so results do not depend on the number of
workers or on the order in which images are processed."""

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor

from ..log import info
from ..util import derive_seed, atomic_write
from .rica import rica_augment
from .imageio import list_images, read_image, write_image

MANIFEST_HEADER = ['input', 'seed',
                   'muL', 'sigmaL', 'SL', 'TL',
                   'muA', 'sigmaA', 'SA', 'TA',
                   'muB', 'sigmaB', 'SB', 'TB']


def rica_augment_batch(images, seed, ranges, workers=1, offset=0):
    """Augment a sequence of RGB images. Returns a list of (image, params) in
    input order. Image i is augmented with the seed derive_seed(seed, offset+i)."""
    ranges.validate()

    def one(item):
        i, img = item
        return rica_augment(img, derive_seed(seed, offset + i), ranges, return_params=True)

    items = list(enumerate(images))
    if workers <= 1:
        return [one(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, items))

def format_manifest(rows):
    """rows: iterable of (input, seed, RicaParams)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(MANIFEST_HEADER)
    for name, seed, params in rows:
        writer.writerow([name, seed] + ['%.6f' % v for v in params.row()])
    return buf.getvalue()

def augment_directory(in_dir, out_dir, seed, ranges, workers=1):
    """Augment every image in in_dir, writing PNGs with the same stem to
    out_dir together with manifest.csv. Returns the manifest path."""
    paths = list_images(in_dir)
    if not paths:
        raise ValueError('no images found in %s' % in_dir)
    os.makedirs(out_dir, exist_ok=True)
    results = rica_augment_batch([read_image(p) for p in paths], seed, ranges, workers=workers)
    rows = []
    for i, (path, (img, params)) in enumerate(zip(paths, results)):
        stem = os.path.splitext(os.path.basename(path))[0]
        write_image(os.path.join(out_dir, stem + '.png'), img)
        rows.append((path, derive_seed(seed, i), params))
    manifest = os.path.join(out_dir, 'manifest.csv')
    atomic_write(manifest, format_manifest(rows).encode())
    info('augmented %d images from %s into %s', len(paths), in_dir, out_dir)
    return manifest
