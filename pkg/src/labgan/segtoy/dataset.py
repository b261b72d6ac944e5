"""Procedural segmentation data with a controlled colour-domain shift.

Every image is a textured background with a few filled shapes. The class of
a pixel is the shape that covers it (0 = background); each class has its own
geometry, its own luminance pattern and its own colour palette. The
target-shifted domain draws exactly the same scenes and then maps every
colour through a fixed LAB transform (lightness down, both chroma axes moved
and stretched), so the two domains share labels and differ in colour only.
"""

import json
import os
from dataclasses import dataclass, field

import numpy
from scipy import ndimage

from ..log import info
from ..util import as_size, rng_for, atomic_write
from ..colorlab import lab8_to_srgb, list_images, read_image, write_image, read_label, write_label

DOMAINS = ('source', 'target-shifted')
SHAPES = ('disc', 'square', 'triangle', 'ring')
MAX_CLASSES = len(SHAPES) + 1

# 8-bit LAB colours; background first
SOURCE_PALETTE = [
    (140., 150., 150.),
    (90., 185., 170.),
    (170., 160., 120.),
    (110., 200., 110.),
    (200., 145., 185.),
]
PATTERNS = ('noise', 'flat', 'stripes', 'checker', 'flat')
# per channel (gain, offset): x -> 128 + gain*(x - 128) + offset
TARGET_SHIFT = dict(L=(1.0, -30.0), A=(1.3, -70.0), B=(1.2, 10.0))


@dataclass
class ToyDataset:
    images: numpy.ndarray
    labels: numpy.ndarray
    classes: int = 5
    seed: int = 0
    domain: str = 'source'
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        self.images = numpy.asarray(self.images)
        self.labels = numpy.asarray(self.labels)
        if len(self.images) != len(self.labels):
            raise ValueError('%d images but %d label maps' % (len(self.images), len(self.labels)))
        if self.images.ndim != 4 or self.images.shape[-1] != 3 or self.images.dtype != numpy.uint8:
            raise ValueError('images must be (N, H, W, 3) uint8, got %s %s' % (self.images.shape, self.images.dtype))
        if self.labels.shape != self.images.shape[:3]:
            raise ValueError('label shape %s does not match images %s' % (self.labels.shape, self.images.shape))
        if self.labels.size and int(self.labels.max()) >= self.classes:
            raise ValueError('label value %d out of range for %d classes' % (self.labels.max(), self.classes))

    def __len__(self):
        return len(self.images)

    @property
    def size(self):
        return self.images.shape[1:3]

    def subset(self, index):
        return ToyDataset(self.images[index], self.labels[index], self.classes, self.seed,
                          self.domain, self.descriptor)

    def manifest(self):
        return dict(n=len(self), size=list(self.size), seed=self.seed, classes=self.classes,
                    domain=self.domain, descriptor=self.descriptor)

    def save(self, directory):
        """Write images/NNNN.png, labels/NNNN.png and manifest.json."""
        for sub in ('images', 'labels'):
            os.makedirs(os.path.join(directory, sub), exist_ok=True)
        for i, (img, lab) in enumerate(zip(self.images, self.labels)):
            write_image(os.path.join(directory, 'images', '%04d.png' % i), img)
            write_label(os.path.join(directory, 'labels', '%04d.png' % i), lab)
        atomic_write(os.path.join(directory, 'manifest.json'),
                     json.dumps(self.manifest(), indent=2, sort_keys=True).encode())
        info('wrote %d %s images to %s', len(self), self.domain, directory)
        return directory


def load_toy_dataset(directory):
    path = os.path.join(directory, 'manifest.json')
    if not os.path.exists(path):
        raise ValueError('%s is not a dataset directory (no manifest.json)' % directory)
    with open(path) as f:
        manifest = json.load(f)
    images = [read_image(p) for p in list_images(os.path.join(directory, 'images'))]
    labels = [read_label(p) for p in list_images(os.path.join(directory, 'labels'))]
    if not images:
        raise ValueError('empty dataset in %s' % directory)
    if len(images) != len(labels):
        raise ValueError('%s: %d images but %d label maps' % (directory, len(images), len(labels)))
    return ToyDataset(numpy.stack(images), numpy.stack(labels), manifest['classes'],
                      manifest.get('seed', 0), manifest.get('domain', 'source'),
                      manifest.get('descriptor', {}))


def _shape_mask(kind, yy, xx, cy, cx, r):
    dy, dx = yy - cy, xx - cx
    if kind == 'disc':
        return dy**2 + dx**2 <= r**2
    if kind == 'square':
        return (numpy.abs(dy) <= 0.8*r) & (numpy.abs(dx) <= 0.8*r)
    if kind == 'triangle':
        # apex up, base width 2r
        return (dy >= -r) & (dy <= r) & (numpy.abs(dx) <= (dy + r)/2)
    if kind == 'ring':
        d2 = dy**2 + dx**2
        return (d2 <= r**2) & (d2 >= (0.55*r)**2)
    raise ValueError('unknown shape "%s"' % kind)

def _pattern(kind, yy, xx, texture):
    if kind == 'stripes':
        return 25.0*numpy.sign(numpy.sin(2*numpy.pi*yy/6.0) + 1e-9)
    if kind == 'checker':
        return 25.0*(2*((yy//4 + xx//4) % 2) - 1)
    if kind == 'noise':
        return 25.0*texture
    return numpy.zeros_like(texture)

def shift_lab(lab):
    """The fixed colour transform of the target-shifted domain: an increasing
    affine map of each 8-bit LAB channel, clipped to [0, 255]."""
    out = numpy.empty(numpy.shape(lab))
    for c, name in enumerate('LAB'):
        gain, offset = TARGET_SHIFT[name]
        out[..., c] = 128.0 + gain*(lab[..., c] - 128.0) + offset
    return numpy.clip(out, 0, 255)

def render_scene(rng, classes, size):
    """Draw one scene. Returns (LAB image, label map). Consumes the same
    random numbers regardless of domain."""
    H, W = size
    yy, xx = numpy.mgrid[0:H, 0:W].astype(numpy.float64)
    texture = ndimage.gaussian_filter(rng.normal(size=(H, W)), sigma=2.0)
    texture /= max(numpy.abs(texture).max(), 1e-12)
    label = numpy.zeros((H, W), dtype=numpy.uint8)
    lab = numpy.empty((H, W, 3))
    lab[...] = SOURCE_PALETTE[0]
    lab[..., 0] += _pattern(PATTERNS[0], yy, xx, texture)

    for _ in range(rng.integers(2, 5)):
        c = int(rng.integers(1, classes))
        r = rng.uniform(7, 14)
        cy, cx = rng.uniform(r, H - r), rng.uniform(r, W - r)
        jitter = rng.normal(0, 6, size=3)
        mask = _shape_mask(SHAPES[c - 1], yy, xx, cy, cx, r)
        colour = numpy.asarray(SOURCE_PALETTE[c]) + jitter
        lab[mask] = colour
        lab[mask, 0] += _pattern(PATTERNS[c], yy, xx, texture)[mask]
        label[mask] = c
    return numpy.clip(lab, 0, 255), label


def gen_toy_dataset(n, seed=0, domain='source', classes=5, size=(64, 64)):
    """Generate n scenes. Scene i depends on (seed, i) only, so the source and
    target-shifted sets of one seed have identical label maps."""
    if n < 1:
        raise ValueError('need at least one image, got n=%d' % n)
    if domain not in DOMAINS:
        raise ValueError('unknown domain "%s" (expected one of %s)' % (domain, ', '.join(DOMAINS)))
    if not 2 <= classes <= MAX_CLASSES:
        raise ValueError('classes must be in [2, %d], got %d' % (MAX_CLASSES, classes))
    size = as_size(size)
    images, labels = [], []
    for i in range(n):
        lab, label = render_scene(rng_for(seed, i), classes, size)
        if domain == 'target-shifted':
            lab = shift_lab(lab)
        images.append(lab8_to_srgb(lab.astype(numpy.float32)))
        labels.append(label)
    palette = [list(c) for c in SOURCE_PALETTE[:classes]]
    if domain == 'target-shifted':
        palette = [shift_lab(numpy.array([c]))[0].tolist() for c in palette]
    shift = {k: list(v) for k, v in TARGET_SHIFT.items()} if domain != 'source' else None
    descriptor = dict(palette=domain, class_colors=palette, shapes=list(SHAPES[:classes - 1]),
                      patterns=list(PATTERNS[:classes]), shift=shift)
    return ToyDataset(numpy.stack(images), numpy.stack(labels), classes, seed, domain, descriptor)
