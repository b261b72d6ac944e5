"""PNG/JPEG reading and writing via Pillow. RGB images are (H, W, 3) uint8,
label maps are (H, W) uint8."""

import os

import numpy
from PIL import Image

IMAGE_EXTENSIONS = ('.png', '.jpg', '.jpeg')


def list_images(directory):
    """Sorted list of image files in a directory (non-recursive)."""
    if not os.path.isdir(directory):
        raise ValueError('not a directory: %s' % directory)
    names = sorted(n for n in os.listdir(directory) if n.lower().endswith(IMAGE_EXTENSIONS))
    return [os.path.join(directory, n) for n in names]

def read_image(path):
    with Image.open(path) as im:
        return numpy.asarray(im.convert('RGB'), dtype=numpy.uint8).copy()

def write_image(path, img):
    img = numpy.asarray(img)
    if img.dtype != numpy.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError('expected (H, W, 3) uint8 image, got %s %s' % (img.dtype, img.shape))
    Image.fromarray(img).save(path)

def read_label(path):
    with Image.open(path) as im:
        if im.mode != 'L':
            raise ValueError('label map %s is not single-channel 8-bit (mode %s)' % (path, im.mode))
        return numpy.asarray(im, dtype=numpy.uint8).copy()

def write_label(path, label):
    label = numpy.asarray(label)
    if label.ndim != 2:
        raise ValueError('expected (H, W) label map, got shape %s' % (label.shape,))
    if label.min() < 0 or label.max() > 255:
        raise ValueError('label values must fit in 8 bits')
    Image.fromarray(label.astype(numpy.uint8)).save(path)
