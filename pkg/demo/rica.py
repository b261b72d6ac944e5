"""Random image colour augmentation on the toy source domain.

Augments the source images with RICA and compares, per LAB channel, how much
of the target-shifted distribution the raw and the augmented sets cover.
"""

import numpy

from labgan.colorlab import srgb_to_lab8, RicaRanges, rica_augment_batch
from labgan.segtoy import gen_toy_dataset
from labgan.analysis import histogram_of_images, range_overlap
from labgan.testing import check_expected

red = numpy.array([[[255, 0, 0]]], dtype=numpy.uint8)
check_expected('red', srgb_to_lab8(red)[0, 0], [135.76, 208.09, 195.20], atol=0.05)

source = gen_toy_dataset(24, seed=0)
target = gen_toy_dataset(24, seed=0, domain='target-shifted')
augmented = [img for img, _ in rica_augment_batch(source.images, seed=1, ranges=RicaRanges())]

for c in 'LAB':
    t = histogram_of_images(target.images, c)
    raw = range_overlap(histogram_of_images(source.images, c), t)
    aug = range_overlap(histogram_of_images(augmented, c), t)
    print('channel %s: overlap with target %.3f raw, %.3f with RICA' % (c, raw, aug))

a_raw = range_overlap(histogram_of_images(source.images, 'A'), histogram_of_images(target.images, 'A'))
check_expected('raw A overlap', a_raw, 0.0, atol=0.5)
