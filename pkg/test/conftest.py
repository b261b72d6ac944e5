from types import SimpleNamespace

import numpy
import pytest

from labgan.segtoy import gen_toy_dataset, build_segmenter, SegmenterConfig


@pytest.fixture
def rng():
    return numpy.random.default_rng(1234)

@pytest.fixture(scope='module')
def rgb_images():
    r = numpy.random.default_rng(7)
    return [r.integers(0, 256, size=(12, 16, 3), dtype=numpy.uint8) for _ in range(5)]

@pytest.fixture(scope='module')
def toy():
    source = gen_toy_dataset(12, seed=3)
    target = gen_toy_dataset(12, seed=3, domain='target-shifted')
    return SimpleNamespace(source=source, target=target)

@pytest.fixture
def tiny_segmenter():
    return build_segmenter(SegmenterConfig(), seed=0)
