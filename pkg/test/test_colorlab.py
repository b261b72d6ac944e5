import csv

import numpy
import pytest

from labgan.colorlab import (srgb_to_lab8, lab8_to_srgb, channel_stats, rica_step1, rica_step2,
                             sample_rica_params, rica_lab, rica_augment, rica_augment_batch,
                             augment_directory, RicaRanges, RicaParams, MANIFEST_HEADER,
                             read_image, write_image)

ANCHOR_TOL = 0.05


def _params(mu=(0, 0, 0), sigma=(0, 0, 0), span=(255, 255, 255), start=(0, 0, 0)):
    return RicaParams(tuple(map(float, mu)), tuple(map(float, sigma)),
                      tuple(map(float, span)), tuple(map(float, start)))

def _channel(values):
    """A 1 x n LAB image whose three channels all hold values."""
    v = numpy.asarray(values, dtype=numpy.float32)
    return numpy.stack([v, v, v], axis=-1)[None]


def test_anchor_colours():
    px = numpy.array([[[255, 255, 255], [0, 0, 0], [255, 0, 0]]], dtype=numpy.uint8)
    lab = srgb_to_lab8(px)[0]
    assert lab.dtype == numpy.float32
    assert numpy.allclose(lab[0], [255, 128, 128], atol=ANCHOR_TOL)
    assert numpy.allclose(lab[1], [0, 128, 128], atol=ANCHOR_TOL)
    assert numpy.allclose(lab[2], [135.76, 208.09, 195.20], atol=ANCHOR_TOL)

def test_lab_to_srgb_extremes():
    lab = numpy.array([[[255, 128, 128], [0, 128, 128]]], dtype=numpy.float32)
    assert lab8_to_srgb(lab).tolist() == [[[255, 255, 255], [0, 0, 0]]]

def test_round_trip():
    img = numpy.random.default_rng(0).integers(0, 256, size=(1000, 1000, 3), dtype=numpy.uint8)
    back = lab8_to_srgb(srgb_to_lab8(img))
    assert back.shape == img.shape
    assert numpy.abs(back.astype(int) - img).max() <= 2

def test_rgb_must_be_uint8():
    with pytest.raises(TypeError):
        srgb_to_lab8(numpy.zeros((2, 2, 3)))


def test_channel_stats():
    assert channel_stats([5, 5, 5]) == (5, 0, 5, 5)
    mean, std, lo, hi = channel_stats([0, 128, 255])
    assert abs(mean - 127.667) < 1e-3 and abs(std - 104.104) < 1e-2
    assert (lo, hi) == (0, 255)
    assert channel_stats([0, 255])[:2] == (127.5, 127.5)
    with pytest.raises(ValueError, match='empty channel'):
        channel_stats([])


def test_step1_identity_statistics(rng):
    lab = rng.uniform(20, 230, size=(8, 8, 3)).astype(numpy.float32)
    stats = [channel_stats(lab[..., c]) for c in range(3)]
    p = _params(mu=[s[0] for s in stats], sigma=[s[1] for s in stats])
    assert numpy.allclose(rica_step1(lab, p), lab, atol=1e-3)

def test_step1_worked_example():
    out = rica_step1(_channel([0, 128, 255]), _params(mu=(100,)*3, sigma=(50,)*3))
    assert numpy.allclose(out[0, :, 0], [38.68, 100.16, 161.16], atol=1e-2)

def test_step1_constant_channel():
    out = rica_step1(_channel([7, 7, 7]), _params(mu=(200,)*3, sigma=(50,)*3))
    assert numpy.allclose(out, 200)

def test_step1_restores_requested_statistics(rng):
    lab = rng.uniform(0, 255, size=(16, 16, 3)).astype(numpy.float32)
    p = _params(mu=(120, 130, 125), sigma=(20, 10, 5))
    out = rica_step1(lab, p)
    for c in range(3):
        mean, std, _, _ = channel_stats(out[..., c])
        assert abs(mean - p.mu[c]) < 1e-3 and abs(std - p.sigma[c]) < 1e-3

def test_step2_worked_example():
    out = rica_step2(_channel([38.68, 100.16, 161.16]), _params(span=(100,)*3, start=(50,)*3))
    assert numpy.allclose(out[0, :, 0], [50.0, 100.196, 150.0], atol=1e-2)

def test_step2_spans_target_interval(rng):
    lab = rng.uniform(0, 255, size=(10, 10, 3)).astype(numpy.float32)
    p = _params(span=(60, 100, 30), start=(10, 120, 200))
    out = rica_step2(lab, p)
    for c in range(3):
        assert abs(out[..., c].min() - p.start[c]) < 1e-4
        assert abs(out[..., c].max() - (p.start[c] + p.span[c])) < 1e-4

def test_step2_identity_and_constant():
    ch = _channel([10, 40, 90])
    assert numpy.allclose(rica_step2(ch, _params(span=(80,)*3, start=(10,)*3)), ch, atol=1e-4)
    assert numpy.allclose(rica_step2(_channel([3, 3]), _params(span=(60,)*3, start=(90,)*3)), 120)


def test_default_ranges():
    r = RicaRanges()
    assert r.mu == {'L': (0., 255.), 'A': (0., 255.), 'B': (0., 255.)}
    assert r.sigma == {'L': (0., 100.), 'A': (0., 15.), 'B': (0., 15.)}
    assert r.span == {'L': (30., 255.), 'A': (30., 220.), 'B': (30., 220.)}
    assert r.mode == 'both'

def test_degenerate_ranges_give_exact_params():
    point = lambda v: {c: (v, v) for c in 'LAB'}
    r = RicaRanges(mu=point(100.), sigma=point(10.), span=point(255.))
    p = sample_rica_params(0, r)
    assert p.mu == (100.,)*3 and p.sigma == (10.,)*3 and p.span == (255.,)*3 and p.start == (0.,)*3

def test_sampling_is_deterministic_and_in_range():
    r = RicaRanges()
    assert sample_rica_params(42, r) == sample_rica_params(42, r)
    g = numpy.random.default_rng(5)
    for _ in range(10000):
        p = sample_rica_params(g, r)
        assert 0 <= p.sigma[1] <= 15
        assert 30 <= p.span[0] <= 255
        assert all(t + s <= 255 + 1e-9 for t, s in zip(p.start, p.span))

def test_invalid_range():
    r = RicaRanges()
    r.sigma = dict(r.sigma, A=(20., 10.))
    with pytest.raises(ValueError, match='invalid range'):
        sample_rica_params(0, r)
    with pytest.raises(ValueError, match='unknown'):
        RicaRanges.from_dict({'spread': {}})
    with pytest.raises(ValueError, match=r'unknown RICA mu channel\(s\): X'):
        RicaRanges.from_dict({'mu': {'X': [0, 1]}})
    with pytest.raises(ValueError, match='unknown RICA span channel'):
        RicaRanges.from_dict({'span': {'L': [30, 255], 'a': [30, 220]}})


def test_identity_params_round_trip(rng):
    img = rng.integers(30, 220, size=(8, 8, 3), dtype=numpy.uint8)
    lab = srgb_to_lab8(img)
    out = lab8_to_srgb(rica_lab(lab, RicaParams.identity_for(lab), RicaRanges()))
    assert numpy.abs(out.astype(int) - img).max() <= 2

def test_step2_only_mode_spans_interval(rng):
    img = rng.integers(0, 256, size=(8, 8, 3), dtype=numpy.uint8)
    ranges = RicaRanges(mode='step2')
    p = sample_rica_params(3, ranges)
    out = rica_lab(srgb_to_lab8(img), p, ranges)
    for c in range(3):
        assert abs(out[..., c].min() - p.start[c]) < 1e-4
        assert abs(out[..., c].max() - p.start[c] - p.span[c]) < 1e-4

def test_channel_subset_leaves_other_channels(rng):
    lab = rng.uniform(0, 255, size=(6, 6, 3)).astype(numpy.float32)
    ranges = RicaRanges(channels='A')
    out = rica_lab(lab, sample_rica_params(1, ranges), ranges)
    assert numpy.array_equal(out[..., 0], lab[..., 0])
    assert numpy.array_equal(out[..., 2], lab[..., 2])
    assert not numpy.allclose(out[..., 1], lab[..., 1])

def test_augment_keeps_layout(rgb_images):
    img = rgb_images[0]
    out = rica_augment(img, 9, RicaRanges())
    assert out.shape == img.shape and out.dtype == numpy.uint8
    assert numpy.array_equal(out, rica_augment(img, 9, RicaRanges()))

def test_batch_independent_of_workers(rgb_images):
    one = rica_augment_batch(rgb_images, 11, RicaRanges(), workers=1)
    many = rica_augment_batch(rgb_images, 11, RicaRanges(), workers=3)
    for (a, pa), (b, pb) in zip(one, many):
        assert numpy.array_equal(a, b) and pa == pb

def test_augment_directory(tmp_path, rgb_images):
    src = tmp_path / 'in'
    src.mkdir()
    for i, img in enumerate(rgb_images):
        write_image(str(src / ('img%d.png' % i)), img)
    manifest = augment_directory(str(src), str(tmp_path / 'out'), 5, RicaRanges(), workers=2)
    with open(manifest) as f:
        rows = list(csv.reader(f))
    assert rows[0] == MANIFEST_HEADER
    assert len(rows) == len(rgb_images) + 1
    out = read_image(str(tmp_path / 'out' / 'img0.png'))
    assert out.shape == rgb_images[0].shape
