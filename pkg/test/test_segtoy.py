import csv

import numpy
import pytest

from labgan.analysis import histogram_of_images, range_overlap
from labgan.colorlab import RicaRanges
from labgan.featuregan import GeneratorConfig, build_generator
from labgan.ndtensor import from_images
from labgan.segtoy import (gen_toy_dataset, load_toy_dataset, build_segmenter, SegmenterConfig, POSITIONS,
                           train_segmenter, make_batch, confusion_matrix, iou_from_confusion, mean_iou,
                           score, predict, evaluate_miou, format_report, shift_lab)


def test_generation_is_deterministic():
    a, b = gen_toy_dataset(3, seed=9, size=(32, 32)), gen_toy_dataset(3, seed=9, size=(32, 32))
    assert numpy.array_equal(a.images, b.images) and numpy.array_equal(a.labels, b.labels)
    assert not numpy.array_equal(a.images, gen_toy_dataset(3, seed=10, size=(32, 32)).images)

def test_scene_depends_on_index_only():
    big = gen_toy_dataset(4, seed=2, size=(32, 32))
    assert numpy.array_equal(big.subset(slice(0, 2)).labels, gen_toy_dataset(2, seed=2, size=(32, 32)).labels)

def test_domains_share_labels(toy):
    assert toy.source.images.shape == (12, 64, 64, 3)
    assert numpy.array_equal(toy.source.labels, toy.target.labels)
    assert not numpy.array_equal(toy.source.images, toy.target.images)
    assert toy.source.labels.max() < 5 and (toy.source.labels == 0).any()

def test_domain_shift_separates_chroma(toy):
    h_src = histogram_of_images(toy.source.images, 'A')
    h_tgt = histogram_of_images(toy.target.images, 'A')
    assert range_overlap(h_src, h_tgt) < 0.5

def test_target_shift_is_increasing_per_channel():
    assert shift_lab(numpy.array([128., 128., 128.])).tolist() == [98., 58., 138.]
    ramp = numpy.linspace(0, 255, 52)
    out = shift_lab(numpy.stack([ramp]*3, axis=-1))
    assert (numpy.diff(out, axis=0) >= 0).all()
    assert out.min() >= 0 and out.max() <= 255
    # chroma is stretched, not just moved
    assert out[-1, 1] - out[0, 1] > 200 and out[30, 2] - out[20, 2] > ramp[30] - ramp[20]

def test_invalid_arguments():
    with pytest.raises(ValueError, match='at least one'):
        gen_toy_dataset(0)
    with pytest.raises(ValueError, match='unknown domain'):
        gen_toy_dataset(1, domain='night')
    with pytest.raises(ValueError, match='classes'):
        gen_toy_dataset(1, classes=6)

def test_fewer_classes():
    data = gen_toy_dataset(4, seed=1, classes=2, size=(32, 32))
    assert data.labels.max() <= 1 and data.manifest()['classes'] == 2

def test_save_and_load(tmp_path, toy):
    data = toy.target.subset(slice(0, 3))
    loaded = load_toy_dataset(data.save(str(tmp_path / 'target')))
    assert numpy.array_equal(loaded.images, data.images)
    assert numpy.array_equal(loaded.labels, data.labels)
    assert loaded.domain == 'target-shifted' and loaded.classes == 5
    with pytest.raises(ValueError, match='manifest'):
        load_toy_dataset(str(tmp_path))


def _plugged(position):
    cfg = SegmenterConfig()
    G = build_generator(GeneratorConfig.tiny(in_channels=cfg.feature_width(position)), seed=2)
    return build_segmenter(cfg, position, G, seed=0)

@pytest.mark.parametrize('position', POSITIONS)
def test_segmenter_output_shape(toy, position):
    model = build_segmenter(SegmenterConfig()) if position == 'none' else _plugged(position)
    assert predict(model, toy.source.images[:2]).shape == (2, 64, 64)
    assert model(from_images(toy.source.images[:2])).shape == (2, 5, 64, 64)

def test_channel_mismatch():
    G = build_generator(GeneratorConfig.tiny(in_channels=8))
    with pytest.raises(ValueError, match='channel mismatch'):
        build_segmenter(SegmenterConfig(), 'after_stage1', G)
    with pytest.raises(ValueError, match='needs a generator'):
        build_segmenter(SegmenterConfig(), 'after_conv1')
    with pytest.raises(ValueError, match='unknown generator position'):
        build_segmenter(SegmenterConfig(), 'after_head', G)

def test_extractor_shares_parameters(tiny_segmenter):
    F = tiny_segmenter.extractor('after_stage1')
    names = [n for n, _ in F.named_parameters()]
    assert names[0].startswith('conv1.') and all(n.split('.')[0] in ('conv1', 'stage1') for n in names)
    own = dict(tiny_segmenter.named_parameters())
    assert all(p is own[n] for n, p in F.named_parameters())


def test_make_batch_appends_augmented_copies(toy):
    idx = numpy.array([0, 3])
    images, labels, rows = make_batch(toy.source, idx, RicaRanges(), seed=1)
    assert images.shape[0] == 4 and numpy.array_equal(images[:2], toy.source.images[idx])
    assert numpy.array_equal(labels[2:], toy.source.labels[idx])
    assert [r[0] for r in rows] == ['0', '3']
    images, labels, rows = make_batch(toy.source, idx, None, seed=1)
    assert images.shape[0] == 2 and rows == []

def test_training_leaves_generator_frozen(toy, tmp_path):
    model = _plugged('after_conv1')
    G_before = model.G.state_dict()
    conv_before = model.state_dict()['conv1.conv.weight']
    data = toy.source.subset(slice(0, 4))
    _, history = train_segmenter(model, data, RicaRanges(), epochs=1, seed=0, batch_size=2, show=0,
                                 log_path=str(tmp_path / 'log.csv'), manifest_path=str(tmp_path / 'm.csv'))
    assert len(history) == 2 and all(numpy.isfinite(r['cross_entropy']) for r in history)
    assert all(numpy.array_equal(G_before[k], v) for k, v in model.G.state_dict().items())
    assert not numpy.array_equal(conv_before, model.state_dict()['conv1.conv.weight'])
    with open(tmp_path / 'm.csv') as f:
        assert len(list(csv.reader(f))) == 1 + 4

def test_training_is_deterministic(toy):
    data = toy.source.subset(slice(0, 4))
    runs = []
    for _ in range(2):
        model = build_segmenter(SegmenterConfig(), seed=1)
        _, history = train_segmenter(model, data, epochs=1, seed=4, batch_size=2, show=0)
        runs.append((history, model.state_dict()))
    assert runs[0][0] == runs[1][0]
    assert all(numpy.array_equal(runs[0][1][k], runs[1][1][k]) for k in runs[0][1])

def test_unknown_training_option(toy, tiny_segmenter):
    with pytest.raises(ValueError, match='unknown segmenter option'):
        train_segmenter(tiny_segmenter, toy.source, epochs=1, nesterov=True, show=0)


def test_miou_all_background_prediction():
    label = numpy.zeros((4, 4), dtype=numpy.uint8)
    label[:1] = 1
    ious, miou = score(numpy.zeros_like(label), label, 2)
    assert ious == [0.75, 0.0] and miou == 0.375

def test_confusion_rows_are_ground_truth():
    cm = confusion_matrix([0, 0, 1], [1, 1, 1], 2)
    assert cm.tolist() == [[0, 0], [2, 1]]

def test_miou_invariant_under_pixel_permutation(rng):
    pred, label = rng.integers(0, 4, size=200), rng.integers(0, 4, size=200)
    perm = rng.permutation(200)
    assert score(pred, label, 4)[1] == score(pred[perm], label[perm], 4)[1]

def test_absent_classes_are_skipped():
    ious = iou_from_confusion(confusion_matrix([0, 1], [0, 1], 3))
    assert numpy.isnan(ious[2]) and mean_iou(ious) == 1.0
    with pytest.raises(ValueError, match='no class present'):
        mean_iou([numpy.nan, numpy.nan])

def test_ignored_pixels():
    cm = confusion_matrix([0, 1, 1], [0, 255, 1], 2)
    assert cm.sum() == 2

def test_evaluate_is_independent_of_workers(toy, tiny_segmenter):
    a = evaluate_miou(tiny_segmenter, toy.target, batch_size=5, workers=1)
    b = evaluate_miou(tiny_segmenter, toy.target, batch_size=5, workers=3)
    assert a[1] == b[1]
    assert numpy.allclose(a[0], b[0], equal_nan=True)

def test_format_report():
    lines = format_report([0.5, float('nan')], 0.5).splitlines()
    assert lines == ['class,iou', '0,0.500000', '1,nan', 'miou,0.500000']

def test_square_size_from_scalar():
    assert gen_toy_dataset(1, size=32).size == (32, 32)
    with pytest.raises(ValueError, match='two extents'):
        gen_toy_dataset(1, size=(32, 32, 3))
    with pytest.raises(TypeError):
        gen_toy_dataset(1, size='32')


@pytest.mark.slow
def test_segmenter_fits_its_training_split():
    data = gen_toy_dataset(96, seed=0, size=(64, 64))
    model = build_segmenter(SegmenterConfig(), seed=0)
    train_segmenter(model, data, None, epochs=20, seed=0, show=0)
    _, miou = evaluate_miou(model, data)
    assert miou >= 0.90
