import numpy
import pytest

from labgan.ndtensor import tensor, count_params, from_images, no_grad
from labgan.nnlosses import kl_cycle_loss
from labgan.featuregan import (GeneratorConfig, DiscriminatorConfig, build_generator, build_discriminator,
                               hallucinate, train_featuregan, FeatureGanBundle, LOSS_HEADER)
from labgan.harness import encode_checkpoint, decode_checkpoint
from labgan.segtoy import gen_toy_dataset, build_segmenter, SegmenterConfig
from labgan.colorlab import RicaRanges
from labgan.util import derive_seed


@pytest.fixture(scope='module')
def small():
    data = gen_toy_dataset(6, seed=11, size=(32, 32))
    extractor = build_segmenter(SegmenterConfig(), seed=5).extractor('after_conv1').freeze()
    return data, extractor

def _run(small, **kwargs):
    data, extractor = small
    kwargs.setdefault('steps', 2)
    return train_featuregan(extractor, list(data.images), RicaRanges(), GeneratorConfig.tiny(),
                            DiscriminatorConfig.tiny(), seed=3, batch_size=2, show=0, **kwargs)

def _same_state(a, b):
    sa, sb = a.state_dict(), b.state_dict()
    return sa.keys() == sb.keys() and all(numpy.array_equal(sa[k], sb[k]) for k in sa)


def test_full_scale_parameter_counts():
    g = count_params(build_generator(GeneratorConfig()))
    d = count_params(build_discriminator(DiscriminatorConfig()))
    assert abs(g - 11.37e6) < 0.01*11.37e6 and g == 11369664
    assert abs(d - 2.83e6) < 0.01*2.83e6 and d == 2828993

def test_tiny_parameter_counts():
    assert count_params(build_generator(GeneratorConfig.tiny())) == 48984
    assert count_params(build_discriminator(DiscriminatorConfig.tiny())) == 45401

def test_invalid_widths():
    with pytest.raises(ValueError, match='invalid widths'):
        GeneratorConfig(in_channels=32).validate()
    with pytest.raises(ValueError, match='invalid widths'):
        GeneratorConfig.tiny(base_width=32).validate()
    with pytest.raises(ValueError, match='invalid widths'):
        DiscriminatorConfig(widths=(8, 16)).validate()
    with pytest.raises(ValueError, match='scale'):
        GeneratorConfig(scale='medium').validate()

def test_config_round_trip():
    cfg = DiscriminatorConfig.tiny(in_channels=16)
    assert DiscriminatorConfig.from_dict(cfg.to_dict()) == cfg
    assert GeneratorConfig.from_dict(GeneratorConfig.tiny().to_dict()) == GeneratorConfig.tiny()


@pytest.mark.parametrize('shape', [(2, 8, 16, 16), (1, 8, 13, 17), (1, 8, 5, 3)])
def test_generator_preserves_shape(rng, shape):
    G = build_generator(GeneratorConfig.tiny(), seed=1)
    assert G(tensor(rng.normal(size=shape))).shape == shape

def test_discriminator_patch_output(rng):
    D = build_discriminator(DiscriminatorConfig.tiny(), seed=1)
    assert D(tensor(rng.normal(size=(2, 8, 32, 32)))).shape == (2, 1, 2, 2)

def test_zero_initialised_residuals_start_near_identity(rng):
    cfg = GeneratorConfig.tiny()
    G = build_generator(cfg, seed=1)
    x = tensor(rng.normal(size=(1, 8, 8, 8)))
    block = G.res[0]
    h = G.down[1](G.down[0](x))
    assert numpy.array_equal(block(h).data, h.data)

def test_hallucinate_checks_channels(rng):
    G = build_generator(GeneratorConfig.tiny(), seed=1)
    with pytest.raises(RuntimeError, match='hallucinate'):
        hallucinate(G, tensor(rng.normal(size=(1, 4, 8, 8))))
    f = tensor(rng.normal(size=(1, 8, 8, 8)))
    before = G.state_dict()
    out = hallucinate(G, f)
    assert out.shape == f.shape
    assert all(numpy.array_equal(before[k], v) for k, v in G.state_dict().items())


def test_zero_steps_return_the_initialisation(small):
    bundle, history = _run(small, steps=0)
    assert history == [] and bundle.step == 0
    fresh = build_generator(GeneratorConfig.tiny(), derive_seed(3, 0))
    assert _same_state(bundle.G_AB, fresh)

def test_extractor_is_untouched(small):
    before = small[1].state_dict()
    _run(small)
    after = small[1].state_dict()
    assert all(numpy.array_equal(before[k], after[k]) for k in before)

def test_needs_frozen_extractor(small):
    data, _ = small
    extractor = build_segmenter(SegmenterConfig(), seed=5).extractor('after_conv1')
    with pytest.raises(RuntimeError, match='frozen'):
        train_featuregan(extractor, list(data.images), RicaRanges(), GeneratorConfig.tiny(),
                         DiscriminatorConfig.tiny(), steps=1, show=0)

def test_empty_dataset_and_unknown_option(small):
    with pytest.raises(ValueError, match='empty dataset'):
        train_featuregan(small[1], [], RicaRanges(), GeneratorConfig.tiny(), DiscriminatorConfig.tiny(), show=0)
    with pytest.raises(ValueError, match='unknown featuregan option'):
        _run(small, lambda_identity=1.0)

def test_history_and_log(small, tmp_path):
    log = tmp_path / 'losses.csv'
    bundle, history = _run(small, log_path=str(log))
    assert [r['step'] for r in history] == [0, 1]
    for row in history:
        assert all(numpy.isfinite(row[k]) for k in LOSS_HEADER[1:])
        assert abs(row['loss_cyc'] - row['loss_cyc_a'] - row['loss_cyc_b']) < 1e-5
    lines = log.read_text().splitlines()
    assert lines[0] == ','.join(LOSS_HEADER) and len(lines) == 3
    assert bundle.metadata()['step'] == 2

def test_training_is_deterministic(small):
    a, ha = _run(small)
    b, hb = _run(small)
    assert ha == hb
    assert _same_state(a, b)

def test_resume_from_checkpoint_is_bit_identical(small):
    straight, _ = _run(small, steps=4)
    half, _ = _run(small, steps=2)
    restored = FeatureGanBundle.from_checkpoint(*decode_checkpoint(
        encode_checkpoint(half.state_dict(), half.metadata())))
    assert restored.step == 2
    resumed, history = _run(small, steps=4, bundle=restored)
    assert [r['step'] for r in history] == [2, 3]
    assert _same_state(straight, resumed)

def test_non_finite_generator_loss_stops_before_any_update(small, monkeypatch):
    from labgan.featuregan import train as featuregan_train
    from labgan.nnlosses import NonFiniteLoss
    kl = featuregan_train.kl_cycle_loss
    monkeypatch.setattr(featuregan_train, 'kl_cycle_loss', lambda c, o: kl(c, o) + float('nan'))
    bundle = FeatureGanBundle(GeneratorConfig.tiny(), DiscriminatorConfig.tiny(), seed=3)
    before = {k: v.copy() for k, v in bundle.state_dict().items()}
    with pytest.raises(NonFiniteLoss, match='loss_cyc .* at step 0'):
        _run(small, bundle=bundle)
    after = bundle.state_dict()
    assert all(numpy.array_equal(before[k], after[k]) for k in before)
    assert bundle.step == 0

def test_generators_step_faster_than_discriminators():
    bundle = FeatureGanBundle(GeneratorConfig.tiny(), DiscriminatorConfig.tiny(), lr=1e-4, g_lr_mult=3.0)
    assert bundle.opt_G.groups[0][1] == 3.0 and bundle.opt_G.base_lr == 1e-4
    assert bundle.opt_D.groups[0][1] == 1.0
    restored = FeatureGanBundle.from_checkpoint(bundle.state_dict(), bundle.metadata())
    assert restored.optim == bundle.optim

def test_from_checkpoint_checks_kind():
    with pytest.raises(ValueError, match='not a feature GAN'):
        FeatureGanBundle.from_checkpoint({}, dict(kind='segmenter'))


@pytest.fixture(scope='module')
def trained():
    data = gen_toy_dataset(32, seed=0, size=(32, 32))
    extractor = build_segmenter(SegmenterConfig(), seed=0).extractor('after_conv1').freeze()
    bundle, history = train_featuregan(extractor, list(data.images), RicaRanges(), GeneratorConfig.tiny(),
                                       DiscriminatorConfig.tiny(), seed=0, steps=200, show=0)
    return data, extractor, bundle, history

@pytest.mark.slow
def test_cycle_loss_falls(trained):
    cyc = [r['loss_cyc'] for r in trained[3]]
    assert numpy.mean(cyc[-10:]) <= 0.5*numpy.mean(cyc[:10])

@pytest.mark.slow
@pytest.mark.parametrize('key', ['loss_d_a', 'loss_d_b'])
def test_discriminators_settle(trained, key):
    history = trained[3]
    last = [r[key] for r in history if r['epoch'] == history[-1]['epoch']]
    assert len(last) == 8
    assert sum(abs(v - 0.25) <= 0.2 for v in last) >= 0.8*len(last)

@pytest.mark.slow
def test_round_trip_stays_closer_than_another_image(trained):
    data, extractor, bundle, _ = trained
    with no_grad():
        f = extractor(from_images(data.images[:8]))
        cycled = hallucinate(bundle.G_BA, hallucinate(bundle.G_AB, f))
        other = extractor(from_images(numpy.roll(data.images[:8], 1, axis=0)))
    assert kl_cycle_loss(cycled, f).item() < kl_cycle_loss(other, f).item()
