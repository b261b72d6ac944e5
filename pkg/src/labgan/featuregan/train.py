"""Step 2: train the feature GAN against a frozen extractor.

Every batch draws raw source images and augments them twice with
independently sampled RICA parameters, giving two batches with the same
content and different styles. Their features f_A = F(A), f_B = F(B) are the
two domains of a CycleGAN operating in feature space, with the KL divergence
between channel distributions as cycle loss.
"""

import csv
import io
import os
from time import time

import numpy

from ..log import info, report, plot_curve
from ..util import derive_seed, rng_for, atomic_write
from ..colorlab import rica_augment_batch
from ..ndtensor import from_images, no_grad, backward
from ..nnlosses import kl_cycle_loss, lsgan_d_loss, lsgan_g_loss, check_finite
from ..optim import Adam
from .networks import GeneratorConfig, DiscriminatorConfig, build_generator, build_discriminator

LOSS_HEADER = ['step', 'loss_d_a', 'loss_d_b', 'loss_g_adv', 'loss_cyc']

defaults = dict(batch_size=4, lr=2e-4, g_lr_mult=5.0, beta1=0.5, beta2=0.999, lambda_cyc=10.0)


class FeatureGanBundle(object):
    """The two generators and two discriminators of the feature GAN, their
    optimizers, and the number of steps taken so far. The generators step at
    lr * g_lr_mult, the discriminators at lr."""

    def __init__(self, gen_cfg, disc_cfg, seed=0, lr=2e-4, g_lr_mult=5.0, beta1=0.5, beta2=0.999):
        self.gen_cfg, self.disc_cfg = gen_cfg.validate(), disc_cfg.validate()
        if gen_cfg.in_channels != disc_cfg.in_channels:
            raise ValueError('generator takes %d channels but discriminator %d'
                             % (gen_cfg.in_channels, disc_cfg.in_channels))
        self.seed = seed
        self.optim = dict(lr=lr, g_lr_mult=g_lr_mult, beta1=beta1, beta2=beta2)
        self.G_AB = build_generator(gen_cfg, derive_seed(seed, 0))
        self.G_BA = build_generator(gen_cfg, derive_seed(seed, 1))
        self.D_A = build_discriminator(disc_cfg, derive_seed(seed, 2))
        self.D_B = build_discriminator(disc_cfg, derive_seed(seed, 3))
        self.opt_G = Adam([(self.G_AB.parameters() + self.G_BA.parameters(), g_lr_mult)],
                          lr=lr, beta1=beta1, beta2=beta2)
        self.opt_D = Adam(self.D_A.parameters() + self.D_B.parameters(), lr=lr, beta1=beta1, beta2=beta2)
        self.step = 0

    def networks(self):
        return [('G_AB', self.G_AB), ('G_BA', self.G_BA), ('D_A', self.D_A), ('D_B', self.D_B)]

    def state_dict(self):
        out = {}
        for name, net in self.networks():
            for key, arr in net.state_dict().items():
                out['%s.%s' % (name, key)] = arr
        for name, opt in (('opt_G', self.opt_G), ('opt_D', self.opt_D)):
            for key, arr in opt.state_dict().items():
                out['%s.%s' % (name, key)] = arr
        return out

    def load_state_dict(self, state):
        def part(prefix):
            n = len(prefix) + 1
            return {k[n:]: v for k, v in state.items() if k.startswith(prefix + '.')}
        for name, net in self.networks():
            net.load_state_dict(part(name))
        self.opt_G.load_state_dict(part('opt_G'))
        self.opt_D.load_state_dict(part('opt_D'))
        self.step = self.opt_G.t

    def metadata(self):
        return dict(kind='featuregan', seed=self.seed, step=self.step, optim=self.optim,
                    generator=self.gen_cfg.to_dict(), discriminator=self.disc_cfg.to_dict())

    @classmethod
    def from_checkpoint(cls, arrays, metadata):
        if metadata.get('kind') != 'featuregan':
            raise ValueError('not a feature GAN checkpoint (kind %r)' % metadata.get('kind'))
        bundle = cls(GeneratorConfig.from_dict(metadata['generator']),
                     DiscriminatorConfig.from_dict(metadata['discriminator']), seed=metadata['seed'],
                     **metadata.get('optim', {}))
        bundle.load_state_dict(arrays)
        return bundle


def format_losses(history):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(LOSS_HEADER)
    for row in history:
        writer.writerow([row['step']] + ['%.6e' % row[k] for k in LOSS_HEADER[1:]])
    return buf.getvalue()


def _style_pair(images, idx, ranges, seed, step, workers, augment_both=True):
    raw = [images[i] for i in idx]
    if not augment_both:
        b = rica_augment_batch(raw, derive_seed(seed, step, 2), ranges, workers=workers)
        return numpy.stack(raw), numpy.stack([img for img, _ in b])
    a = rica_augment_batch(raw, derive_seed(seed, step, 1), ranges, workers=workers)
    b = rica_augment_batch(raw, derive_seed(seed, step, 2), ranges, workers=workers)
    return (numpy.stack([img for img, _ in a]), numpy.stack([img for img, _ in b]))

def _batches(n, batch_size, seed):
    """Endless sequence of index batches, reshuffled each pass."""
    epoch = 0
    while True:
        perm = rng_for(seed, 0xBA7C, epoch).permutation(n)
        for k in range(0, n, batch_size):
            yield epoch, perm[k:k + batch_size]
        epoch += 1


def train_featuregan(extractor, images, rica, gen_cfg, disc_cfg, epochs=1, seed=0, steps=None,
                     bundle=None, log_path=None, augment_both=True, workers=1, show=1, **options):
    """Train a FeatureGanBundle on the features extractor(images).

    extractor is the frozen first block of a segmenter; it maps an image
    tensor to feature maps and is never modified. The run lasts `steps`
    updates if given, otherwise `epochs` passes over the images. Options are
    those of `defaults`. The per-step losses are returned together with the
    bundle and written to log_path (CSV) if given. With augment_both=False the
    A batch is the raw images and only B is augmented."""
    unknown = set(options) - set(defaults)
    if unknown:
        raise ValueError('unknown featuregan option(s) %s' % ', '.join(sorted(unknown)))
    params = defaults.copy()
    params.update(options)
    if not extractor.frozen:
        raise RuntimeError('train_featuregan needs a frozen feature extractor')
    if len(images) < 1:
        raise ValueError('empty dataset')

    if bundle is None:
        bundle = FeatureGanBundle(gen_cfg, disc_cfg, seed=seed, lr=params['lr'],
                                  g_lr_mult=params['g_lr_mult'], beta1=params['beta1'], beta2=params['beta2'])
    bs = min(params['batch_size'], len(images))
    per_epoch = -(-len(images)//bs)
    total = steps if steps is not None else epochs*per_epoch
    lam = params['lambda_cyc']
    G_AB, G_BA, D_A, D_B = bundle.G_AB, bundle.G_BA, bundle.D_A, bundle.D_B

    history = []
    T = time()
    batches = _batches(len(images), bs, seed)
    for _ in range(bundle.step):
        next(batches)
    while bundle.step < total:
        step = bundle.step
        epoch, idx = next(batches)
        style_a, style_b = _style_pair(images, idx, rica, seed, step, workers, augment_both)
        with no_grad():
            f_A = extractor(from_images(style_a))
            f_B = extractor(from_images(style_b))

        # generators
        fake_B, fake_A = G_AB(f_A), G_BA(f_B)
        loss_g_adv = lsgan_g_loss(D_B(fake_B)) + lsgan_g_loss(D_A(fake_A))
        cyc_a = kl_cycle_loss(G_BA(fake_B), f_A)
        cyc_b = kl_cycle_loss(G_AB(fake_A), f_B)
        loss_cyc = cyc_a + cyc_b
        check_finite(dict(loss_g_adv=loss_g_adv, loss_cyc=loss_cyc), step)
        bundle.opt_G.zero_grad()
        bundle.opt_D.zero_grad()
        backward(loss_g_adv + loss_cyc*lam)
        bundle.opt_G.step()

        # discriminators, on detached fakes
        bundle.opt_D.zero_grad()
        loss_d_a = lsgan_d_loss(D_A(f_A), D_A(fake_A.detach()))
        loss_d_b = lsgan_d_loss(D_B(f_B), D_B(fake_B.detach()))
        check_finite(dict(loss_d_a=loss_d_a, loss_d_b=loss_d_b), step)
        backward(loss_d_a + loss_d_b)
        bundle.opt_D.step()

        bundle.step += 1
        row = dict(step=step, epoch=epoch, loss_d_a=loss_d_a.item(), loss_d_b=loss_d_b.item(),
                   loss_g_adv=loss_g_adv.item(), loss_cyc=loss_cyc.item(),
                   loss_cyc_a=cyc_a.item(), loss_cyc_b=cyc_b.item())
        history.append(row)
        if show >= 2:
            info('FeatureGAN step %d: d_a=%.3e d_b=%.3e g_adv=%.3e cyc=%.3e', step,
                  row['loss_d_a'], row['loss_d_b'], row['loss_g_adv'], row['loss_cyc'])
        if bundle.step % per_epoch == 0 or bundle.step == total:
            report('FeatureGAN', 'epoch %3d' % epoch, bundle.step, time() - T, row['loss_cyc'], show)

    if log_path is not None:
        atomic_write(log_path, format_losses(history).encode())
        plot_curve({k: [r[k] for r in history] for k in LOSS_HEADER[1:]}, 'FeatureGAN losses',
                   os.path.splitext(os.fspath(log_path))[0] + '.png', show)
    return bundle, history
