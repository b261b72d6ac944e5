"""Feature generators and patch discriminators.

The generator is the residual CycleGAN generator without its first and last
image-space convolutions, so it maps feature maps to feature maps of the same
shape:

  d(2b) -> d(4b) -> [res(4b)] x n -> u(2b) -> u(in)

where d is a 3x3 stride-2 convolution, u a 3x3 stride-2 transposed
convolution, and every convolution is followed by instance normalisation and
ReLU. The second convolution of a residual block has no ReLU; its output is
added to the block input. The last u has no ReLU either: its normalised output
r is a residual in units of the input's own channel spread, and the generator
returns

  x + sd(x) * r

with sd the per (sample, channel) spatial standard deviation of the input x.
Instance normalisation discards the per-image channel offsets that dominate
extractor features; this path carries them, and the content, through
unchanged. At full scale (in = b = 64, n = 9) this is 11.37M parameters.

The discriminator is the 70x70 patch discriminator over feature maps,

  C64 -> C128 -> C256 -> C512 -> 1,

with 4x4 kernels, stride 2 except for the last two layers, leaky ReLU 0.2, and
instance normalisation on all but the first and last layer (2.83M parameters
at full scale with 64 input channels).
"""

from dataclasses import dataclass, asdict

import numpy

from ..ndtensor import relu, leaky_relu, pad2d, crop2d, restyle2d
from ..ndtensor import layer, conv_layer, conv_transpose_layer, instance_norm_layer, count_params

SCALES = ('full', 'tiny')


@dataclass
class GeneratorConfig:
    in_channels: int = 64
    base_width: int = 64
    n_res_blocks: int = 9
    scale: str = 'full'
    affine_norm: bool = True
    zero_init_residual: bool = True

    def validate(self):
        if self.scale not in SCALES:
            raise ValueError('unknown generator scale "%s"' % self.scale)
        if min(self.in_channels, self.base_width) < 1 or self.n_res_blocks < 0:
            raise ValueError('invalid widths: in_channels=%d base_width=%d n_res_blocks=%d'
                             % (self.in_channels, self.base_width, self.n_res_blocks))
        if self.scale == 'full' and (self.in_channels, self.base_width, self.n_res_blocks) != (64, 64, 9):
            raise ValueError('invalid widths: the full-scale generator is 64 channels with 9 residual blocks')
        if self.scale == 'tiny' and (self.base_width > 16 or self.n_res_blocks > 3):
            raise ValueError('invalid widths: a tiny generator has base_width <= 16 and at most 3 residual blocks')
        return self

    @classmethod
    def tiny(cls, in_channels=8, base_width=8, n_res_blocks=2):
        return cls(in_channels, base_width, n_res_blocks, 'tiny')

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d).validate()


@dataclass
class DiscriminatorConfig:
    in_channels: int = 64
    widths: tuple = (64, 128, 256, 512)
    scale: str = 'full'
    affine_norm: bool = True

    def validate(self):
        if self.scale not in SCALES:
            raise ValueError('unknown discriminator scale "%s"' % self.scale)
        if self.in_channels < 1 or not self.widths or min(self.widths) < 1:
            raise ValueError('invalid widths: in_channels=%d widths=%s' % (self.in_channels, tuple(self.widths)))
        if self.scale == 'full' and tuple(self.widths) != (64, 128, 256, 512):
            raise ValueError('invalid widths: the full-scale discriminator is 64-128-256-512')
        return self

    @classmethod
    def tiny(cls, in_channels=8, widths=(8, 16, 32, 64)):
        return cls(in_channels, tuple(widths), 'tiny')

    def to_dict(self):
        d = asdict(self)
        d['widths'] = list(self.widths)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if 'widths' in d:
            d['widths'] = tuple(d['widths'])
        return cls(**d).validate()


class conv_block(layer):
    """conv -> instance norm -> activation"""
    def __init__(self, conv, channels, activation=relu, affine=True, zero_gamma=False):
        layer.__init__(self)
        self.conv = self.add('conv', conv)
        self.norm = self.add('norm', instance_norm_layer(channels, affine=affine, zero_gamma=zero_gamma)) \
            if channels else None
        self.activation = activation

    def forward(self, x):
        x = self.conv(x)
        if self.norm is not None:
            x = self.norm(x)
        return x if self.activation is None else self.activation(x)

class res_block(layer):
    def __init__(self, width, rng, affine=True, zero_init=True):
        layer.__init__(self)
        self.a = self.add('a', conv_block(conv_layer(width, width, 3, rng, padding=1, init='gan'),
                                          width, affine=affine))
        self.b = self.add('b', conv_block(conv_layer(width, width, 3, rng, padding=1, init='gan'),
                                          width, activation=None, affine=affine,
                                          zero_gamma=zero_init and affine))

    def forward(self, x):
        return x + self.b(self.a(x))


class Generator(layer):
    def __init__(self, cfg, rng):
        layer.__init__(self)
        self.cfg = cfg.validate()
        c, b, aff = cfg.in_channels, cfg.base_width, cfg.affine_norm
        self.down = [
            self.add('d1', conv_block(conv_layer(c, 2*b, 3, rng, stride=2, padding=1, init='gan'), 2*b, affine=aff)),
            self.add('d2', conv_block(conv_layer(2*b, 4*b, 3, rng, stride=2, padding=1, init='gan'), 4*b, affine=aff)),
        ]
        self.res = [self.add('r%d' % (i + 1), res_block(4*b, rng, aff, cfg.zero_init_residual))
                    for i in range(cfg.n_res_blocks)]
        self.up = [
            self.add('u1', conv_block(conv_transpose_layer(4*b, 2*b, 3, rng, stride=2, padding=1,
                                                           output_padding=1, init='gan'), 2*b, affine=aff)),
            self.add('u2', conv_block(conv_transpose_layer(2*b, c, 3, rng, stride=2, padding=1,
                                                           output_padding=1, init='gan'), c, activation=None,
                                      affine=aff)),
        ]

    @property
    def in_channels(self):
        return self.cfg.in_channels

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise RuntimeError('generator expects %d feature channels, got shape %s' % (self.in_channels, x.shape))
        H, W = x.shape[2], x.shape[3]
        x0 = x
        # pad to a multiple of 4 so the two stride-2 stages invert exactly
        ph, pw = -H % 4, -W % 4
        if ph or pw:
            x = pad2d(x, (ph//2, ph - ph//2, pw//2, pw - pw//2))
        for blk in self.down + self.res + self.up:
            x = blk(x)
        if ph or pw:
            x = crop2d(x, ph//2, pw//2, H, W)
        return restyle2d(x0, x)


class PatchDiscriminator(layer):
    def __init__(self, cfg, rng):
        layer.__init__(self)
        self.cfg = cfg.validate()
        widths = list(cfg.widths)
        act = lambda x: leaky_relu(x, 0.2)
        self.blocks = []
        cin = cfg.in_channels
        for i, w in enumerate(widths):
            last = i == len(widths) - 1
            stride = 1 if last else 2
            norm = w if i > 0 else 0
            self.blocks.append(self.add('c%d' % (i + 1), conv_block(
                conv_layer(cin, w, 4, rng, stride=stride, padding=1, init='gan'),
                norm, activation=act, affine=cfg.affine_norm)))
            cin = w
        self.blocks.append(self.add('out', conv_block(conv_layer(cin, 1, 4, rng, stride=1, padding=1, init='gan'),
                                                      0, activation=None)))

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.cfg.in_channels:
            raise RuntimeError('discriminator expects %d feature channels, got shape %s'
                               % (self.cfg.in_channels, x.shape))
        for blk in self.blocks:
            x = blk(x)
        return x


def build_generator(cfg, seed=0):
    return Generator(cfg, numpy.random.default_rng(seed))

def build_discriminator(cfg, seed=0):
    return PatchDiscriminator(cfg, numpy.random.default_rng(seed))

def hallucinate(G, f):
    """Restyle feature maps with a trained generator. Shape is preserved and
    the generator is not modified."""
    if f.ndim != 4 or f.shape[1] != G.in_channels:
        raise RuntimeError('hallucinate: generator takes %d channels, features have shape %s'
                           % (G.in_channels, f.shape))
    return G(f)

__all__ = ['GeneratorConfig', 'DiscriminatorConfig', 'Generator', 'PatchDiscriminator',
           'build_generator', 'build_discriminator', 'hallucinate', 'count_params']
