"""A small fully-convolutional segmenter whose first convolution F is the
feature extractor of the feature GAN.

  F (conv3x3 + ReLU) -> stage1 (stride 2) -> stage2 -> ... -> 1x1 head -> bilinear x2

A frozen feature generator can be plugged in after F or after one of the
first two stages; it then runs in every forward pass, training and inference
alike.
"""

from dataclasses import dataclass, asdict

import numpy

from ..ndtensor import layer, conv_layer, upsample_bilinear
from ..featuregan.networks import conv_block, hallucinate

POSITIONS = ('none', 'after_conv1', 'after_stage1', 'after_stage2')


@dataclass
class SegmenterConfig:
    in_channels: int = 3
    width: int = 8
    stage_widths: tuple = (16, 32, 32)
    classes: int = 5

    def validate(self):
        if not 3 <= len(self.stage_widths) <= 5:
            raise ValueError('the segmenter body has 3 to 5 stages, got %d' % len(self.stage_widths))
        if min((self.in_channels, self.width) + tuple(self.stage_widths)) < 1:
            raise ValueError('invalid widths: %s' % (self,))
        if self.classes < 2:
            raise ValueError('need at least two classes, got %d' % self.classes)
        return self

    def feature_width(self, position):
        """Channel count of the features at a generator position."""
        if position == 'after_conv1':
            return self.width
        if position == 'after_stage1':
            return self.stage_widths[0]
        if position == 'after_stage2':
            return self.stage_widths[1]
        raise ValueError('unknown generator position "%s" (expected one of %s)'
                         % (position, ', '.join(POSITIONS[1:])))

    def to_dict(self):
        d = asdict(self)
        d['stage_widths'] = list(self.stage_widths)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if 'stage_widths' in d:
            d['stage_widths'] = tuple(d['stage_widths'])
        return cls(**d).validate()


class feature_extractor(layer):
    """The blocks of a segmenter up to a generator position. Shares its
    parameters with the segmenter."""
    def __init__(self, blocks, out_channels):
        layer.__init__(self)
        self.blocks = [self.add(name, blk) for name, blk in blocks]
        self.out_channels = out_channels

    def forward(self, x):
        for blk in self.blocks:
            x = blk(x)
        return x


class Segmenter(layer):
    def __init__(self, cfg, rng, position='none', G=None):
        layer.__init__(self)
        self.cfg = cfg.validate()
        if position not in POSITIONS:
            raise ValueError('unknown generator position "%s" (expected one of %s)'
                             % (position, ', '.join(POSITIONS)))
        self.blocks = [('conv1', self.add('conv1', conv_block(
            conv_layer(cfg.in_channels, cfg.width, 3, rng, padding=1, init='he'), 0)))]
        cin = cfg.width
        for i, w in enumerate(cfg.stage_widths):
            name = 'stage%d' % (i + 1)
            stride = 2 if i == 0 else 1
            self.blocks.append((name, self.add(name, conv_block(
                conv_layer(cin, w, 3, rng, stride=stride, padding=1, init='he'), w))))
            cin = w
        self.head = self.add('head', conv_layer(cin, cfg.classes, 1, rng, init='he'))

        self.position = position
        self.G = None
        if position != 'none':
            self.plug(G, position)
        elif G is not None:
            raise ValueError('a generator was given but the position is "none"')

    def plug(self, G, position):
        """Insert the frozen generator G after position."""
        if G is None:
            raise ValueError('position %s needs a generator' % position)
        width = self.cfg.feature_width(position)
        if G.in_channels != width:
            raise ValueError('channel mismatch: generator takes %d channels, features %s have %d'
                             % (G.in_channels, position, width))
        self.G = self.add('G', G.freeze())
        self.position = position
        return self

    def _plug_index(self, position):
        return {'after_conv1': 0, 'after_stage1': 1, 'after_stage2': 2}[position]

    def extractor(self, position='after_conv1'):
        """The prefix of the network that produces the features at position."""
        width = self.cfg.feature_width(position)
        return feature_extractor(self.blocks[:self._plug_index(position) + 1], width)

    def backbone_parameters(self):
        return [p for name, blk in self.blocks for p in blk.parameters()]

    def head_parameters(self):
        return self.head.parameters()

    def forward(self, x):
        H, W = x.shape[2], x.shape[3]
        at = self._plug_index(self.position) if self.G is not None else None
        for i, (_, blk) in enumerate(self.blocks):
            x = blk(x)
            if i == at:
                x = hallucinate(self.G, x)
        logits = self.head(x)
        if logits.shape[2:] != (H, W):
            logits = upsample_bilinear(logits, (H, W))
        return logits


def build_segmenter(cfg, position='none', G=None, seed=0):
    return Segmenter(cfg, numpy.random.default_rng(seed), position, G)
