"""Pipeline configuration.

A config is a JSON document; every key is optional and missing keys take the
field defaults of PipelineConfig. Step options are merged key by key, so

  {"mode": "rica-only", "step1": {"epochs": 5}}

changes the mode and the number of Step 1 epochs and keeps everything else.
"""

import copy
import hashlib
import json
from dataclasses import dataclass, field, replace

from ..util import wrap_in_list
from ..colorlab import RicaRanges
from ..featuregan import GeneratorConfig, DiscriminatorConfig
from ..featuregan import train as featuregan_train
from ..segtoy import SegmenterConfig, POSITIONS
from ..segtoy import train as segtoy_train

MODES = ('baseline', 'rica-only', 'gbfa-only', 'full')

step_defaults = dict(epochs=20, **segtoy_train.defaults)
step2_defaults = dict(steps=200, gbfa_uses_rica=True, **featuregan_train.defaults)


def _merge(name, base, options):
    unknown = set(options or {}) - set(base)
    if unknown:
        raise ValueError('unknown %s option(s): %s' % (name, ', '.join(sorted(unknown))))
    params = base.copy()
    params.update(options or {})
    return params


@dataclass
class PipelineConfig:
    mode: str = 'full'
    seed: int = 0
    workers: int = 1
    classes: int = 5
    image_size: int = 64
    train_images: int = 96
    test_images: int = 32
    data_seed: int = 0
    test_seed: int = 1
    rica: RicaRanges = field(default_factory=RicaRanges)
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig.tiny)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig.tiny)
    positions: list = field(default_factory=lambda: ['after_conv1'])
    step1: dict = field(default_factory=lambda: dict(step_defaults))
    step2: dict = field(default_factory=lambda: dict(step2_defaults))
    step3: dict = field(default_factory=lambda: dict(step_defaults))
    step3_reinit: bool = True
    step3_freeze_extractor: bool = True

    def validate(self, check_widths=True):
        """Check and normalise every field. With check_widths=False the
        generator and discriminator are checked on their own, not against the
        feature width at each position."""
        if self.mode not in MODES:
            raise ValueError('unknown ablation mode "%s" (expected one of %s)' % (self.mode, ', '.join(MODES)))
        if self.segmenter.classes != self.classes:
            self.segmenter = replace(self.segmenter, classes=self.classes)
        self.segmenter.validate()
        self.rica.validate()
        self.positions = wrap_in_list(self.positions, str, 'positions')
        if not self.positions:
            raise ValueError('positions must name at least one generator position')
        for p in self.positions:
            if p not in POSITIONS[1:]:
                raise ValueError('unknown generator position "%s" (expected one of %s)'
                                 % (p, ', '.join(POSITIONS[1:])))
        for n in ('train_images', 'test_images', 'image_size', 'workers'):
            if getattr(self, n) < 1:
                raise ValueError('%s must be positive, got %d' % (n, getattr(self, n)))
        self.step1 = _merge('step1', step_defaults, self.step1)
        self.step2 = _merge('step2', step2_defaults, self.step2)
        self.step3 = _merge('step3', step_defaults, self.step3)
        self.generator.validate()
        self.discriminator.validate()
        if self.uses_gbfa and check_widths:
            for p in self.positions:
                self.generator_for(p)
        return self

    @property
    def uses_rica(self):
        """RICA on the Step 1 / Step 3 training batches."""
        return self.mode in ('rica-only', 'full')

    @property
    def uses_gbfa(self):
        return self.mode in ('gbfa-only', 'full')

    def generator_for(self, position):
        """Generator and discriminator configs with their channel count set to
        the feature width at position."""
        width = self.segmenter.feature_width(position)
        return (replace(self.generator, in_channels=width).validate(),
                replace(self.discriminator, in_channels=width).validate())

    def to_dict(self):
        return dict(mode=self.mode, seed=self.seed, workers=self.workers, classes=self.classes,
                    image_size=self.image_size, train_images=self.train_images,
                    test_images=self.test_images, data_seed=self.data_seed, test_seed=self.test_seed,
                    rica=self.rica.to_dict(), segmenter=self.segmenter.to_dict(),
                    generator=self.generator.to_dict(), discriminator=self.discriminator.to_dict(),
                    positions=list(self.positions), step1=dict(self.step1), step2=dict(self.step2),
                    step3=dict(self.step3), step3_reinit=self.step3_reinit,
                    step3_freeze_extractor=self.step3_freeze_extractor)

    @classmethod
    def from_dict(cls, d, check_widths=True):
        d = copy.deepcopy(dict(d or {}))
        known = set(cls().to_dict())
        unknown = set(d) - known
        if unknown:
            raise ValueError('unknown config key(s): %s' % ', '.join(sorted(unknown)))
        sub = dict(rica=RicaRanges.from_dict, segmenter=SegmenterConfig.from_dict,
                   generator=lambda g: GeneratorConfig.from_dict(dict(GeneratorConfig.tiny().to_dict(), **g)),
                   discriminator=lambda g: DiscriminatorConfig.from_dict(
                       dict(DiscriminatorConfig.tiny().to_dict(), **g)))
        for key, parse in sub.items():
            if key in d:
                d[key] = parse(d[key])
        return cls(**d).validate(check_widths)

    def with_mode(self, mode):
        return replace(self, mode=mode).validate()


def load_config(path, check_widths=True):
    """Read a JSON config; a missing path gives the defaults."""
    if path is None:
        return PipelineConfig().validate(check_widths)
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError('%s: not valid JSON (%s)' % (path, e))
    return PipelineConfig.from_dict(d, check_widths)

def canonical_json(cfg):
    """Sorted-key JSON of everything that affects results (not the worker
    count)."""
    d = cfg.to_dict()
    del d['workers']
    return json.dumps(d, sort_keys=True, separators=(',', ':'))

def config_hash(cfg):
    """First 16 hex digits of the SHA-256 of the canonical JSON."""
    return hashlib.sha256(canonical_json(cfg).encode('utf-8')).hexdigest()[:16]
