"""Random image colour augmentation (RICA) in the 8-bit-scaled CIELAB
encoding.

Step 1 re-randomises the statistics of each channel,

  M = sigma_M * (R - mean(R)) / max(std(R), EPS) + mu_M,   clipped to [0, 255],

and step 2 maps each channel linearly onto a random interval [T, T+S],

  N = (M - min M) / (max M - min M) * S + T.

A constant channel has no range to map, and lands on the midpoint T + S/2.
"""

from dataclasses import dataclass, field, asdict

import numpy

from .convert import CHANNELS, check_lab, srgb_to_lab8, lab8_to_srgb

EPS = 1e-6

MODES = ('step1', 'step2', 'both')


def _default(l, a_b):
    return lambda: {'L': l, 'A': a_b, 'B': a_b}

@dataclass
class RicaRanges:
    """Sampling intervals for the RICA parameters, per channel. The defaults
    are the ranges used for the full-size experiments."""
    mu: dict = field(default_factory=_default((0., 255.), (0., 255.)))
    sigma: dict = field(default_factory=_default((0., 100.), (0., 15.)))
    span: dict = field(default_factory=_default((30., 255.), (30., 220.)))
    mode: str = 'both'
    channels: str = CHANNELS

    def validate(self):
        if self.mode not in MODES:
            raise ValueError('unknown RICA mode "%s" (expected one of %s)' % (self.mode, ', '.join(MODES)))
        if not self.channels or any(c not in CHANNELS for c in self.channels):
            raise ValueError('invalid channel selection "%s"' % self.channels)
        for name, lo_bound, hi_bound in [('mu', 0, 255), ('sigma', 0, numpy.inf), ('span', 0, 255)]:
            table = getattr(self, name)
            extra = set(table) - set(CHANNELS)
            if extra:
                raise ValueError('unknown RICA %s channel(s): %s (expected L, A or B)'
                                 % (name, ', '.join(sorted(extra))))
            for c in CHANNELS:
                try:
                    lo, hi = (float(v) for v in table[c])
                except (KeyError, TypeError, ValueError):
                    raise ValueError('invalid range: %s[%s] missing or malformed' % (name, c))
                if not (lo_bound <= lo <= hi <= hi_bound):
                    raise ValueError('invalid range: %s[%s] = [%g, %g]' % (name, c, lo, hi))
                if name == 'span' and lo <= 0:
                    raise ValueError('invalid range: span[%s] must be positive' % c)
        return self

    @property
    def use_step1(self):
        return self.mode in ('step1', 'both')

    @property
    def use_step2(self):
        return self.mode in ('step2', 'both')

    def to_dict(self):
        d = asdict(self)
        for name in ('mu', 'sigma', 'span'):
            d[name] = {c: list(v) for c, v in d[name].items()}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        unknown = set(d) - {'mu', 'sigma', 'span', 'mode', 'channels'}
        if unknown:
            raise ValueError('unknown RICA range key(s): %s' % ', '.join(sorted(unknown)))
        ranges = cls()
        for name in ('mu', 'sigma', 'span'):
            if name in d:
                table = dict(getattr(ranges, name))
                table.update({c: tuple(v) for c, v in d[name].items()})
                setattr(ranges, name, table)
        if 'mode' in d:
            ranges.mode = d['mode']
        if 'channels' in d:
            ranges.channels = d['channels']
        return ranges.validate()


@dataclass
class RicaParams:
    """One draw of RICA parameters: per-channel target mean/std (step 1) and
    target interval span/start (step 2), in encoded units, ordered L, A, B."""
    mu: tuple
    sigma: tuple
    span: tuple
    start: tuple

    def validate(self):
        for c in range(3):
            mu, sigma, span, start = self.mu[c], self.sigma[c], self.span[c], self.start[c]
            if not (0 <= mu <= 255 and sigma >= 0 and 0 < span <= 255 and 0 <= start <= 255 - span + 1e-9):
                raise ValueError('invalid RICA parameters for channel %s: mu=%g sigma=%g S=%g T=%g'
                                 % (CHANNELS[c], mu, sigma, span, start))
        return self

    def row(self):
        """Flattened (mu, sigma, S, T) per channel, in manifest column order."""
        return [v for c in range(3) for v in (self.mu[c], self.sigma[c], self.span[c], self.start[c])]

    @classmethod
    def identity_for(cls, lab):
        """Parameters that leave an in-range LAB image unchanged."""
        stats = [channel_stats(lab[..., c].ravel()) for c in range(3)]
        return cls(mu=tuple(s[0] for s in stats), sigma=tuple(s[1] for s in stats),
                   span=tuple(max(s[3] - s[2], EPS) for s in stats), start=tuple(s[2] for s in stats))


def channel_stats(channel):
    """Return (mean, std, min, max) of a channel, with the population standard
    deviation, computed in double precision."""
    x = numpy.asarray(channel, dtype=numpy.float64).ravel()
    if x.size == 0:
        raise ValueError('empty channel')
    mean = x.mean()
    return mean, numpy.sqrt(numpy.mean((x - mean)**2)), x.min(), x.max()

def _selected(channels):
    return [CHANNELS.index(c) for c in channels]

def rica_step1(img, params, channels=CHANNELS):
    """Randomise the mean and standard deviation of each selected channel."""
    img = check_lab(img)
    out = numpy.array(img, dtype=numpy.float64)
    for c in _selected(channels):
        mean, std, _, _ = channel_stats(out[..., c])
        m = params.sigma[c]*(out[..., c] - mean)/max(std, EPS) + params.mu[c]
        out[..., c] = numpy.clip(m, 0, 255)
    return out.astype(numpy.float32)

def rica_step2(img, params, channels=CHANNELS):
    """Map each selected channel linearly onto [T, T+S]."""
    img = check_lab(img)
    out = numpy.array(img, dtype=numpy.float64)
    for c in _selected(channels):
        _, _, lo, hi = channel_stats(out[..., c])
        if hi == lo:
            out[..., c] = params.start[c] + params.span[c]/2
        else:
            out[..., c] = (out[..., c] - lo)/(hi - lo)*params.span[c] + params.start[c]
    return out.astype(numpy.float32)

def sample_rica_params(rng, ranges):
    """Draw one parameter set. T is uniform on [0, 255-S], which keeps the
    target interval inside the encodable range. rng is a numpy Generator or an
    integer seed."""
    if not isinstance(rng, numpy.random.Generator):
        rng = numpy.random.default_rng(rng)
    ranges.validate()
    mu, sigma, span, start = [], [], [], []
    for c in CHANNELS:
        mu.append(rng.uniform(*ranges.mu[c]))
        sigma.append(rng.uniform(*ranges.sigma[c]))
        s = rng.uniform(*ranges.span[c])
        span.append(s)
        start.append(rng.uniform(0, 255 - s))
    return RicaParams(tuple(mu), tuple(sigma), tuple(span), tuple(start))

def rica_lab(lab, params, ranges):
    """Apply the steps enabled by ranges.mode to a LAB image."""
    if ranges.use_step1:
        lab = rica_step1(lab, params, ranges.channels)
    if ranges.use_step2:
        lab = rica_step2(lab, params, ranges.channels)
    return lab

def rica_augment(img, rng, ranges, return_params=False):
    """Augment an sRGB image with freshly sampled RICA parameters. The pixel
    layout is untouched; only colours change."""
    params = sample_rica_params(rng, ranges)
    out = lab8_to_srgb(rica_lab(srgb_to_lab8(img), params, ranges))
    if return_params:
        return out, params
    return out
