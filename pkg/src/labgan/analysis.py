"""Channel distributions of image sets in the 8-bit LAB encoding, and the
overlap of two such distributions (histogram intersection)."""

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy

from .log import info
from .util import atomic_write
from .colorlab import CHANNELS, srgb_to_lab8, list_images, read_image

BINS = 64
MAX_PLOTTED = 4


@dataclass
class ChannelHistogram:
    channel: str
    edges: numpy.ndarray
    counts: numpy.ndarray
    n_images: int
    min: float
    max: float

    @property
    def n_pixels(self):
        return int(self.counts.sum())

    def normalized(self):
        return self.counts/max(self.n_pixels, 1)

    def __add__(self, other):
        _check_binning(self, other)
        return ChannelHistogram(self.channel, self.edges, self.counts + other.counts,
                                self.n_images + other.n_images,
                                min(self.min, other.min), max(self.max, other.max))


def _channel_index(channel):
    if channel not in CHANNELS or len(channel) != 1:
        raise ValueError('unknown channel "%s" (expected one of L, A, B)' % channel)
    return CHANNELS.index(channel)

def _check_binning(h1, h2):
    if h1.channel != h2.channel or h1.edges.shape != h2.edges.shape or not numpy.array_equal(h1.edges, h2.edges):
        raise ValueError('binning mismatch: %s/%d bins vs %s/%d bins'
                         % (h1.channel, len(h1.counts), h2.channel, len(h2.counts)))

def edges_for(bins=BINS):
    return numpy.linspace(0.0, 255.0, bins + 1)

def histogram_of_image(img, channel, bins=BINS):
    values = srgb_to_lab8(img)[..., _channel_index(channel)].ravel()
    edges = edges_for(bins)
    counts, _ = numpy.histogram(values, bins=edges)
    return ChannelHistogram(channel, edges, counts.astype(numpy.int64), 1,
                            float(values.min()), float(values.max()))

def histogram_of_images(images, channel, bins=BINS, workers=1):
    """Histogram of channel over a sequence of RGB images."""
    images = list(images)
    if not images:
        raise ValueError('no images to histogram')
    one = lambda img: histogram_of_image(img, channel, bins)
    if workers <= 1:
        hists = [one(img) for img in images]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hists = list(pool.map(one, images))
    total = hists[0]
    for h in hists[1:]:
        total = total + h
    return total

def channel_distribution(directory, channel, n_images=100, seed=0, bins=BINS, workers=1):
    """Histogram of channel over n_images images drawn without replacement
    from directory (all of them if there are fewer)."""
    _channel_index(channel)
    paths = list_images(directory)
    if not paths:
        raise ValueError('no images found in %s' % directory)
    if n_images < len(paths):
        pick = numpy.random.default_rng(seed).choice(len(paths), size=n_images, replace=False)
        paths = [paths[i] for i in sorted(pick)]
    h = histogram_of_images((read_image(p) for p in paths), channel, bins, workers)
    info('%s: channel %s over %d images, range [%.1f, %.1f]', directory, channel, h.n_images, h.min, h.max)
    return h


def range_overlap(h1, h2):
    """Histogram intersection sum(min(p1, p2)) of the normalized histograms,
    in [0, 1]."""
    _check_binning(h1, h2)
    if h1.n_pixels == 0 or h2.n_pixels == 0:
        raise ValueError('cannot compare an empty histogram')
    return float(numpy.minimum(h1.normalized(), h2.normalized()).sum())


def format_histogram(h):
    buf = io.StringIO()
    buf.write('# channel=%s n_images=%d min=%.4f max=%.4f\n' % (h.channel, h.n_images, h.min, h.max))
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(['bin_lo', 'bin_hi', 'count'])
    for lo, hi, c in zip(h.edges[:-1], h.edges[1:], h.counts):
        writer.writerow(['%.4f' % lo, '%.4f' % hi, int(c)])
    return buf.getvalue()

def write_histograms(path, hists):
    """Write one or more histograms (label -> histogram) to a CSV file; each
    block starts with its own '# ' metadata line."""
    if isinstance(hists, ChannelHistogram):
        hists = {'': hists}
    text = ''
    for label, h in hists.items():
        block = format_histogram(h)
        if label:
            block = block.replace('# channel=', '# dataset=%s channel=' % label, 1)
        text += block
    atomic_write(path, text.encode())
    return path

def plot_histograms(hists, path, title=None):
    """Line plot of up to four normalized histograms (label -> histogram)."""
    if not 1 <= len(hists) <= MAX_PLOTTED:
        raise ValueError('can plot 1 to %d histograms, got %d' % (MAX_PLOTTED, len(hists)))
    import matplotlib
    matplotlib.use('Agg')
    from matplotlib import pyplot
    fig, ax = pyplot.subplots(figsize=(6, 4))
    channel = None
    for label, h in hists.items():
        centres = (h.edges[:-1] + h.edges[1:])/2
        ax.plot(centres, h.normalized(), label=label)
        channel = h.channel
    ax.set_xlim(0, 255)
    ax.set_xlabel('channel %s (8-bit LAB)' % channel)
    ax.set_ylabel('fraction of pixels')
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    pyplot.close(fig)
    return path
