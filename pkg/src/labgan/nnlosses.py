"""Training objectives: the KL cycle-consistency loss and least-squares
adversarial losses for the feature GAN, and pixelwise cross entropy for the
segmenter. Every loss returns a scalar tensor attached to the graph."""

import numpy

from .ndtensor import tensor, softmax_over_channels, log_softmax_over_channels
from .ndtensor.ops import op, _log_softmax
from .ndtensor.ops import sum as tsum, mean as tmean

IGNORE_INDEX = 255


class NonFiniteLoss(FloatingPointError):
    pass


def check_finite(terms, step=None):
    """Raise NonFiniteLoss naming the first term (in dict order) that is NaN
    or infinite."""
    for name, value in terms.items():
        v = value.item() if isinstance(value, tensor) else float(value)
        if not numpy.isfinite(v):
            where = '' if step is None else ' at step %d' % step
            raise NonFiniteLoss('non-finite loss term %s = %r%s' % (name, v, where))


def kl_cycle_loss(cycled, original):
    """KL(p || q) averaged over spatial locations, where p and q are the
    channel softmax of original (target) and cycled (approximation).

    Call once per cycle direction and add the two terms."""
    if cycled.shape != original.shape:
        raise RuntimeError('kl_cycle_loss: shape mismatch %s != %s' % (cycled.shape, original.shape))
    if len(cycled.shape) < 2 or cycled.shape[1] < 1:
        raise RuntimeError('kl_cycle_loss: inputs need a channel axis, got shape %s' % (cycled.shape,))
    locations = cycled.size // cycled.shape[1]
    p = softmax_over_channels(original)
    kl = p * (log_softmax_over_channels(original) - log_softmax_over_channels(cycled))
    return tsum(kl) * (1.0/locations)

def lsgan_d_loss(d_real, d_fake):
    return 0.5*tmean((d_real - 1)**2) + 0.5*tmean(d_fake**2)

def lsgan_g_loss(d_fake):
    return tmean((d_fake - 1)**2)


class cross_entropy_op(op):
    """Mean of -log softmax(logits)[label] over non-ignored pixels. With no
    valid pixel the loss is 0 and so is its gradient."""
    def __init__(self, labels, ignore_index=IGNORE_INDEX):
        self.labels = numpy.asarray(labels)
        self.ignore_index = ignore_index

    def forward(self, logits):
        if logits.ndim < 2:
            raise RuntimeError('cross_entropy: logits need a class axis, got shape %s' % (logits.shape,))
        K = logits.shape[1]
        labels = self.labels
        expected = logits.shape[:1] + logits.shape[2:]
        if labels.shape != expected:
            raise RuntimeError('cross_entropy: label shape %s != %s' % (labels.shape, expected))
        valid = labels != self.ignore_index
        bad = valid & ((labels < 0) | (labels >= K))
        if bad.any():
            raise ValueError('cross_entropy: label %d out of range for %d classes' % (labels[bad].flat[0], K))
        self.n = int(valid.sum())
        logp = _log_softmax(logits)
        self.p = numpy.exp(logp)
        self.onehot = numpy.zeros_like(logits)
        safe = numpy.where(valid, labels, 0)
        numpy.put_along_axis(self.onehot, safe[:, None], 1.0, axis=1)
        self.onehot *= valid[:, None]
        self.valid = valid
        if self.n == 0:
            return numpy.float64(0)
        return -(logp*self.onehot).sum()/self.n

    def transpmult(self, g):
        if self.n == 0:
            return (numpy.zeros_like(self.p),)
        return (g*(self.p*self.valid[:, None] - self.onehot)/self.n,)

def cross_entropy(logits, labels, ignore_index=IGNORE_INDEX):
    return cross_entropy_op(labels, ignore_index)(logits)
