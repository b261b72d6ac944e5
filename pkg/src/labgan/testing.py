"""Finite-difference gradient checks for the differentiable operations.

Each registered case builds a function of one or more input arrays; the check
contracts the output with a fixed random tensor r, so the scalar loss is
sum(r * f(x)), and compares the analytic gradient of that loss against central
differences. The error of one entry is

  |analytic - numeric| / max(|analytic|, |numeric|, GRAD_FLOOR),

and grad_check reports the maximum over all entries of all inputs. Inputs of
functions with kinks (relu, leaky_relu) are resampled until every
pre-activation is at least KINK_MARGIN away from zero, so the differences
never straddle a kink.
"""

import atexit
import os

import numpy

from . import ndtensor as nd
from . import nnlosses
from .log import warning
from .ndtensor import tensor, backward, precision

KINK_MARGIN = 0.05
# entries whose gradients are both below this compare in absolute terms
GRAD_FLOOR = 1e-2


class GradCheckFailure(AssertionError):
    pass


_errs = 0

def _log_or_raise(msg):
    if os.environ.get('LABGAN_GRADCHECK_ABORT'):
        raise GradCheckFailure(msg)
    warning('! %s', msg)
    global _errs
    _errs += 1
    if _errs == 1:
        @atexit.register
        def print_msg():
            warning('! %d gradient check(s) failed', _errs)


class case(object):
    """A registered gradient-check case: fn(*tensors) -> tensor, the input
    shapes for each trial, and an optional kink function returning the
    pre-activation values that must stay away from zero."""
    def __init__(self, fn, shapes, kink=None, make_inputs=None):
        self.fn = fn
        self.shapes = shapes
        self.kink = kink
        self.make_inputs = make_inputs

    def inputs(self, rng, shapes):
        if self.make_inputs is not None:
            return self.make_inputs(rng, shapes)
        return [rng.normal(size=s) for s in shapes]


def _conv_case(stride, padding):
    return lambda x, w, b: nd.conv2d(x, w, b, stride, padding)

def _composite(x, w, b, gamma, beta):
    return nd.relu(nd.instance_norm2d(nd.conv2d(x, w, b, 1, 1), gamma, beta))

def _composite_kink(x, w, b, gamma, beta):
    with nd.no_grad():
        return nd.instance_norm2d(nd.conv2d(x, w, b, 1, 1), gamma, beta).data

def _labels_for(shape, seed=7):
    B, K, H, W = shape
    labels = numpy.random.default_rng(seed).integers(0, K, size=(B, H, W))
    labels[0, 0, 0] = nnlosses.IGNORE_INDEX
    return labels

def _cross_entropy(logits):
    return nnlosses.cross_entropy(logits, _labels_for(logits.shape))

def _positive_scale(rng, shapes):
    # instance norm: keep gamma away from zero so every input entry matters
    x, gamma, beta = (rng.normal(size=s) for s in shapes)
    return [x, numpy.sign(gamma)*(numpy.abs(gamma) + 0.5), beta]

REGISTRY = {
    'conv2d': [
        case(_conv_case(1, 0), [(1, 1, 3, 3), (1, 1, 2, 2), (1,)]),
        case(_conv_case(1, 1), [(2, 2, 4, 4), (3, 2, 3, 3), (3,)]),
        case(_conv_case(2, 1), [(1, 2, 5, 5), (3, 2, 3, 3), (3,)]),
    ],
    'conv_transpose2d': [
        case(lambda x, w, b: nd.conv_transpose2d(x, w, b, 1, 0), [(1, 2, 3, 3), (2, 1, 2, 2), (1,)]),
        case(lambda x, w, b: nd.conv_transpose2d(x, w, b, 2, 1, 1), [(1, 3, 3, 3), (3, 2, 3, 3), (2,)]),
        case(lambda x, w, b: nd.conv_transpose2d(x, w, b, 2, 0), [(2, 2, 2, 2), (2, 2, 2, 2), (2,)]),
    ],
    'instance_norm2d': [
        case(lambda x, g, b: nd.instance_norm2d(x, g, b), [(1, 1, 1, 3), (1,), (1,)], make_inputs=_positive_scale),
        case(lambda x, g, b: nd.instance_norm2d(x, g, b), [(2, 3, 3, 3), (3,), (3,)], make_inputs=_positive_scale),
        case(lambda x, g, b: nd.instance_norm2d(x, g, b), [(1, 2, 4, 5), (2,), (2,)], make_inputs=_positive_scale),
    ],
    'relu': [case(nd.relu, [s], kink=lambda x: x) for s in [(5,), (2, 3, 4), (1, 2, 3, 3)]],
    'leaky_relu': [case(lambda x: nd.leaky_relu(x, 0.2), [s], kink=lambda x: x) for s in [(5,), (2, 3, 4), (1, 2, 3, 3)]],
    'tanh': [case(nd.tanh, [s]) for s in [(5,), (2, 3, 4), (1, 2, 3, 3)]],
    'softmax_over_channels': [case(nd.softmax_over_channels, [s]) for s in [(1, 3, 2, 2), (2, 1, 3, 3), (2, 5, 1, 4)]],
    'log_softmax_over_channels': [case(nd.log_softmax_over_channels, [s]) for s in [(1, 3, 2, 2), (2, 2, 3, 3), (2, 5, 1, 4)]],
    'upsample_bilinear': [
        case(lambda x: nd.upsample_bilinear(x, (6, 6)), [(1, 1, 3, 3)]),
        case(lambda x: nd.upsample_bilinear(x, (8, 4)), [(2, 2, 4, 4)]),
        case(lambda x: nd.upsample_bilinear(x, (5, 7)), [(1, 3, 2, 3)]),
    ],
    'pad_crop': [
        case(lambda x: nd.pad2d(x, (1, 0, 2, 1)), [(1, 2, 3, 3)]),
        case(lambda x: nd.crop2d(x, 1, 0, 2, 3), [(1, 2, 4, 4)]),
        case(lambda x: nd.crop2d(nd.pad2d(x, (1, 1, 1, 1)), 0, 1, 3, 3), [(2, 1, 3, 3)]),
    ],
    'composite': [
        case(_composite, [(1, 2, 4, 4), (3, 2, 3, 3), (3,), (3,), (3,)], kink=_composite_kink),
        case(_composite, [(2, 1, 3, 3), (2, 1, 3, 3), (2,), (2,), (2,)], kink=_composite_kink),
        case(_composite, [(1, 3, 3, 4), (2, 3, 3, 3), (2,), (2,), (2,)], kink=_composite_kink),
    ],
    'restyle2d': [case(nd.restyle2d, [s, s]) for s in [(1, 1, 2, 4), (2, 3, 3, 3), (1, 2, 4, 5)]],
    'kl_cycle_loss': [case(nnlosses.kl_cycle_loss, [s, s]) for s in [(1, 2, 1, 1), (2, 3, 2, 2), (1, 4, 3, 2)]],
    'lsgan_d_loss': [case(nnlosses.lsgan_d_loss, [s, s]) for s in [(1, 1, 2, 2), (2, 1, 3, 3), (4,)]],
    'lsgan_g_loss': [case(nnlosses.lsgan_g_loss, [s]) for s in [(1, 1, 2, 2), (2, 1, 3, 3), (4,)]],
    'cross_entropy': [case(_cross_entropy, [s]) for s in [(1, 2, 2, 2), (2, 4, 3, 3), (1, 5, 2, 4)]],
}


def _draw(c, rng, shapes, attempts=1000):
    for _ in range(attempts):
        arrays = c.inputs(rng, shapes)
        if c.kink is None or numpy.abs(c.kink(*arrays)).min() >= KINK_MARGIN:
            return arrays
    raise RuntimeError('could not draw inputs away from the kink in %d attempts' % attempts)

def _loss_value(c, arrays, r):
    with nd.no_grad(), precision(numpy.float64):
        out = c.fn(*[tensor(a) for a in arrays])
        return float(numpy.sum(out.data * r))

def check_case(c, shapes, rng, h=1e-3):
    """Max relative error of one case at one set of input shapes. The
    analytic gradient comes from float32 tensors; the central differences are
    evaluated in double precision at the same (float32-representable) point."""
    arrays = [numpy.asarray(a, dtype=numpy.float32) for a in _draw(c, rng, shapes)]
    inputs = [tensor(a.copy(), requires_grad=True) for a in arrays]
    out = c.fn(*inputs)
    r = rng.normal(size=out.shape).astype(numpy.float32)
    analytic = backward(nd.sum(out * tensor(r)), wrt=inputs)

    points = [a.astype(numpy.float64) for a in arrays]
    r = r.astype(numpy.float64)
    err = 0.0
    for k, a in enumerate(points):
        flat = a.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            lp = _loss_value(c, points, r)
            flat[j] = orig - h
            lm = _loss_value(c, points, r)
            flat[j] = orig
            numeric = (lp - lm)/(2*h)
            an = float(analytic[k].reshape(-1)[j])
            err = max(err, abs(an - numeric)/max(abs(an), abs(numeric), GRAD_FLOOR))
    return err

def grad_check(name, shapes=None, tolerance=1e-3, seed=0, h=1e-3):
    """Run the finite-difference check for a registered operation and return
    the maximum relative error over all its trials. If shapes is given, only
    that set of input shapes is checked (with the first registered case). A
    failure against tolerance is logged, or raised as GradCheckFailure if
    $LABGAN_GRADCHECK_ABORT is set."""
    if name not in REGISTRY:
        raise ValueError('unknown operation "%s" (known: %s)' % (name, ', '.join(sorted(REGISTRY))))
    rng = numpy.random.default_rng(seed)
    trials = [(c, c.shapes) for c in REGISTRY[name]] if shapes is None else [(REGISTRY[name][0], shapes)]
    err = max(check_case(c, s, rng, h) for c, s in trials)
    if err >= tolerance:
        _log_or_raise('gradient check of %s: max relative error %.3g >= %.3g' % (name, err, tolerance))
    return err

def check_all(names=None, tolerance=1e-3, seed=0):
    """Check several registered operations; returns {name: max error}."""
    return {name: grad_check(name, tolerance=tolerance, seed=seed) for name in (names or sorted(REGISTRY))}


def check_expected(name, value, expected, rtol=1e-6, atol=0.0):
    """Compare a computed quantity from a demo or script against its known
    value. A mismatch is logged, or raised as GradCheckFailure if
    $LABGAN_GRADCHECK_ABORT is set. Returns True on a match."""
    value = numpy.asarray(value, dtype=numpy.float64)
    expected = numpy.asarray(expected, dtype=numpy.float64)
    if value.shape != expected.shape:
        _log_or_raise('%s: shape %s != expected %s' % (name, value.shape, expected.shape))
        return False
    if not numpy.allclose(value, expected, rtol=rtol, atol=atol):
        err = numpy.abs(value - expected).max()
        _log_or_raise('%s: max deviation %.3g from expected value (rtol=%g, atol=%g)' % (name, err, rtol, atol))
        return False
    return True
