import math

import numpy
import pytest

from labgan.ndtensor import tensor, backward
from labgan.nnlosses import (kl_cycle_loss, lsgan_d_loss, lsgan_g_loss, cross_entropy, check_finite,
                             NonFiniteLoss, IGNORE_INDEX)


def _t(a, grad=False):
    return tensor(numpy.asarray(a, dtype=numpy.float64), requires_grad=grad)

def _logits(*p):
    return numpy.log(numpy.asarray(p, dtype=numpy.float64)).reshape(1, len(p), 1, 1)


def test_kl_of_identical_inputs(rng):
    x = rng.normal(size=(2, 4, 3, 3))
    cycled = _t(x, grad=True)
    loss = kl_cycle_loss(cycled, _t(x))
    assert abs(loss.item()) < 1e-7
    backward(loss)
    assert numpy.abs(cycled.grad).max() < 1e-6

def test_kl_worked_example():
    loss = kl_cycle_loss(_t(_logits(0.25, 0.75)), _t(_logits(0.5, 0.5)))
    assert abs(loss.item() - (0.5*math.log(2) + 0.5*math.log(2/3))) < 1e-4
    assert abs(loss.item() - 0.1438) < 1e-4

def test_kl_direction():
    forward = kl_cycle_loss(_t(_logits(0.25, 0.75)), _t(_logits(0.5, 0.5))).item()
    reverse = kl_cycle_loss(_t(_logits(0.5, 0.5)), _t(_logits(0.25, 0.75))).item()
    assert abs(forward - reverse) > 1e-3

def test_kl_ignores_constant_shift_per_location(rng):
    x, y = rng.normal(size=(1, 3, 2, 2)), rng.normal(size=(1, 3, 2, 2))
    shift = rng.normal(size=(1, 1, 2, 2))
    a = kl_cycle_loss(_t(x), _t(y)).item()
    b = kl_cycle_loss(_t(x + shift), _t(y - 2*shift)).item()
    assert abs(a - b) < 1e-5

def test_kl_averages_over_locations():
    one = numpy.concatenate([_logits(0.25, 0.75)]*3, axis=2)
    ref = numpy.concatenate([_logits(0.5, 0.5)]*3, axis=2)
    assert abs(kl_cycle_loss(_t(one), _t(ref)).item() - 0.1438) < 1e-4

def test_kl_shape_mismatch():
    with pytest.raises(RuntimeError, match='shape mismatch'):
        kl_cycle_loss(_t(numpy.zeros((1, 2, 2, 2))), _t(numpy.zeros((1, 3, 2, 2))))


def test_lsgan_values():
    ones, zeros = _t(numpy.ones((2, 1, 3, 3))), _t(numpy.zeros((2, 1, 3, 3)))
    assert lsgan_d_loss(ones, zeros).item() == 0
    assert lsgan_g_loss(ones).item() == 0
    assert abs(lsgan_d_loss(zeros, ones).item() - 1) < 1e-7
    assert abs(lsgan_g_loss(zeros).item() - 1) < 1e-7
    half = _t(numpy.full((4,), 0.5))
    assert abs(lsgan_d_loss(half, half).item() - 0.25) < 1e-7


def test_cross_entropy_uniform_logits():
    labels = numpy.array([[[0, 1], [2, 3]]])
    loss = cross_entropy(_t(numpy.zeros((1, 4, 2, 2))), labels)
    assert abs(loss.item() - math.log(4)) < 1e-5

def test_cross_entropy_all_ignored():
    logits = _t(numpy.ones((1, 3, 2, 2)), grad=True)
    loss = cross_entropy(logits, numpy.full((1, 2, 2), IGNORE_INDEX))
    assert loss.item() == 0
    backward(loss)
    assert not logits.grad.any()

def test_cross_entropy_label_errors():
    with pytest.raises(ValueError, match='out of range'):
        cross_entropy(_t(numpy.zeros((1, 3, 1, 2))), numpy.array([[[0, 3]]]))
    with pytest.raises(RuntimeError, match='label shape'):
        cross_entropy(_t(numpy.zeros((1, 3, 1, 2))), numpy.array([[0, 1]]))


def test_check_finite_names_the_term():
    check_finite(dict(a=1.0, b=_t([2.0])))
    with pytest.raises(NonFiniteLoss, match='loss_cyc'):
        check_finite(dict(loss_d=0.5, loss_cyc=float('nan')), step=7)
    assert issubclass(NonFiniteLoss, FloatingPointError)
