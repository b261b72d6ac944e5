import numpy
import pytest

from labgan.ndtensor import tensor
from labgan.optim import SGD, Adam


def _param(value, grad=None):
    p = tensor(numpy.asarray(value, dtype=numpy.float64), requires_grad=True)
    if grad is not None:
        p.grad = numpy.asarray(grad, dtype=numpy.float32)
    return p


def test_plain_sgd_step():
    p = _param([1.0, -2.0], [0.5, 1.0])
    SGD([p], lr=0.1, momentum=0, weight_decay=0).step()
    assert numpy.allclose(p.data, [0.95, -2.1])

def test_momentum_accumulates():
    p = _param([0.0])
    opt = SGD([p], lr=1.0, momentum=0.5, weight_decay=0)
    for _ in range(2):
        p.grad = numpy.ones(1, dtype=numpy.float32)
        opt.step()
    # 1 + (0.5*1 + 1)
    assert numpy.allclose(p.data, [-2.5])

def test_group_multiplier_and_frozen_params():
    a, b, c = _param([1.0], [1.0]), _param([1.0], [1.0]), _param([1.0], [1.0])
    c.requires_grad = False
    SGD([([a, c], 1.0), ([b], 10.0)], lr=0.01, momentum=0, weight_decay=0).step()
    assert numpy.allclose(a.data, [0.99]) and numpy.allclose(b.data, [0.9])
    assert c.data[0] == 1.0

def test_poly_decay():
    opt = SGD([_param([0.0])], lr=0.1, max_steps=10, power=0.9)
    assert opt.lr == 0.1
    for _ in range(5):
        opt.step()
    assert abs(opt.lr - 0.1*0.5**0.9) < 1e-12
    for _ in range(5):
        opt.step()
    assert opt.lr == 0

def test_invalid_learning_rate():
    with pytest.raises(ValueError, match='learning rate'):
        Adam([_param([0.0])], lr=0)

def test_adam_first_step_is_lr():
    p = _param([1.0, 1.0], [3.0, -0.2])
    Adam([p], lr=2e-4).step()
    assert numpy.allclose(p.data, [1 - 2e-4, 1 + 2e-4], atol=1e-6)

def test_state_restores_exactly(rng):
    grads = [rng.normal(size=4).astype(numpy.float32) for _ in range(6)]
    p, q = _param(numpy.ones(4)), _param(numpy.ones(4))
    opt = Adam([p], lr=1e-2)
    for g in grads[:3]:
        p.grad = g
        opt.step()
    q.data[...] = p.data
    restored = Adam([q], lr=1e-2)
    restored.load_state_dict(opt.state_dict())
    assert restored.t == 3
    for g in grads[3:]:
        p.grad, q.grad = g, g.copy()
        opt.step()
        restored.step()
    assert numpy.array_equal(p.data, q.data)
