import pytest

from labgan.ndtensor import op
from labgan.testing import REGISTRY, case, grad_check, check_expected, GradCheckFailure


class _miscaled_op(op):
    """Small values with a gradient six times too large."""
    def forward(self, x):
        return 1e-4*x
    def transpmult(self, g):
        return (6e-4*g,)


@pytest.mark.parametrize('name', sorted(REGISTRY))
def test_registered_gradients(name):
    assert grad_check(name) < 1e-3

def test_single_shape():
    assert grad_check('tanh', shapes=[(2, 2)]) < 1e-3

def test_unknown_operation():
    with pytest.raises(ValueError, match='unknown operation'):
        grad_check('softplus')

def test_abort_on_failure(monkeypatch):
    monkeypatch.setenv('LABGAN_GRADCHECK_ABORT', '1')
    with pytest.raises(GradCheckFailure):
        grad_check('relu', tolerance=0)

def test_check_expected(monkeypatch):
    assert check_expected('count', 76, 76)
    assert check_expected('colour', [135.76, 208.09], [135.76, 208.1], atol=0.05)
    monkeypatch.setenv('LABGAN_GRADCHECK_ABORT', '1')
    with pytest.raises(GradCheckFailure, match='count'):
        check_expected('count', 75, 76)
    with pytest.raises(GradCheckFailure, match='shape'):
        check_expected('colour', [1.0], [1.0, 2.0])

def test_small_gradients_are_compared_relatively(monkeypatch):
    monkeypatch.setitem(REGISTRY, 'miscaled', [case(lambda x: _miscaled_op()(x), [(3, 4)])])
    monkeypatch.setenv('LABGAN_GRADCHECK_ABORT', '1')
    with pytest.raises(GradCheckFailure, match='miscaled'):
        grad_check('miscaled')

def test_restyle_keeps_offsets_and_rescales_residual(rng):
    from labgan.ndtensor import tensor, restyle2d
    x = rng.normal(size=(2, 3, 4, 4))*[[[[2.0]], [[0.5]], [[1.0]]]] + 7.0
    r = rng.normal(size=x.shape)
    out = restyle2d(tensor(x), tensor(r)).data
    sd = x.std(axis=(2, 3), keepdims=True)
    assert abs(out - (x + sd*r)).max() < 1e-3
    assert abs(restyle2d(tensor(x), tensor(0*r)).data - x).max() < 1e-5
