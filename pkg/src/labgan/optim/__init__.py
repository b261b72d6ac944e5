"""A selection of optimizers."""

from .optimizer import optimizer

class SGD(optimizer):
    from . import sgd
    method = staticmethod(sgd.momentum_sgd)

class Adam(optimizer):
    from . import adam
    method = staticmethod(adam.adam)
