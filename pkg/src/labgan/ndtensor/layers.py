"""Parameter containers. A layer owns named trainable tensors and child
layers; named_parameters() walks them in registration order, which fixes the
parameter order used by optimizers and checkpoints."""

import numpy

from .tensor import tensor
from .ops import conv2d, conv_transpose2d, instance_norm2d


def init_weight(rng, shape, fan_in, init):
    """'he' -> N(0, 2/fan_in), 'gan' -> N(0, 0.02^2), 'zeros'."""
    if init == 'he':
        return rng.normal(0.0, numpy.sqrt(2.0/fan_in), size=shape)
    if init == 'gan':
        return rng.normal(0.0, 0.02, size=shape)
    if init == 'zeros':
        return numpy.zeros(shape)
    raise ValueError('unknown init "%s"' % init)


class layer(object):
    def __init__(self):
        self._params = {}
        self._children = {}

    def add_param(self, name, data):
        t = tensor(data, requires_grad=True, name=name)
        self._params[name] = t
        return t

    def add(self, name, child):
        self._children[name] = child
        return child

    def named_parameters(self, prefix=''):
        for name, p in self._params.items():
            yield prefix + name, p
        for name, child in self._children.items():
            for item in child.named_parameters(prefix + name + '.'):
                yield item

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state, strict=True):
        own = dict(self.named_parameters())
        if strict:
            missing = sorted(set(own) - set(state))
            unexpected = sorted(set(state) - set(own))
            if missing or unexpected:
                raise ValueError('state mismatch: missing %s, unexpected %s' % (missing, unexpected))
        for name, arr in state.items():
            if name not in own:
                continue
            arr = numpy.asarray(arr)
            if arr.shape != own[name].shape:
                raise ValueError('shape mismatch for %s: %s != %s' % (name, arr.shape, own[name].shape))
            own[name].data[...] = arr

    def freeze(self):
        """Stop all parameters from receiving gradients."""
        for p in self.parameters():
            p.requires_grad = False
            p.grad = None
        return self

    @property
    def frozen(self):
        return not any(p.requires_grad for p in self.parameters())

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def __call__(self, x):
        return self.forward(x)

    def forward(self, x):
        raise NotImplementedError


class conv_layer(layer):
    def __init__(self, cin, cout, k, rng, stride=1, padding=0, bias=True, init='he'):
        layer.__init__(self)
        if min(cin, cout, k) < 1:
            raise ValueError('invalid conv layer widths %d -> %d (kernel %d)' % (cin, cout, k))
        self.stride, self.padding = stride, padding
        self.weight = self.add_param('weight', init_weight(rng, (cout, cin, k, k), cin*k*k, init))
        self.bias = self.add_param('bias', numpy.zeros(cout)) if bias else None

    def forward(self, x):
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)

class conv_transpose_layer(layer):
    def __init__(self, cin, cout, k, rng, stride=1, padding=0, output_padding=0, bias=True, init='he'):
        layer.__init__(self)
        if min(cin, cout, k) < 1:
            raise ValueError('invalid conv-transpose layer widths %d -> %d (kernel %d)' % (cin, cout, k))
        self.stride, self.padding, self.output_padding = stride, padding, output_padding
        self.weight = self.add_param('weight', init_weight(rng, (cin, cout, k, k), cin*k*k, init))
        self.bias = self.add_param('bias', numpy.zeros(cout)) if bias else None

    def forward(self, x):
        return conv_transpose2d(x, self.weight, self.bias, self.stride, self.padding, self.output_padding)

class instance_norm_layer(layer):
    def __init__(self, channels, affine=True, eps=1e-5, zero_gamma=False):
        layer.__init__(self)
        self.eps = eps
        if affine:
            self.gamma = self.add_param('gamma', numpy.zeros(channels) if zero_gamma else numpy.ones(channels))
            self.beta = self.add_param('beta', numpy.zeros(channels))
        else:
            self.gamma = self.beta = None

    def forward(self, x):
        return instance_norm2d(x, self.gamma, self.beta, self.eps)


def count_params(model):
    """Exact number of scalar parameters in a layer (or any object with
    parameters())."""
    return int(sum(p.size for p in model.parameters()))
