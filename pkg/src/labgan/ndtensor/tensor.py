"""Dense float32 tensors with reverse-mode differentiation.

A tensor produced by a differentiable operation keeps a reference to that
operation (its node), and the operation keeps references to its inputs. This
defers all derivative work until backward() is called on a scalar, which then
applies the transposed action of each node in reverse topological order:

  loss = sum(relu(conv2d(x, w, b)))
  backward(loss)
  --> g = ones_like(loss)
  --> g = sum.transpmult(g)
  --> g = relu.transpmult(g)
  --> gx, gw, gb = conv2d.transpmult(g)

Nodes are only recorded when some input is a trainable leaf or itself has a
node, so frozen sub-networks fed with plain data build no graph at all.
"""

from contextlib import contextmanager

import numpy

_grad_enabled = [True]
_dtype = [numpy.float32]


@contextmanager
def no_grad():
    """Context in which no differentiation graph is recorded."""
    _grad_enabled.append(False)
    try:
        yield
    finally:
        _grad_enabled.pop()

def grad_enabled():
    return _grad_enabled[-1]

@contextmanager
def precision(dtype):
    """Context in which new tensors store their data as dtype instead of
    float32. Only used by the finite-difference checks."""
    _dtype.append(numpy.dtype(dtype).type)
    try:
        yield
    finally:
        _dtype.pop()


class tensor(object):
    """An n-dimensional float32 array, optionally part of a differentiation
    graph. Leaves created with requires_grad=True accumulate their gradient
    in .grad (same shape, float32) when backward() is called."""

    def __init__(self, data, requires_grad=False, name=None):
        self.data = numpy.ascontiguousarray(data, dtype=_dtype[-1])
        self.requires_grad = requires_grad
        self.grad = None
        self.node = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def tracked(self):
        """True if gradients may flow through this tensor."""
        return self.requires_grad or self.node is not None

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise ValueError('item() needs a single-element tensor, got shape %s' % (self.shape,))
        return float(self.data.reshape(()))

    def detach(self):
        return tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        return backward(self)

    def sum(self):
        from .ops import sum_op
        return sum_op()(self)

    def mean(self):
        from .ops import mean_op
        return mean_op()(self)

    def __add__(self, other):
        from .ops import add_op, shift_op
        if isinstance(other, tensor):
            return add_op()(self, other)
        return shift_op(float(other))(self)

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        from .ops import sub_op, shift_op
        if isinstance(other, tensor):
            return sub_op()(self, other)
        return shift_op(-float(other))(self)

    def __rsub__(self, other):
        from .ops import scale_op, shift_op
        return shift_op(float(other))(scale_op(-1.0)(self))

    def __mul__(self, other):
        from .ops import mul_op, scale_op
        if isinstance(other, tensor):
            return mul_op()(self, other)
        return scale_op(float(other))(self)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, tensor):
            return NotImplemented
        return self.__mul__(1.0/float(other))

    def __neg__(self):
        from .ops import scale_op
        return scale_op(-1.0)(self)

    def __pow__(self, other):
        from .ops import square_op
        if other != 2:
            raise ValueError("only the power 2 is supported")
        return square_op()(self)

    def __repr__(self):
        kind = 'leaf' if self.node is None else self.node.__class__.__name__
        return '<tensor %s %s%s>' % ('x'.join(map(str, self.shape)) or 'scalar', kind,
                                     ' requires_grad' if self.requires_grad else '')


def as_tensor(x):
    if x is None or isinstance(x, tensor):
        return x
    return tensor(x)

def _topological_order(root):
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            order.append(t)
            continue
        if id(t) in visited:
            continue
        visited.add(id(t))
        stack.append((t, True))
        if t.node is not None:
            for inp in reversed(t.node.inputs):
                if inp is not None and inp.tracked and id(inp) not in visited:
                    stack.append((inp, False))
    return order

def backward(loss, wrt=None):
    """Propagate d(loss)/d(.) through the graph of loss. Trainable leaves
    accumulate into .grad. If wrt is given (a list of tensors), their gradients
    are also returned, with zeros for tensors the loss does not depend on."""
    if not isinstance(loss, tensor):
        raise TypeError('backward expects a tensor, not %s' % type(loss))
    if loss.data.size != 1:
        raise ValueError('backward requires a scalar loss, got shape %s' % (loss.shape,))

    grads = {id(loss): numpy.ones(loss.shape, dtype=numpy.float64)}
    for t in reversed(_topological_order(loss)):
        g = grads.get(id(t))
        if g is None:
            continue
        if t.node is None:
            if t.requires_grad:
                g32 = g.astype(numpy.float32)
                t.grad = g32 if t.grad is None else t.grad + g32
            continue
        for inp, gi in zip(t.node.inputs, t.node.transpmult(g)):
            if inp is None or gi is None or not inp.tracked:
                continue
            if gi.shape != inp.shape:
                raise RuntimeError('%s.transpmult returned shape %s for input of shape %s'
                                   % (t.node.__class__.__name__, gi.shape, inp.shape))
            prev = grads.get(id(inp))
            grads[id(inp)] = gi if prev is None else prev + gi

    if wrt is not None:
        return [grads[id(x)].astype(numpy.float32) if id(x) in grads
                else numpy.zeros(x.shape, dtype=numpy.float32) for x in wrt]

# per-channel normalisation of 8-bit images fed to the networks
IMAGE_MEAN = 127.5
IMAGE_SCALE = 1/64.

def from_images(images):
    """(B, H, W, 3) uint8 -> (B, 3, H, W) tensor, centred and scaled."""
    images = numpy.asarray(images)
    if images.ndim == 3:
        images = images[None]
    if images.ndim != 4 or images.shape[-1] != 3:
        raise ValueError('expected a (B, H, W, 3) image batch, got shape %s' % (images.shape,))
    x = (images.astype(numpy.float64) - IMAGE_MEAN)*IMAGE_SCALE
    return tensor(x.transpose(0, 3, 1, 2))
