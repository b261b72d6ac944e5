"""Differentiable operations. Each operation is an object with

  forward(*arrays)  -> array       (the action)
  transpmult(g)     -> input grads (the transposed action on an output
                                    gradient, one entry per input; None for
                                    inputs that are not differentiated)

and is applied by calling it on tensors. The functional wrappers at the end
of the module are the normal way to use them. Internally all arithmetic runs
in float64; results are stored as float32.
"""

import numpy
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from .tensor import tensor, as_tensor, grad_enabled

f64 = numpy.float64


class op(object):
    """Base class for differentiable operations."""
    inputs = ()

    def __call__(self, *inputs):
        inputs = [as_tensor(x) for x in inputs]
        out = tensor(self.forward(*[None if x is None else x.data.astype(f64) for x in inputs]))
        if grad_enabled() and any(x is not None and x.tracked for x in inputs):
            self.inputs = inputs
            out.node = self
        return out

    def forward(self, *args):
        raise NotImplementedError

    def transpmult(self, g):
        raise NotImplementedError

    def __str__(self):
        return '<%s>' % self.__class__.__name__


def _check_same_shape(name, a, b):
    if a.shape != b.shape:
        raise RuntimeError('incompatible shapes in %s -- %s != %s' % (name, a.shape, b.shape))

def _check_ndim(name, x, ndim, what='input'):
    if x.ndim != ndim:
        raise RuntimeError('%s: %s must be %d-dimensional, got shape %s' % (name, what, ndim, x.shape))

#
# Elementwise arithmetic and reductions
#

class add_op(op):
    def forward(self, a, b):
        _check_same_shape('add', a, b)
        return a + b
    def transpmult(self, g):
        return g, g

class sub_op(op):
    def forward(self, a, b):
        _check_same_shape('sub', a, b)
        return a - b
    def transpmult(self, g):
        return g, -g

class mul_op(op):
    def forward(self, a, b):
        _check_same_shape('mul', a, b)
        self.a, self.b = a, b
        return a * b
    def transpmult(self, g):
        return g*self.b, g*self.a

class scale_op(op):
    def __init__(self, s):
        self.s = s
    def forward(self, a):
        return a * self.s
    def transpmult(self, g):
        return (g*self.s,)

class shift_op(op):
    def __init__(self, s):
        self.s = s
    def forward(self, a):
        return a + self.s
    def transpmult(self, g):
        return (g,)

class square_op(op):
    def forward(self, a):
        self.a = a
        return a*a
    def transpmult(self, g):
        return (2*g*self.a,)

class sum_op(op):
    def forward(self, a):
        self.shape = a.shape
        return numpy.sum(a)
    def transpmult(self, g):
        return (numpy.broadcast_to(g, self.shape),)

class mean_op(op):
    def forward(self, a):
        self.shape = a.shape
        return numpy.mean(a)
    def transpmult(self, g):
        return (numpy.broadcast_to(g / max(numpy.prod(self.shape), 1), self.shape),)

#
# Activations. At the kink the derivative is the positive-side value.
#

class relu_op(op):
    def forward(self, x):
        self.mask = x >= 0
        return numpy.where(self.mask, x, 0)
    def transpmult(self, g):
        return (g*self.mask,)

class leaky_relu_op(op):
    def __init__(self, slope):
        self.slope = slope
    def forward(self, x):
        self.mask = x >= 0
        return numpy.where(self.mask, x, self.slope*x)
    def transpmult(self, g):
        return (numpy.where(self.mask, g, self.slope*g),)

class tanh_op(op):
    def forward(self, x):
        self.y = numpy.tanh(x)
        return self.y
    def transpmult(self, g):
        return (g*(1 - self.y**2),)

#
# Channel-wise normalisations, axis 1 of a (B, C, ...) tensor
#

def _log_softmax(x):
    return special.log_softmax(x, axis=1)

class softmax_op(op):
    def forward(self, x):
        if x.ndim < 2:
            raise RuntimeError('softmax_over_channels: input needs a channel axis, got shape %s' % (x.shape,))
        self.s = numpy.exp(_log_softmax(x))
        return self.s
    def transpmult(self, g):
        s = self.s
        return (s*(g - (g*s).sum(axis=1, keepdims=True)),)

class log_softmax_op(op):
    def forward(self, x):
        if x.ndim < 2:
            raise RuntimeError('log_softmax_over_channels: input needs a channel axis, got shape %s' % (x.shape,))
        y = _log_softmax(x)
        self.s = numpy.exp(y)
        return y
    def transpmult(self, g):
        return (g - self.s*g.sum(axis=1, keepdims=True),)

class instance_norm_op(op):
    """Per (sample, channel) standardisation over the spatial extent,
    followed by the optional affine map gamma_c * xhat + beta_c."""
    def __init__(self, eps=1e-5):
        self.eps = eps

    def forward(self, x, gamma=None, beta=None):
        _check_ndim('instance_norm2d', x, 4)
        B, C, H, W = x.shape
        if H*W < 1:
            raise RuntimeError('instance_norm2d: empty spatial extent')
        for name, p in (('gamma', gamma), ('beta', beta)):
            if p is not None and p.shape != (C,):
                raise RuntimeError('instance_norm2d: %s shape %s != (%d,)' % (name, p.shape, C))
        mean = x.mean(axis=(2, 3), keepdims=True)
        var = ((x - mean)**2).mean(axis=(2, 3), keepdims=True)
        self.inv_std = 1/numpy.sqrt(var + self.eps)
        self.xhat = (x - mean)*self.inv_std
        self.gamma = numpy.ones(C) if gamma is None else gamma
        y = self.xhat*self.gamma[None, :, None, None]
        if beta is not None:
            y = y + beta[None, :, None, None]
        return y

    def transpmult(self, g):
        n = g.shape[2]*g.shape[3]
        xhat = self.xhat
        dxhat = g*self.gamma[None, :, None, None]
        dx = self.inv_std/n*(n*dxhat
                             - dxhat.sum(axis=(2, 3), keepdims=True)
                             - xhat*(dxhat*xhat).sum(axis=(2, 3), keepdims=True))
        dgamma = (g*xhat).sum(axis=(0, 2, 3))
        dbeta = g.sum(axis=(0, 2, 3))
        return dx, dgamma, dbeta

class restyle_op(op):
    """x + sd(x) * r, where sd is the per (sample, channel) spatial standard
    deviation of x. Adds a residual r given in units of the input's own
    channel spread."""
    def __init__(self, eps=1e-5):
        self.eps = eps

    def forward(self, x, r):
        _check_ndim('restyle2d', x, 4)
        _check_same_shape('restyle2d', x, r)
        n = x.shape[2]*x.shape[3]
        if n < 1:
            raise RuntimeError('restyle2d: empty spatial extent')
        self.centred = x - x.mean(axis=(2, 3), keepdims=True)
        self.sd = numpy.sqrt((self.centred**2).mean(axis=(2, 3), keepdims=True) + self.eps)
        self.r = r
        return x + self.sd*r

    def transpmult(self, g):
        n = g.shape[2]*g.shape[3]
        dx = g + (g*self.r).sum(axis=(2, 3), keepdims=True)*self.centred/(n*self.sd)
        return dx, g*self.sd

#
# Convolutions. Cross-correlation convention (no kernel flip); weights are
# [Cout, Cin, kh, kw] for conv2d, and conv_transpose2d uses the same tensor as
# the adjoint map, i.e. [Cin_of_transpose, Cout_of_transpose, kh, kw].
#

def _im2col(x, kh, kw, stride, padding):
    """(B, C, H, W) -> ((B*Ho*Wo, C*kh*kw) columns, Ho, Wo)"""
    if padding:
        x = numpy.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    B, C, Ho, Wo = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(B*Ho*Wo, C*kh*kw)
    return cols, Ho, Wo

def _col2im(cols, shape, kh, kw, stride, padding, Ho, Wo):
    """Adjoint of _im2col: scatter-add columns back into a (B, C, H, W) array.
    The kernel offsets are visited in a fixed order."""
    B, C, H, W = shape
    d = cols.reshape(B, Ho, Wo, C, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    out = numpy.zeros((B, C, H + 2*padding, W + 2*padding), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + stride*(Ho - 1) + 1:stride, j:j + stride*(Wo - 1) + 1:stride] += d[:, :, i, j]
    return out[:, :, padding:padding + H, padding:padding + W]

def _check_conv_args(name, x, w, b, stride, padding, cin_axis):
    _check_ndim(name, x, 4)
    _check_ndim(name, w, 4, 'weight')
    if stride < 1:
        raise ValueError('%s: stride must be >= 1, got %d' % (name, stride))
    if padding < 0:
        raise ValueError('%s: padding must be >= 0, got %d' % (name, padding))
    if x.shape[1] != w.shape[cin_axis]:
        raise RuntimeError('%s: input channels %d != weight channels %d' % (name, x.shape[1], w.shape[cin_axis]))
    cout = w.shape[1 - cin_axis]
    if b is not None and b.shape != (cout,):
        raise RuntimeError('%s: bias shape %s != (%d,)' % (name, b.shape, cout))

class conv2d_op(op):
    def __init__(self, stride=1, padding=0):
        self.stride, self.padding = stride, padding

    def forward(self, x, w, b=None):
        _check_conv_args('conv2d', x, w, b, self.stride, self.padding, cin_axis=1)
        B, C, H, W = x.shape
        O, _, kh, kw = w.shape
        p = self.padding
        if H + 2*p < kh:
            raise RuntimeError('conv2d: kernel height %d exceeds padded input height %d' % (kh, H + 2*p))
        if W + 2*p < kw:
            raise RuntimeError('conv2d: kernel width %d exceeds padded input width %d' % (kw, W + 2*p))
        self.cols, Ho, Wo = _im2col(x, kh, kw, self.stride, p)
        self.x_shape, self.w = x.shape, w
        out = (self.cols @ w.reshape(O, -1).T).reshape(B, Ho, Wo, O).transpose(0, 3, 1, 2)
        if b is not None:
            out = out + b[None, :, None, None]
        return out

    def transpmult(self, g):
        O, _, kh, kw = self.w.shape
        Ho, Wo = g.shape[2], g.shape[3]
        gmat = g.transpose(0, 2, 3, 1).reshape(-1, O)
        dw = (gmat.T @ self.cols).reshape(self.w.shape)
        dx = _col2im(gmat @ self.w.reshape(O, -1), self.x_shape, kh, kw, self.stride, self.padding, Ho, Wo)
        return dx, dw, gmat.sum(axis=0)

class conv_transpose2d_op(op):
    """Fractionally-strided convolution, the adjoint of conv2d with the same
    weight. Output extent is (H-1)*stride - 2*padding + kh + output_padding."""
    def __init__(self, stride=1, padding=0, output_padding=0):
        if not 0 <= output_padding < max(stride, 1):
            raise ValueError('conv_transpose2d: output_padding must be in [0, stride)')
        self.stride, self.padding, self.output_padding = stride, padding, output_padding

    def forward(self, x, w, b=None):
        _check_conv_args('conv_transpose2d', x, w, b, self.stride, self.padding, cin_axis=0)
        B, Ci, Hi, Wi = x.shape
        _, Co, kh, kw = w.shape
        s, p, op_ = self.stride, self.padding, self.output_padding
        Ho = (Hi - 1)*s - 2*p + kh + op_
        Wo = (Wi - 1)*s - 2*p + kw + op_
        if Ho < 1 or Wo < 1:
            raise RuntimeError('conv_transpose2d: empty output extent %dx%d' % (Ho, Wo))
        self.xmat = x.transpose(0, 2, 3, 1).reshape(-1, Ci)
        self.w = w
        out = _col2im(self.xmat @ w.reshape(Ci, -1), (B, Co, Ho, Wo), kh, kw, s, p, Hi, Wi)
        if b is not None:
            out = out + b[None, :, None, None]
        return out

    def transpmult(self, g):
        Ci, _, kh, kw = self.w.shape
        B = g.shape[0]
        cols, Hi, Wi = _im2col(g, kh, kw, self.stride, self.padding)
        dx = (cols @ self.w.reshape(Ci, -1).T).reshape(B, Hi, Wi, Ci).transpose(0, 3, 1, 2)
        dw = (self.xmat.T @ cols).reshape(self.w.shape)
        return dx, dw, g.sum(axis=(0, 2, 3))

#
# Spatial plumbing
#

class pad2d_op(op):
    """Zero padding of the two spatial axes by (top, bottom, left, right)."""
    def __init__(self, pads):
        self.pads = tuple(int(p) for p in pads)
    def forward(self, x):
        _check_ndim('pad2d', x, 4)
        t, b, l, r = self.pads
        self.H, self.W = x.shape[2], x.shape[3]
        return numpy.pad(x, ((0, 0), (0, 0), (t, b), (l, r)))
    def transpmult(self, g):
        t, l = self.pads[0], self.pads[2]
        return (g[:, :, t:t + self.H, l:l + self.W],)

class crop2d_op(op):
    def __init__(self, top, left, height, width):
        self.top, self.left, self.height, self.width = top, left, height, width
    def forward(self, x):
        _check_ndim('crop2d', x, 4)
        if self.top + self.height > x.shape[2] or self.left + self.width > x.shape[3]:
            raise RuntimeError('crop2d: window exceeds input extent %dx%d' % (x.shape[2], x.shape[3]))
        self.shape = x.shape
        return x[:, :, self.top:self.top + self.height, self.left:self.left + self.width]
    def transpmult(self, g):
        out = numpy.zeros(self.shape, dtype=g.dtype)
        out[:, :, self.top:self.top + self.height, self.left:self.left + self.width] = g
        return (out,)

def bilinear_matrix(n_out, n_in):
    """Interpolation matrix (n_out, n_in) for half-pixel-centre bilinear
    resampling (align_corners=False)."""
    src = (numpy.arange(n_out) + 0.5)*(n_in/n_out) - 0.5
    src = numpy.clip(src, 0, n_in - 1)
    i0 = numpy.floor(src).astype(int)
    i1 = numpy.minimum(i0 + 1, n_in - 1)
    lam = src - i0
    U = numpy.zeros((n_out, n_in))
    rows = numpy.arange(n_out)
    numpy.add.at(U, (rows, i0), 1 - lam)
    numpy.add.at(U, (rows, i1), lam)
    return U

class upsample_bilinear_op(op):
    def __init__(self, size):
        self.size = tuple(size)
    def forward(self, x):
        _check_ndim('upsample_bilinear', x, 4)
        self.Uh = bilinear_matrix(self.size[0], x.shape[2])
        self.Uw = bilinear_matrix(self.size[1], x.shape[3])
        return self.Uh @ x @ self.Uw.T
    def transpmult(self, g):
        return (self.Uh.T @ g @ self.Uw,)

#
# Functional interface
#

def conv2d(x, weight, bias=None, stride=1, padding=0):
    return conv2d_op(stride, padding)(x, weight, bias)

def conv_transpose2d(x, weight, bias=None, stride=1, padding=0, output_padding=0):
    return conv_transpose2d_op(stride, padding, output_padding)(x, weight, bias)

def instance_norm2d(x, gamma=None, beta=None, eps=1e-5):
    return instance_norm_op(eps)(x, gamma, beta)

def relu(x):
    return relu_op()(x)

def leaky_relu(x, slope=0.2):
    return leaky_relu_op(slope)(x)

def tanh(x):
    return tanh_op()(x)

def softmax_over_channels(x):
    return softmax_op()(x)

def log_softmax_over_channels(x):
    return log_softmax_op()(x)

def pad2d(x, pads):
    return pad2d_op(pads)(x)

def crop2d(x, top, left, height, width):
    return crop2d_op(top, left, height, width)(x)

def upsample_bilinear(x, size):
    return upsample_bilinear_op(size)(x)

def sum(x):
    return sum_op()(x)

def mean(x):
    return mean_op()(x)

def restyle2d(x, r, eps=1e-5):
    return restyle_op(eps)(x, r)
