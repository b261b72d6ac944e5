"""Base class for optimizers."""

import numpy


class optimizer(object):
    """Applies self.method to every trainable parameter. params is either a
    list of tensors or a list of (tensors, lr_multiplier) groups.

    The learning rate follows the polynomial policy

      lr_t = lr * (1 - t/max_steps)**power,

    which is the constant rate when power == 0 or max_steps is None. Frozen
    parameters (requires_grad False) are skipped, and a trainable parameter
    without a gradient is updated with a zero gradient. The state (momentum,
    moments) is kept in float32 so that checkpoints restore it exactly."""

    def __init__(self, params, lr=1e-2, max_steps=None, power=0.0, name=None, **kwargs):
        params = list(params)
        if params and isinstance(params[0], tuple):
            self.groups = [(list(ps), float(mult)) for ps, mult in params]
        else:
            self.groups = [(params, 1.0)]
        if lr <= 0:
            raise ValueError('learning rate must be positive, got %g' % lr)
        self.base_lr = lr
        self.max_steps = max_steps
        self.power = power
        self.kwargs = kwargs
        self.name = name if name else self.__class__.__name__
        self.t = 0
        self.state = [[{} for _ in ps] for ps, _ in self.groups]

    @property
    def lr(self):
        if not self.power or not self.max_steps:
            return self.base_lr
        return self.base_lr * max(1 - self.t/self.max_steps, 0.0)**self.power

    def params(self):
        return [p for ps, _ in self.groups for p in ps]

    def zero_grad(self):
        for p in self.params():
            p.grad = None

    def step(self):
        lr = self.lr
        for (ps, mult), states in zip(self.groups, self.state):
            for p, st in zip(ps, states):
                if not p.requires_grad:
                    continue
                g = numpy.zeros(p.shape) if p.grad is None else p.grad.astype(numpy.float64)
                x = p.data.astype(numpy.float64)
                self.method(x, g, st, lr*mult, self.t + 1, **self.kwargs)
                p.data[...] = x
                for key in st:
                    st[key] = numpy.asarray(st[key], dtype=numpy.float32)
        self.t += 1

    def state_dict(self):
        """Flat {name: array} view of the optimizer state, for checkpoints."""
        out = {'t': numpy.array([self.t], dtype=numpy.float32)}
        for gi, states in enumerate(self.state):
            for pi, st in enumerate(states):
                for key, val in st.items():
                    out['%d.%d.%s' % (gi, pi, key)] = numpy.asarray(val, dtype=numpy.float32)
        return out

    def load_state_dict(self, state):
        self.t = int(state['t'][0])
        for key, val in state.items():
            if key == 't':
                continue
            gi, pi, name = key.split('.', 2)
            self.state[int(gi)][int(pi)][name] = numpy.array(val, dtype=numpy.float32)

    def __str__(self):
        return '<%s lr=%g t=%d on %d parameters>' % (self.name, self.lr, self.t, len(self.params()))
