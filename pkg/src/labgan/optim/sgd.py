def momentum_sgd(x, g, state, lr, t, momentum=0.9, weight_decay=1e-4):
    """Heavy-ball SGD with L2 weight decay, in place on x."""
    if weight_decay:
        g = g + weight_decay*x
    if momentum:
        buf = state.get('momentum')
        buf = g.copy() if buf is None else momentum*buf + g
        state['momentum'] = buf
        g = buf
    x -= lr*g
