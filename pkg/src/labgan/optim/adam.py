from math import sqrt


def adam(x, g, state, lr, t, beta1=0.5, beta2=0.999, eps=1e-8):
    """Adam with bias correction, in place on x. The default beta1 = 0.5 is the
    usual setting for adversarial training."""
    m = state.get('m')
    v = state.get('v')
    m = (1 - beta1)*g if m is None else beta1*m + (1 - beta1)*g
    v = (1 - beta2)*g*g if v is None else beta2*v + (1 - beta2)*g*g
    state['m'], state['v'] = m, v
    step = lr*sqrt(1 - beta2**t)/(1 - beta1**t)
    x -= step*m/((v**0.5) + eps)
