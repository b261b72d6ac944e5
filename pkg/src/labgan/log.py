"""Logging helpers. All diagnostics go through the 'labgan' logger; the level
is taken from $LABGAN_LOGLEVEL (default INFO)."""

import logging
import os

logger = logging.getLogger('labgan')

if not logger.handlers:
    _handler = logging.StreamHandler()
    _handler.setFormatter(logging.Formatter('%(message)s'))
    logger.addHandler(_handler)
    logger.setLevel(os.environ.get('LABGAN_LOGLEVEL', 'INFO').upper())
    logger.propagate = False


def info(msg, *args):
    logger.info(msg, *args)

def warning(msg, *args):
    logger.warning(msg, *args)

def debug(msg, *args):
    logger.debug(msg, *args)

def set_level(level):
    logger.setLevel(level)


def report(name, msg, steps, cputime, loss, show=1):
    """One progress line in the format of the training loops."""
    if show >= 1:
        info('%s %s [steps=%d, time=%.2fs, loss=%.3e]', name, msg, steps, cputime, loss)

def plot_curve(curves, title, path, show=3):
    """Write a log-scale loss plot to path when show == 3 and $LABGAN_NOPLOT
    is unset. curves is a dict label -> sequence of values."""
    if show != 3 or 'LABGAN_NOPLOT' in os.environ:
        return None
    import matplotlib
    matplotlib.use('Agg')
    from matplotlib import pyplot
    fig = pyplot.figure('%s (show=3)' % title)
    for label, values in curves.items():
        pyplot.semilogy(values, label=label)
    pyplot.xlabel('step')
    pyplot.legend()
    pyplot.title(title)
    fig.savefig(path)
    pyplot.close(fig)
    debug('wrote %s', path)
    return path
