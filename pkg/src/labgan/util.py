import os
import tempfile

import numpy


def as_size(size):
    """Image extents as an (H, W) pair of ints; a single number means a
    square image."""
    if isinstance(size, str):
        raise TypeError('image size must be a number or an (H, W) pair, not %r' % size)
    if numpy.ndim(size) == 0:
        return int(size), int(size)
    extents = tuple(int(s) for s in size)
    if len(extents) != 2:
        raise ValueError('image size must have two extents, got %d' % len(extents))
    return extents

def wrap_in_list(obj, types=object, name='value'):
    """A config value that may be a single item or a list of items, as a list.
    None gives the empty list. Items not of `types` raise TypeError naming
    the option."""
    if obj is None:
        return []
    items = list(obj) if isinstance(obj, (list, tuple)) else [obj]
    for item in items:
        if not isinstance(item, types):
            raise TypeError('%s: expected %s, got %s' % (name, getattr(types, '__name__', types),
                                                         type(item).__name__))
    return items

def derive_seed(seed, *index):
    """Return a 32-bit seed derived from (seed, *index). The derivation depends
    only on the arguments, so items processed in any order or on any worker get
    the same stream."""
    ss = numpy.random.SeedSequence([int(seed)] + [int(i) for i in index])
    return int(ss.generate_state(1, dtype=numpy.uint32)[0])

def rng_for(seed, *index):
    return numpy.random.default_rng(numpy.random.SeedSequence([int(seed)] + [int(i) for i in index]))

def atomic_write(path, data, mode='wb'):
    """Write data to path by writing a temporary file in the same directory and
    renaming it into place."""
    path = os.fspath(path)
    dirname = os.path.dirname(os.path.abspath(path))
    os.makedirs(dirname, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=dirname, prefix='.tmp-')
    try:
        with os.fdopen(fd, mode) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
