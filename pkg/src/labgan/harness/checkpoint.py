"""Binary checkpoints of named float32 arrays.

Layout (little endian):

  b"SHAL"  uint32 version  uint32 len  metadata JSON  uint32 count
  count x [ uint16 len  name  uint8 ndim  ndim x uint32  uint64 nbytes  float32 payload ]
"""

import json
import struct
from collections import OrderedDict

import numpy

from ..util import atomic_write

MAGIC = b'SHAL'
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode_checkpoint(arrays, metadata=None):
    out = [MAGIC, struct.pack('<I', VERSION)]
    meta = json.dumps(metadata or {}, sort_keys=True).encode('utf-8')
    out += [struct.pack('<I', len(meta)), meta, struct.pack('<I', len(arrays))]
    for name, arr in arrays.items():
        arr = numpy.asarray(arr)
        if arr.dtype.kind not in 'fiub':
            raise CheckpointError('array %s has dtype %s, not storable as float32' % (name, arr.dtype))
        key = name.encode('utf-8')
        payload = arr.astype('<f4').tobytes()
        out += [struct.pack('<H', len(key)), key, struct.pack('<B', arr.ndim),
                struct.pack('<%dI' % arr.ndim, *arr.shape), struct.pack('<Q', len(payload)), payload]
    return b''.join(out)


class _reader(object):
    def __init__(self, buf, source):
        self.buf, self.pos, self.source = buf, 0, source

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise CheckpointError('%s: truncated while reading %s (need %d bytes, %d left)'
                                  % (self.source, what, n, len(self.buf) - self.pos))
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_checkpoint(buf, source='<bytes>'):
    r = _reader(buf, source)
    magic = r.take(4, 'magic')
    if magic != MAGIC:
        raise CheckpointError('%s: bad magic %r' % (source, magic))
    version, = r.unpack('<I', 'version')
    if version != VERSION:
        raise CheckpointError('%s: unsupported checkpoint version %d (expected %d)' % (source, version, VERSION))
    n, = r.unpack('<I', 'metadata length')
    try:
        metadata = json.loads(r.take(n, 'metadata').decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError('%s: corrupt metadata (%s)' % (source, e))
    count, = r.unpack('<I', 'array count')
    arrays = OrderedDict()
    for i in range(count):
        ln, = r.unpack('<H', 'name of array %d' % i)
        name = r.take(ln, 'name of array %d' % i).decode('utf-8', errors='replace')
        ndim, = r.unpack('<B', 'array %s' % name)
        shape = r.unpack('<%dI' % ndim, 'shape of array %s' % name)
        nbytes, = r.unpack('<Q', 'array %s' % name)
        expected = 4*int(numpy.prod(shape, dtype=numpy.int64))
        if nbytes != expected:
            raise CheckpointError('%s: array %s has %d bytes but shape %s needs %d'
                                  % (source, name, nbytes, shape, expected))
        payload = r.take(nbytes, 'payload of array %s' % name)
        arrays[name] = numpy.frombuffer(payload, dtype='<f4').astype(numpy.float32).reshape(shape)
    if r.pos != len(buf):
        raise CheckpointError('%s: %d trailing bytes after the last array' % (source, len(buf) - r.pos))
    return arrays, metadata


def save_checkpoint(path, arrays, metadata=None):
    """Atomically write arrays (name -> array) and a JSON-able metadata dict."""
    atomic_write(path, encode_checkpoint(arrays, metadata))
    return path

def load_checkpoint(path):
    """Returns (arrays, metadata)."""
    with open(path, 'rb') as f:
        return decode_checkpoint(f.read(), str(path))
