"""sRGB <-> CIELAB conversion in the 8-bit-scaled encoding.

Images are numpy arrays with the colour channels last. An RGB image is uint8
with components in [0, 255]; a LAB image is float32 with

  L' = L*255/100,  A' = a + 128,  B' = b + 128,

so that all three channels live on [0, 255]. The colorimetry is the IEC
61966-2-1 sRGB transfer with the D65 white point.
"""

import numpy

# http://www.brucelindbloom.com/index.html?Eqn_RGB_XYZ_Matrix.html
RGB_TO_XYZ = numpy.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
XYZ_TO_RGB = numpy.linalg.inv(RGB_TO_XYZ)

# D65, taken as the image of RGB white so that white maps to a=b=0 exactly
WHITE = RGB_TO_XYZ.sum(axis=1)

_DELTA = 6/29

CHANNELS = 'LAB'


def check_rgb(img):
    img = numpy.asarray(img)
    if img.dtype != numpy.uint8:
        raise TypeError('RGB image must be uint8, not %s' % img.dtype)
    if img.ndim < 1 or img.shape[-1] != 3:
        raise ValueError('RGB image must have 3 components per pixel, got shape %s' % (img.shape,))
    return img

def check_lab(img):
    img = numpy.asarray(img)
    if img.ndim < 1 or img.shape[-1] != 3:
        raise ValueError('LAB image must have 3 components per pixel, got shape %s' % (img.shape,))
    return img

def srgb_to_linear(c):
    return numpy.where(c <= 0.04045, c/12.92, ((c + 0.055)/1.055)**2.4)

def linear_to_srgb(c):
    c = numpy.maximum(c, 0)
    return numpy.where(c <= 0.0031308, 12.92*c, 1.055*c**(1/2.4) - 0.055)

def _f(t):
    return numpy.where(t > _DELTA**3, numpy.cbrt(t), t/(3*_DELTA**2) + 4/29)

def _finv(t):
    return numpy.where(t > _DELTA, t**3, 3*_DELTA**2*(t - 4/29))

def srgb_to_lab8(img):
    """Convert an sRGB uint8 image (..., 3) to the 8-bit-scaled CIELAB
    encoding (float32, same shape)."""
    img = check_rgb(img)
    lin = srgb_to_linear(img.astype(numpy.float64)/255)
    xyz = lin @ RGB_TO_XYZ.T / WHITE
    fx, fy, fz = _f(xyz[..., 0]), _f(xyz[..., 1]), _f(xyz[..., 2])
    lab = numpy.empty(img.shape, dtype=numpy.float64)
    lab[..., 0] = (116*fy - 16) * (255/100)
    lab[..., 1] = 500*(fx - fy) + 128
    lab[..., 2] = 200*(fy - fz) + 128
    return lab.astype(numpy.float32)

def lab8_to_srgb(img):
    """Inverse of srgb_to_lab8. Out-of-gamut colours are clamped in sRGB, and
    the result is rounded to the nearest integer."""
    img = check_lab(img).astype(numpy.float64)
    fy = (img[..., 0]*(100/255) + 16)/116
    fx = fy + (img[..., 1] - 128)/500
    fz = fy - (img[..., 2] - 128)/200
    xyz = numpy.stack([_finv(fx), _finv(fy), _finv(fz)], axis=-1) * WHITE
    rgb = linear_to_srgb(xyz @ XYZ_TO_RGB.T) * 255
    return numpy.floor(numpy.clip(rgb, 0, 255) + 0.5).astype(numpy.uint8)
