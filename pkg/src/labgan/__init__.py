"""Data hallucination for domain-generalised segmentation, at desk scale.

The package is organised around two augmentation mechanisms and the training
pipeline that uses them:

- colorlab: exact sRGB <-> CIELAB conversion and random image colour
  augmentation (RICA) in the 8-bit-scaled CIELAB encoding.
- ndtensor: a small dense-tensor library with reverse-mode differentiation.
  Every differentiable operation is an object with a forward action and its
  adjoint (transpmult), so that

    y = conv2d(x, w, b)

  records the node, and loss.backward() later applies the transposed actions
  in reverse order.
- featuregan: the cycle-consistent feature GAN and its training (GBFA).
- segtoy: a procedural segmentation benchmark with a controlled colour shift.
- harness: the three-step pipeline and checkpoint persistence.
- analysis: channel histograms and range overlap between datasets.
"""

__version__ = '1.0.0'

from .log import info, warning, debug
from .util import derive_seed
