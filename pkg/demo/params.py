"""Parameter counts of the full-scale feature generator and discriminator
(64 feature channels, nine residual blocks, C64-C128-C256-C512)."""

import os

from labgan.harness import load_config
from labgan.featuregan import build_generator, build_discriminator, count_params
from labgan.testing import check_expected

cfg = load_config(os.path.join(os.path.dirname(os.path.abspath(__file__)), 'full.json'))
g = count_params(build_generator(cfg.generator))
d = count_params(build_discriminator(cfg.discriminator))
print('generator %d (%.2fM), discriminator %d (%.2fM)' % (g, g/1e6, d, d/1e6))

check_expected('generator', g, 11.37e6, rtol=0.01)
check_expected('discriminator', d, 2.83e6, rtol=0.01)
