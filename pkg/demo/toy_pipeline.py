"""The three training steps at toy scale, in a temporary run directory.

Step 1 trains a segmenter with RICA copies, step 2 a feature GAN on its
first-layer features, and step 3 a segmenter with the frozen generator plugged
in after that layer. Both segmenters are scored on held-out source images and
on the colour-shifted target domain.
"""

import tempfile

from labgan.harness import PipelineConfig, run_pipeline

cfg = PipelineConfig.from_dict(dict(
    mode='full', image_size=32, train_images=16, test_images=8,
    step1=dict(epochs=3, batch_size=4),
    step2=dict(steps=20, batch_size=4),
    step3=dict(epochs=3, batch_size=4),
))

with tempfile.TemporaryDirectory() as run_dir:
    results = run_pipeline(cfg, run_dir, show=1)

for name, r in results.items():
    print('%-20s source mIoU %.3f  target mIoU %.3f' % (name, r['source_miou'], r['target_miou']))
