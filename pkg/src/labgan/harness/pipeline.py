"""The three-step training pipeline.

  step 1  train a segmenter (with RICA copies unless the mode excludes them);
          its first block is the feature extractor F
  step 2  train the feature GAN on F's features of two RICA styles of the
          same images, F frozen
  step 3  train a segmenter with the frozen generator G_AB plugged in after F

Every stage writes its checkpoint under the run directory and is skipped
when a checkpoint written by the same configuration already exists, so an
interrupted run resumes where it stopped. Steps 2 and 3 run once per
generator position.

Run directory:

  config.json
  step1/segmenter.shal  train_log.csv  [rica_manifest.csv]
  step2/<position>/featuregan.shal  losses.csv
  step3/<position>/segmenter.shal  train_log.csv  [rica_manifest.csv]
  reports/summary.csv  [positions.csv]  <model>_<set>.csv
"""

import csv
import io
import json
import os
from dataclasses import replace

from ..log import info, warning
from ..util import derive_seed, atomic_write
from ..featuregan import FeatureGanBundle, GeneratorConfig, train_featuregan, build_generator
from ..segtoy import SegmenterConfig, gen_toy_dataset, build_segmenter, train_segmenter, evaluate_miou, format_report
from .checkpoint import CheckpointError, save_checkpoint, load_checkpoint
from .config import MODES, config_hash


class MissingStage(RuntimeError):
    pass


SEGMENTER_FILE = 'segmenter.shal'
FEATUREGAN_FILE = 'featuregan.shal'


def stage_dir(run_dir, step, position=None):
    parts = [run_dir, step] + ([position] if position else [])
    return os.path.join(*parts)

def _metadata(cfg, **extra):
    d = dict(config_hash=config_hash(cfg), seed=cfg.seed, mode=cfg.mode)
    d.update(extra)
    return d

def _existing(path, cfg, stage):
    """Load path if it exists and was written by this configuration."""
    if not os.path.exists(path):
        return None
    arrays, metadata = load_checkpoint(path)
    if metadata.get('config_hash') != config_hash(cfg):
        warning('%s: checkpoint %s is from another configuration, retraining', stage, path)
        return None
    info('%s: resuming from %s', stage, path)
    return arrays, metadata

def _require(path, stage, command):
    if not os.path.exists(path):
        raise MissingStage('stage %s has no checkpoint at %s; run %s first' % (stage, path, command))
    return load_checkpoint(path)


def make_datasets(cfg):
    """(train, held-out source, target-shifted) toy sets of the config."""
    size = (cfg.image_size, cfg.image_size)
    train = gen_toy_dataset(cfg.train_images, cfg.data_seed, 'source', cfg.classes, size)
    test_source = gen_toy_dataset(cfg.test_images, cfg.test_seed, 'source', cfg.classes, size)
    test_target = gen_toy_dataset(cfg.test_images, cfg.test_seed, 'target-shifted', cfg.classes, size)
    return train, test_source, test_target


def segmenter_metadata(cfg, model, stage, epochs):
    return _metadata(cfg, kind='segmenter', stage=stage, position=model.position, epochs=epochs,
                     segmenter=model.cfg.to_dict(),
                     generator=model.G.cfg.to_dict() if model.G is not None else None)

def segmenter_from_checkpoint(arrays, metadata):
    """Rebuild a (possibly generator-carrying) segmenter from its checkpoint;
    the metadata carries everything needed to build it."""
    if metadata.get('kind') != 'segmenter':
        raise CheckpointError('not a segmenter checkpoint (kind %r)' % metadata.get('kind'))
    position = metadata.get('position', 'none')
    G = None
    if position != 'none':
        G = build_generator(GeneratorConfig.from_dict(metadata['generator']))
    model = build_segmenter(SegmenterConfig.from_dict(metadata['segmenter']), position, G)
    model.load_state_dict(arrays)
    return model


def train_extractor(cfg, run_dir, train=None, show=1):
    """Step 1. Returns the trained segmenter."""
    out = stage_dir(run_dir, 'step1')
    path = os.path.join(out, SEGMENTER_FILE)
    found = _existing(path, cfg, 'step1')
    if found:
        return segmenter_from_checkpoint(*found)
    if train is None:
        train = make_datasets(cfg)[0]
    opts = dict(cfg.step1)
    epochs = opts.pop('epochs')
    seed = derive_seed(cfg.seed, 1)
    model = build_segmenter(cfg.segmenter, seed=derive_seed(seed, 0))
    train_segmenter(model, train, cfg.rica if cfg.uses_rica else None, epochs, seed,
                    log_path=os.path.join(out, 'train_log.csv'),
                    manifest_path=os.path.join(out, 'rica_manifest.csv'),
                    workers=cfg.workers, show=show, name='Step1', **opts)
    save_checkpoint(path, model.state_dict(), segmenter_metadata(cfg, model, 'step1', epochs))
    return model


def train_featuregan_stage(cfg, run_dir, position, train=None, show=1):
    """Step 2 for one generator position. Needs the Step 1 checkpoint."""
    out = stage_dir(run_dir, 'step2', position)
    path = os.path.join(out, FEATUREGAN_FILE)
    found = _existing(path, cfg, 'step2')
    if found:
        return FeatureGanBundle.from_checkpoint(*found)
    arrays, metadata = _require(os.path.join(stage_dir(run_dir, 'step1'), SEGMENTER_FILE),
                                'step1', 'train-extractor')
    segmenter = segmenter_from_checkpoint(arrays, metadata)
    extractor = segmenter.extractor(position).freeze()
    if train is None:
        train = make_datasets(cfg)[0]
    opts = dict(cfg.step2)
    steps = opts.pop('steps')
    augment_both = opts.pop('gbfa_uses_rica') or cfg.mode == 'full'
    gen_cfg, disc_cfg = cfg.generator_for(position)
    seed = derive_seed(cfg.seed, 2, cfg.positions.index(position))
    bundle, _ = train_featuregan(extractor, list(train.images), cfg.rica, gen_cfg, disc_cfg,
                                 seed=seed, steps=steps, log_path=os.path.join(out, 'losses.csv'),
                                 augment_both=augment_both, workers=cfg.workers, show=show, **opts)
    save_checkpoint(path, bundle.state_dict(), _metadata(cfg, position=position, **bundle.metadata()))
    return bundle


def train_final(cfg, run_dir, position, train=None, show=1):
    """Step 3 for one generator position: a segmenter with the frozen G_AB
    after F. Needs the Step 1 and Step 2 checkpoints."""
    out = stage_dir(run_dir, 'step3', position)
    path = os.path.join(out, SEGMENTER_FILE)
    found = _existing(path, cfg, 'step3')
    if found:
        return segmenter_from_checkpoint(*found)
    s1_arrays, _ = _require(os.path.join(stage_dir(run_dir, 'step1'), SEGMENTER_FILE),
                            'step1', 'train-extractor')
    s2_arrays, s2_meta = _require(os.path.join(stage_dir(run_dir, 'step2', position), FEATUREGAN_FILE),
                                  'step2', 'train-featuregan')
    G = FeatureGanBundle.from_checkpoint(s2_arrays, s2_meta).G_AB
    seed = derive_seed(cfg.seed, 3, cfg.positions.index(position))
    model = build_segmenter(cfg.segmenter, position, G, seed=derive_seed(seed, 0))
    if cfg.step3_reinit:
        prefix = model.extractor(position).named_parameters()
        keep = {name for name, _ in prefix} if cfg.step3_freeze_extractor else set()
        model.load_state_dict({k: v for k, v in s1_arrays.items() if k in keep}, strict=False)
    else:
        model.load_state_dict(s1_arrays, strict=False)
    if cfg.step3_freeze_extractor:
        model.extractor(position).freeze()
    if train is None:
        train = make_datasets(cfg)[0]
    opts = dict(cfg.step3)
    epochs = opts.pop('epochs')
    train_segmenter(model, train, cfg.rica if cfg.uses_rica else None, epochs, seed,
                    log_path=os.path.join(out, 'train_log.csv'),
                    manifest_path=os.path.join(out, 'rica_manifest.csv'),
                    workers=cfg.workers, show=show, name='Step3', **opts)
    save_checkpoint(path, model.state_dict(), segmenter_metadata(cfg, model, 'step3', epochs))
    return model


def format_table(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([('%.6f' % v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()

def evaluate_model(cfg, name, model, test_source, test_target, reports):
    result = {}
    for set_name, dataset in (('source', test_source), ('target', test_target)):
        ious, miou = evaluate_miou(model, dataset, workers=cfg.workers)
        atomic_write(os.path.join(reports, '%s_%s.csv' % (name, set_name)), format_report(ious, miou).encode())
        result[set_name + '_miou'] = miou
        result[set_name + '_ious'] = ious
    info('%-24s source mIoU %.4f  target mIoU %.4f', name, result['source_miou'], result['target_miou'])
    return result


def run_pipeline(cfg, run_dir, show=1):
    """Run every stage the mode needs and evaluate the resulting models on
    the held-out source set and the target-shifted set. Returns a dict
    model name -> evaluation; the last model is the final one."""
    cfg = cfg.validate()
    os.makedirs(run_dir, exist_ok=True)
    atomic_write(os.path.join(run_dir, 'config.json'),
                 (json.dumps(dict(cfg.to_dict(), config_hash=config_hash(cfg)), indent=2, sort_keys=True)
                  + '\n').encode())
    reports = os.path.join(run_dir, 'reports')
    os.makedirs(reports, exist_ok=True)
    info('pipeline %s in %s (config %s)', cfg.mode, run_dir, config_hash(cfg))

    train, test_source, test_target = make_datasets(cfg)
    results = {}
    model = train_extractor(cfg, run_dir, train, show)
    results['step1'] = evaluate_model(cfg, 'step1', model, test_source, test_target, reports)

    if cfg.uses_gbfa:
        for position in cfg.positions:
            train_featuregan_stage(cfg, run_dir, position, train, show)
            model = train_final(cfg, run_dir, position, train, show)
            name = 'step3_' + position
            results[name] = evaluate_model(cfg, name, model, test_source, test_target, reports)
        atomic_write(os.path.join(reports, 'positions.csv'), format_table(
            ['position', 'source_miou', 'target_miou'],
            [(p, results['step3_' + p]['source_miou'], results['step3_' + p]['target_miou'])
             for p in cfg.positions]).encode())

    atomic_write(os.path.join(reports, 'summary.csv'), format_table(
        ['model', 'source_miou', 'target_miou'],
        [(name, r['source_miou'], r['target_miou']) for name, r in results.items()]).encode())
    return results


def run_ablation(cfg, out_dir, modes=MODES, show=1):
    """Run the pipeline once per ablation mode in out_dir/<mode> and write
    out_dir/reports/ablation.csv with the final model of each."""
    rows, summary = [], {}
    for mode in modes:
        results = run_pipeline(replace(cfg, mode=mode), os.path.join(out_dir, mode), show)
        final = results[list(results)[-1]]
        summary[mode] = final
        rows.append((mode, final['source_miou'], final['target_miou']))
    atomic_write(os.path.join(out_dir, 'reports', 'ablation.csv'),
                 format_table(['mode', 'source_miou', 'target_miou'], rows).encode())
    return summary


# RICA variants: one channel at a time, or one of the two randomisation steps
RICA_ARMS = {
    'all': dict(),
    'L': dict(channels='L'),
    'A': dict(channels='A'),
    'B': dict(channels='B'),
    'step1': dict(mode='step1'),
    'step2': dict(mode='step2'),
}

def run_rica_ablation(cfg, out_dir, arms=tuple(RICA_ARMS), show=1):
    """Run the rica-only pipeline once per RICA variant in out_dir/rica-<arm>
    and write out_dir/reports/rica_ablation.csv."""
    unknown = [a for a in arms if a not in RICA_ARMS]
    if unknown:
        raise ValueError('unknown RICA ablation arm(s) %s (expected some of %s)'
                         % (', '.join(unknown), ', '.join(RICA_ARMS)))
    rows, summary = [], {}
    for arm in arms:
        rica = replace(cfg.rica, **RICA_ARMS[arm])
        run_dir = os.path.join(out_dir, 'rica-' + arm)
        final = run_pipeline(replace(cfg, mode='rica-only', rica=rica), run_dir, show)['step1']
        summary[arm] = final
        rows.append((arm, rica.channels, rica.mode, final['source_miou'], final['target_miou']))
    atomic_write(os.path.join(out_dir, 'reports', 'rica_ablation.csv'), format_table(
        ['arm', 'channels', 'rica_mode', 'source_miou', 'target_miou'], rows).encode())
    return summary
