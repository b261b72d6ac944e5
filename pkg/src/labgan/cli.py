"""Command-line entry point: `labgan <subcommand> ...`.

Exit status is 0 on success, 1 for malformed arguments (with usage) and 2
for failures at run time (with a one-line diagnostic).
"""

import argparse
import os
import sys

from . import __version__
from .log import logger, info, set_level

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class ArgumentParser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault('allow_abbrev', False)
        argparse.ArgumentParser.__init__(self, *args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, '%s: error: %s\n' % (self.prog, message))


def _ranges(args):
    from .colorlab import RicaRanges
    if args.ranges:
        import json
        with open(args.ranges) as f:
            ranges = RicaRanges.from_dict(json.load(f))
    else:
        ranges = RicaRanges()
    if args.mode:
        ranges.mode = args.mode
    if args.channels:
        ranges.channels = args.channels
    return ranges.validate()

def cmd_augment(args):
    from .colorlab import augment_directory
    manifest = augment_directory(args.in_dir, args.out, args.seed, _ranges(args), workers=args.workers)
    print(manifest)

def cmd_analyze(args):
    from .analysis import channel_distribution, write_histograms, plot_histograms
    dirs = [d for d in args.dirs.split(',') if d]
    if not dirs:
        raise ValueError('--dirs names no directory')
    hists = {d: channel_distribution(d, args.channel, args.n, args.seed, args.bins, args.workers) for d in dirs}
    write_histograms(args.out, hists if len(hists) > 1 else hists[dirs[0]])
    if args.plot:
        plot_histograms({os.path.basename(os.path.normpath(d)) or d: h for d, h in hists.items()}, args.plot,
                        title='channel %s' % args.channel)
    if len(dirs) > 1:
        from .analysis import range_overlap
        ref = hists[dirs[0]]
        for d in dirs[1:]:
            print('%s %s overlap %.4f' % (dirs[0], d, range_overlap(ref, hists[d])))

def cmd_gen_toy(args):
    from .segtoy import gen_toy_dataset
    domain = 'target-shifted' if args.domain == 'target' else args.domain
    gen_toy_dataset(args.n, args.seed, domain, args.classes, (args.size, args.size)).save(args.out)

def _config(args):
    from .harness import load_config
    cfg = load_config(args.config)
    if getattr(args, 'workers', None):
        cfg.workers = args.workers
    return cfg

def _positions(cfg, args):
    return [args.position] if args.position else cfg.positions

def cmd_train_extractor(args):
    from .harness import train_extractor
    train_extractor(_config(args), args.out, show=args.show)

def cmd_train_featuregan(args):
    from .harness import train_featuregan_stage
    cfg = _config(args)
    for p in _positions(cfg, args):
        train_featuregan_stage(cfg, args.out, p, show=args.show)

def cmd_train_final(args):
    from .harness import train_final
    cfg = _config(args)
    for p in _positions(cfg, args):
        train_final(cfg, args.out, p, show=args.show)

def _print_results(results):
    print('%-24s %12s %12s' % ('model', 'source mIoU', 'target mIoU'))
    for name, r in results.items():
        print('%-24s %12.4f %12.4f' % (name, r['source_miou'], r['target_miou']))

def cmd_run_pipeline(args):
    from .harness import run_pipeline
    _print_results(run_pipeline(_config(args), args.out, show=args.show))

def cmd_ablation(args):
    from .harness import run_ablation
    _print_results(run_ablation(_config(args), args.out, show=args.show))

def cmd_rica_ablation(args):
    from .harness import run_rica_ablation, RICA_ARMS
    arms = args.arms.split(',') if args.arms else tuple(RICA_ARMS)
    _print_results(run_rica_ablation(_config(args), args.out, arms, show=args.show))

def cmd_eval(args):
    from .harness import load_checkpoint, segmenter_from_checkpoint
    from .segtoy import load_toy_dataset, evaluate_miou, write_report
    model = segmenter_from_checkpoint(*load_checkpoint(args.model))
    dataset = load_toy_dataset(args.data)
    if dataset.classes != model.cfg.classes:
        raise ValueError('dataset has %d classes but the model %d' % (dataset.classes, model.cfg.classes))
    ious, miou = evaluate_miou(model, dataset, workers=args.workers)
    write_report(args.out, ious, miou)
    print('mIoU %.4f' % miou)

def cmd_gradcheck(args):
    from .testing import REGISTRY, check_all
    names = [args.op] if args.op else sorted(REGISTRY)
    errors = check_all(names, tolerance=args.tolerance, seed=args.seed)
    failed = 0
    for name in names:
        ok = errors[name] < args.tolerance
        failed += not ok
        print('%-28s %.3e %s' % (name, errors[name], 'ok' if ok else 'FAILED'))
    if failed:
        raise RuntimeError('%d of %d gradient checks failed' % (failed, len(names)))

def cmd_params(args):
    from .featuregan import build_generator, build_discriminator, count_params
    from .harness import load_config
    cfg = load_config(args.config, check_widths=False)
    g = count_params(build_generator(cfg.generator))
    d = count_params(build_discriminator(cfg.discriminator))
    print('generator      %10d  (%.3fM)' % (g, g/1e6))
    print('discriminator  %10d  (%.3fM)' % (d, d/1e6))


def build_parser():
    parser = ArgumentParser(prog='labgan', description='Colour and feature hallucination for '
                            'domain-generalised segmentation.')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    parser.add_argument('--quiet', action='store_true', help='only log warnings and errors')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('augment', help='RICA-augment a directory of images')
    p.add_argument('--in', dest='in_dir', required=True, metavar='DIR')
    p.add_argument('--out', required=True, metavar='DIR')
    p.add_argument('--seed', type=int, required=True)
    p.add_argument('--mode', choices=('step1', 'step2', 'both'))
    p.add_argument('--channels', help='subset of LAB to randomise (default all)')
    p.add_argument('--ranges', metavar='FILE', help='JSON file of sampling ranges')
    p.add_argument('--workers', type=int, default=1)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser('analyze', help='channel histograms and overlap of image directories')
    p.add_argument('--dirs', required=True, metavar='D1,D2,...')
    p.add_argument('--channel', required=True, choices=('L', 'A', 'B'))
    p.add_argument('--n', type=int, default=100, help='images sampled per directory')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--bins', type=int, default=64)
    p.add_argument('--out', required=True, metavar='CSV')
    p.add_argument('--plot', metavar='PNG')
    p.add_argument('--workers', type=int, default=1)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser('gen-toy', help='generate a toy segmentation dataset')
    p.add_argument('--out', required=True, metavar='DIR')
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--domain', choices=('source', 'target', 'target-shifted'), default='source')
    p.add_argument('--classes', type=int, default=5)
    p.add_argument('--size', type=int, default=64)
    p.set_defaults(func=cmd_gen_toy)

    for name, func, text in [
            ('train-extractor', cmd_train_extractor, 'step 1: train the segmenter and its extractor'),
            ('train-featuregan', cmd_train_featuregan, 'step 2: train the feature GAN'),
            ('train-final', cmd_train_final, 'step 3: train the segmenter with the generator plugged in'),
            ('run-pipeline', cmd_run_pipeline, 'all steps and the evaluation'),
            ('ablation', cmd_ablation, 'the pipeline in each ablation mode'),
            ('rica-ablation', cmd_rica_ablation, 'the rica-only pipeline per RICA channel and step')]:
        p = sub.add_parser(name, help=text)
        p.add_argument('--config', metavar='FILE', help='JSON config (default: built-in defaults)')
        p.add_argument('--out', required=True, metavar='DIR', help='run directory')
        p.add_argument('--show', type=int, default=1, help='0 silent, 1 per epoch, 2 per step, 3 plots')
        p.add_argument('--workers', type=int)
        if name in ('train-featuregan', 'train-final'):
            p.add_argument('--position', choices=('after_conv1', 'after_stage1', 'after_stage2'))
        if name == 'rica-ablation':
            p.add_argument('--arms', metavar='A1,A2,...', help='RICA variants (default all, L, A, B, step1, step2)')
        p.set_defaults(func=func)

    p = sub.add_parser('eval', help='evaluate a segmenter checkpoint on a dataset directory')
    p.add_argument('--model', required=True, metavar='CKPT')
    p.add_argument('--data', required=True, metavar='DIR')
    p.add_argument('--out', required=True, metavar='CSV')
    p.add_argument('--workers', type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('gradcheck', help='finite-difference checks of the differentiable operations')
    p.add_argument('--op', metavar='NAME')
    p.add_argument('--tolerance', type=float, default=1e-3)
    p.add_argument('--seed', type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser('params', help='parameter counts of the configured generator and discriminator')
    p.add_argument('--config', metavar='FILE')
    p.set_defaults(func=cmd_params)
    return parser


def dispatch(argv=None):
    """Run one command; returns the exit status."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # usage errors, --help and --version
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    if args.quiet:
        set_level('WARNING')
    try:
        args.func(args)
    except (ValueError, TypeError, RuntimeError, OSError, FloatingPointError, KeyError) as e:
        logger.error('labgan %s: error: %s', args.command, e)
        return EXIT_RUNTIME
    info('labgan %s: done', args.command)
    return 0

def main():
    sys.exit(dispatch())

if __name__ == '__main__':
    main()
