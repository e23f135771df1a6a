"""Command line interface: `mindcap <verb> [options]`."""
import argparse
import json as _json
import logging
import os
import sys

from ..config import ConfigError, load_config
from ..metrics import MetricError
from .ablation import ablate
from .pipeline import RECORD_FILE, STAGES, Pipeline, RunRecord, StageError
from .report import ReportError, render_table, report
from .sweep import noise_sweep

logger = logging.getLogger(__name__)

STAGE_VERBS = {
    'make-synth': 'synth',
    'pretrain-lm': 'lm',
    'pretrain-vlp': 'vlp',
    'pretrain': 'bed',
    'train': 'blm',
    'caption': 'caption',
    'eval': 'eval',
    'recon': 'recon',
}


def _common(parser):
    parser.add_argument('--config', help='YAML configuration file.')
    parser.add_argument('--profile', choices=('desk', 'paper-scale'), help='Configuration profile.')
    parser.add_argument('--seed', type=int, help='Global seed.')
    parser.add_argument('--deterministic', action=argparse.BooleanOptionalAction, default=None,
                        help='Deterministic single threaded torch algorithms.')
    parser.add_argument('--out', default='runs/default', help='Run directory.')
    parser.add_argument('--set', action='append', default=[], metavar='SECTION.KEY=VALUE', help='Configuration override.')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='Debug logs.')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='Warnings and errors only.')


def build_parser():
    parser = argparse.ArgumentParser(prog='mindcap', description='Desk-scale brain captioning and caption-conditioned reconstruction.')
    verbs = parser.add_subparsers(dest='verb', required=True)
    for verb, stage in STAGE_VERBS.items():
        sub = verbs.add_parser(verb, help=f'Run the pipeline up to the {stage} stage.')
        _common(sub)
        if verb == 'caption':
            sub.add_argument('--strategy', choices=('greedy', 'beam'), help='Decoding strategy.')
            sub.add_argument('--beam-width', type=int, help='Beam width.')
        if verb == 'eval':
            sub.add_argument('--candidates', help='Captions JSONL (stimulus_id, caption) to evaluate against the test references.')
        if verb == 'recon':
            sub.add_argument('--split', choices=('test',), default='test', help='Split to reconstruct.')
            sub.add_argument('--strength', type=float, help='Diffusion strength in [0, 1].')
            sub.add_argument('--steps', type=int, help='Diffusion steps.')
    sub = verbs.add_parser('noise-sweep', help='Caption metrics under increasing fMRI noise.')
    _common(sub)
    sub.add_argument('--subject', help='Subject id.')
    sub.add_argument('--coeffs', type=float, nargs='+', help='Noise coefficients.')
    sub = verbs.add_parser('ablate', help='Component ablations.')
    _common(sub)
    sub.add_argument('--subject', help='Subject id.')
    sub.add_argument('--variants', nargs='+', help='Captioning ablation variants.')
    sub = verbs.add_parser('report', help='Render tables, JSON and plots of run records.')
    _common(sub)
    sub.add_argument('runs', nargs='+', help='Run directories.')
    sub.add_argument('--no-plots', action='store_true', help='Skip plots.')
    return parser


def _setup_logging(args):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def _overrides(args):
    overrides = list(args.set)
    if getattr(args, 'strategy', None):
        overrides.append(f'blm.decode_strategy={args.strategy}')
    if getattr(args, 'beam_width', None):
        overrides.append(f'blm.beam_width={args.beam_width}')
    if getattr(args, 'strength', None) is not None:
        overrides.append(f'recon.strength={args.strength}')
    if getattr(args, 'steps', None):
        overrides.append(f'recon.steps={args.steps}')
    return overrides


def _evaluate_candidates(pipeline, path):
    with open(path) as fid:
        records = {r['stimulus_id']: r['caption'] for r in (_json.loads(line) for line in fid if line.strip())}
    ids = pipeline.dataset.stimulus_ids('test')
    missing = [s for s in ids if s not in records]
    if missing:
        raise StageError('eval', f'{len(missing)} test stimuli have no candidate caption in {path}.')
    name = os.path.splitext(os.path.basename(path))[0]
    result = pipeline.evaluate([records[s] for s in ids], name, subject=name)
    result.save(os.path.splitext(path)[0] + '.report.json')
    print(result)


def run(args):
    if args.verb == 'report':
        records = [RunRecord.load(os.path.join(run_dir, RECORD_FILE)) for run_dir in args.runs]
        paths = report(records, args.out, plots=not args.no_plots)
        with open(paths['text']) as fid:
            print(fid.read())
        return
    config = load_config(args.config, profile=args.profile, overrides=_overrides(args), seed=args.seed,
                         deterministic=args.deterministic)
    pipeline = Pipeline(config, args.out)
    if args.verb in STAGE_VERBS:
        stage = STAGE_VERBS[args.verb]
        if stage == 'recon' and not config.recon.enabled:
            raise ConfigError('Reconstruction is disabled by recon.enabled.')
        pipeline.run(stages=STAGES[:STAGES.index(stage) + 1])
        if args.verb == 'eval' and args.candidates:
            _evaluate_candidates(pipeline, args.candidates)
        return
    pipeline.run(stages=STAGES[:STAGES.index('caption') + 1])
    if args.verb == 'noise-sweep':
        rows = noise_sweep(pipeline, coeffs=args.coeffs, subject=args.subject)
        print(f'{len(rows)} noise sweep rows written.')
    elif args.verb == 'ablate':
        for family, reports in ablate(pipeline, variants=args.variants, subject=args.subject).items():
            print(f'{family}:\n{render_table(reports)}')


def main(argv=None):
    args = build_parser().parse_args(argv)
    _setup_logging(args)
    try:
        run(args)
    except (ConfigError, ValueError) as e:
        logger.error(f'Invalid configuration or arguments: {e}')
        return 2
    except (StageError, MetricError, ReportError, OSError) as e:
        logger.error(str(e))
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
