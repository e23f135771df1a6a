"""Component ablations of brain captioning and of the reconstruction path."""
import json as _json
import logging
import os

import numpy as _np
import torch

from ..blm import decode, load_blm, train_blm
from ..config import ABLATION_VARIANTS
from ..metrics import TEXT_METRICS, evaluate_images, identification_null, two_way_identification
from ..recon import fit_ridge
from .pipeline import StageError
from .report import render_table

logger = logging.getLogger(__name__)

RECON_VARIANTS = ('sketch', 'diffusion', 'caption')
_TRAINED = {
    'wo_ssbed': {'pretrained': False},
    'wo_lopt': {'objective': 'feature'},
    'm1': {'captions_per_stimulus': 1},
    'm3': {'captions_per_stimulus': 3},
}


def linear_prefix_captions(pipeline, subject):
    """Captions decoded from prefix embeddings linearly regressed from the voxels.

    The ridge targets are the frozen stack query embeddings of the ground-truth training image
    features, flattened; no brain encoder and no querying transformer are involved at test time.
    """
    dataset, frozen = pipeline.dataset, pipeline.frozen
    cfg, recon = pipeline.config.blm, pipeline.config.recon
    with torch.no_grad():
        targets = frozen.queries_from_image(torch.from_numpy(dataset.image_features('train').astype('float32'))).numpy()
    shape = targets.shape[1:]
    voxels, stimuli, _ = dataset.trials(subject, 'train')
    ridge = fit_ridge(voxels, targets.reshape(len(targets), -1)[stimuli], ridge_lambda=recon.ridge_lambda,
                      grid=recon.ridge_grid, folds=recon.ridge_folds, seed=pipeline.seed('ablation', 'linear', subject))
    prefix = ridge.predict(dataset.averaged(subject, 'test')).reshape((-1,) + shape)
    return decode(frozen.lm, frozen.vocabulary, torch.from_numpy(prefix.astype('float32')), cfg.decode_strategy,
                  cfg.beam_width, cfg.max_caption_len)


def variant_captions(pipeline, variant, subject):
    if variant == 'wo_be_btformer':
        return linear_prefix_captions(pipeline, subject)
    if variant == 'full':
        blm, statistics = load_blm(pipeline.workspace.load_checkpoint(f'blm_{subject}', 'blm', 'ablate'))
    else:
        bed = pipeline.workspace.load_checkpoint('bed', 'bed', 'ablate')
        checkpoint = train_blm(pipeline.dataset, bed, pipeline.frozen, pipeline.config.blm, subject,
                               seed=pipeline.seed('blm', subject), standardize=pipeline.config.data.standardize,
                               **_TRAINED[variant])
        blm, statistics = load_blm(checkpoint)
    return pipeline.caption(blm, statistics, subject)


def reconstruction_images(pipeline, subject):
    """Sketch-only, unconditioned diffusion and caption-conditioned test reconstructions of `subject`.

    Returns:
        (dict) variant name to (n, H, W, 3) images, in test stimulus order.

    """
    dataset = pipeline.dataset
    cfg = pipeline.config.recon
    components = pipeline.recon_components(subject)
    captions = pipeline.read_captions(subject)
    vocabulary = pipeline.frozen.vocabulary
    max_len = pipeline.config.blm.max_caption_len
    images = {v: [] for v in RECON_VARIANTS}
    for stim, fmri, caption in zip(dataset.stimulus_ids('test'), dataset.averaged(subject, 'test'), captions):
        seed = pipeline.seed('recon', stim)
        sketch = components.reconstruct(fmri, None, vocabulary, cfg, seed=seed, max_len=max_len, strength=0.)
        images['sketch'].append(sketch.sketch)
        images['diffusion'].append(components.reconstruct(fmri, None, vocabulary, cfg, seed=seed, max_len=max_len).image)
        images['caption'].append(components.reconstruct(fmri, caption, vocabulary, cfg, seed=seed, max_len=max_len).image)
    return {v: _np.stack(images[v]) for v in RECON_VARIANTS}


def reconstruction_reports(pipeline, subject, images=None):
    """Image reports of the sketch-only, unconditioned diffusion and caption-conditioned reconstructions."""
    images = reconstruction_images(pipeline, subject) if images is None else images
    low, high = pipeline.extractors()
    targets = pipeline.dataset.images('test')
    return {
        v: evaluate_images(images[v], targets, low, high, pipeline.config.metrics, {
            'split': 'test', 'seed': pipeline.config.seed, 'config_hash': pipeline.record.config_hash,
            'name': f'recon_{v}', 'subject': subject,
        }) for v in RECON_VARIANTS
    }


def identification_margin(pipeline, recons, subject):
    """Distance of high-level two-way identification to its shuffled pairing null, in null standard deviations."""
    _, high = pipeline.extractors()
    targets = pipeline.dataset.images('test')
    null = identification_null(recons, targets, high, pipeline.config.metrics.n_permutations,
                               seed=pipeline.seed('identification_null', subject))
    score = two_way_identification(recons, targets, high)
    margin = (score - null.mean()) / max(null.std(), 1e-12)
    logger.info(f'High-level identification {score:.2f}%, shuffled pairing null {null.mean():.2f} ± {null.std():.2f}.')
    return margin


def _check_ordering(reports, reference, metrics, family):
    for name, report in reports.items():
        worse = [m for m in metrics if name != reference and m in report.metrics and report[m] > reports[reference][m]]
        if worse:
            logger.warning(f'{family} ablation {name} exceeds {reference} on {worse}.')


def _fail(message, strict):
    if strict:
        raise StageError('ablate', message)
    logger.warning(message)


def check_captioning_ordering(reports, strict=True):
    """Logs the variants exceeding 'full'; full must beat 'wo_be_btformer' on CIDEr."""
    if 'full' not in reports:
        return
    _check_ordering(reports, 'full', TEXT_METRICS, 'Captioning')
    if 'wo_be_btformer' in reports and reports['full']['cider'] <= reports['wo_be_btformer']['cider']:
        _fail(f'full BLM CIDEr {reports["full"]["cider"]:.4f} does not exceed the linear prefix variant '
              f'{reports["wo_be_btformer"]["cider"]:.4f}.', strict)


def check_reconstruction_ordering(reports, metric='twoway_high', strict=True):
    """Logs the sketch, diffusion and caption order on `metric`; the caption row must beat the sketch row.

    Returns:
        (dict) variant name to metric value.

    """
    values = {v: reports[v][metric] for v in RECON_VARIANTS}
    logger.info('Reconstruction ablation ' + ' / '.join(f'{v} {values[v]:.4f}' for v in RECON_VARIANTS) + f' on {metric}.')
    if not values['sketch'] <= values['diffusion'] <= values['caption']:
        logger.warning(f'Reconstruction ablation rows are not ordered sketch <= diffusion <= caption on {metric}.')
    if values['caption'] <= values['sketch']:
        _fail(f'caption-conditioned reconstructions {values["caption"]:.4f} do not beat sketch-only '
              f'{values["sketch"]:.4f} on {metric}.', strict)
    return values


def ablate(pipeline, variants=None, subject=None):
    """Runs the captioning ablation variants and the reconstruction ablation rows.

    Captioning variants: 'full' (trained BLM), 'wo_ssbed' (brain encoder randomly initialized),
    'wo_be_btformer' (linear map from voxels to prefix embeddings), 'wo_lopt' (feature loss to the
    image queries instead of the language modeling loss), 'm1' and 'm3' (1 or 3 captions per stimulus).
    Reconstruction rows are computed when the reconstruction stage has completed. With
    `harness.strict_ordering`, the run fails if full does not beat the linear prefix variant on CIDEr
    or if caption-conditioned reconstructions do not beat sketch-only ones on high-level identification.

    Args:
        pipeline (Pipeline): pipeline whose caption stage has completed.
        variants (list of str, default=None): captioning variants, `harness.ablations` by default.
        subject (str, default=None): subject, the first configured one by default.

    Returns:
        (dict) family name ('captioning', 'reconstruction') to variant name to MetricReport.

    """
    config = pipeline.config
    variants = list(config.harness.ablations if variants is None else variants)
    unknown = [v for v in variants if v not in ABLATION_VARIANTS]
    if unknown:
        raise ValueError(f'Unknown ablation variants {unknown}, available are {ABLATION_VARIANTS}.')
    subject = subject or config.subjects[0]
    pipeline.require('caption', 'ablate')
    tables = {'captioning': {}}
    for variant in variants:
        logger.info(f'Ablation variant {variant} for {subject}.')
        captions = variant_captions(pipeline, variant, subject)
        tables['captioning'][variant] = pipeline.evaluate(captions, variant, subject=subject, variant=variant)
    if config.recon.enabled and pipeline.workspace.read_done('recon') is not None:
        pipeline.require('recon', 'ablate')
        images = reconstruction_images(pipeline, subject)
        tables['reconstruction'] = reconstruction_reports(pipeline, subject, images)
        margin = identification_margin(pipeline, images['caption'], subject)
        if margin < 3:
            logger.warning(f'Caption-conditioned identification is only {margin:.1f} null standard deviations above chance.')
    rel = os.path.join('outputs', f'ablation_{subject}.json')
    with open(pipeline.workspace.path(rel), 'w') as fid:
        _json.dump({f: {v: r.to_dict() for v, r in t.items()} for f, t in tables.items()}, fid, sort_keys=True, indent=2)
    for family, reports in tables.items():
        logger.info(f'{family} ablation:\n{render_table(reports)}')
    strict = config.harness.strict_ordering
    check_captioning_ordering(tables['captioning'], strict=strict)
    if 'reconstruction' in tables:
        check_reconstruction_ordering(tables['reconstruction'], strict=strict)
    return tables
