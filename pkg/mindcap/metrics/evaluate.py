"""Corpus-level caption and image evaluation producing MetricReports."""
import logging

import numpy as _np

from ._base import MetricError, normalize
from .embedding import mean_embed_similarity
from .image import feature_distance, pixcorr, ssim, two_way_identification
from .report import IMAGE_METRICS, TEXT_METRICS, MetricReport
from .stats import permutation_null
from .text import CorpusStats, cider, corpus_cider, meteor_lite, rouge_l

logger = logging.getLogger(__name__)

ATTRIBUTES = ('color', 'object', 'context')


def object_match(candidate, attributes, objects):
    """1 if the first object word of the candidate is the ground-truth object, else 0."""
    objects = set(objects)
    for token in normalize(candidate).tokens:
        if token in objects:
            return float(token == attributes['object'])
    return 0.


def attribute_recall(candidate, attributes):
    """Fraction of the ground-truth color, object and context words present in the candidate."""
    tokens = set(normalize(candidate).tokens)
    return float(_np.mean([attributes[a] in tokens for a in ATTRIBUTES]))


def caption_scores(candidates, reference_sets, attributes, objects, encoder, config):
    """Per-item scores of every text metric.

    Args:
        candidates (list of str): generated captions.
        reference_sets (list of list of str): references of each item.
        attributes (list of dict): ground-truth color, object and context of each item.
        objects (list of str): object vocabulary.
        encoder (TextEncoder): frozen text encoder of embed-sim.
        config (MetricsConfig): metric parameters.

    Returns:
        (dict) metric name to (n,) array.

    """
    if not len(candidates) == len(reference_sets) == len(attributes):
        raise MetricError(f'{len(candidates)} candidates, {len(reference_sets)} reference sets and {len(attributes)} attributes.')
    corpus = CorpusStats.from_references(reference_sets, n=config.cider_n)
    scores = {name: [] for name in TEXT_METRICS}
    for candidate, references, attrs in zip(candidates, reference_sets, attributes):
        scores['meteor'].append(meteor_lite(candidate, references, config.meteor_alpha, config.meteor_gamma, config.meteor_theta))
        scores['rouge_l'].append(rouge_l(candidate, references, beta=config.rouge_beta))
        scores['cider'].append(cider(candidate, references, corpus))
        scores['embed_sim'].append(mean_embed_similarity(candidate, references, encoder))
        scores['object_acc'].append(object_match(candidate, attrs, objects))
        scores['attribute_acc'].append(attribute_recall(candidate, attrs))
    return {k: _np.array(v, dtype='float64') for k, v in scores.items()}


def evaluate_captions(candidates, reference_sets, attributes, objects, encoder, config, metadata):
    """MetricReport of the mean of every text metric over items."""
    scores = caption_scores(candidates, reference_sets, attributes, objects, encoder, config)
    metadata = dict(metadata, count=len(candidates))
    report = MetricReport({k: v.mean() for k, v in scores.items()}, metadata, declared=TEXT_METRICS)
    logger.info(f'Caption evaluation:\n{report}')
    return report


def image_pair_scores(image, target, config):
    """Pixel correlation and SSIM of one reconstruction against its target."""
    return {'pixcorr': pixcorr(image, target), 'ssim': ssim(image, target, config.ssim_window, config.ssim_sigma)}


def evaluate_images(recons, targets, low_extractor, high_extractor, config, metadata):
    """MetricReport of pixel correlation, SSIM, two-way identification at both levels and feature distance.

    Args:
        recons (ndarray): (n, H, W, 3) reconstructions.
        targets (ndarray): (n, H, W, 3) ground-truth images.
        low_extractor (FeatureExtractor): low-level identification extractor.
        high_extractor (FeatureExtractor): high-level identification and feature distance extractor.
        config (MetricsConfig): metric parameters.
        metadata (dict): report metadata.

    """
    recons = _np.asarray(recons)
    targets = _np.asarray(targets)
    if recons.shape != targets.shape:
        raise MetricError(f'Reconstructions {recons.shape} and targets {targets.shape} shapes mismatch.')
    metrics = {
        'pixcorr': _np.mean([pixcorr(r, t) for r, t in zip(recons, targets)]),
        'ssim': _np.mean([ssim(r, t, config.ssim_window, config.ssim_sigma) for r, t in zip(recons, targets)]),
        'twoway_low': two_way_identification(recons, targets, low_extractor),
        'twoway_high': two_way_identification(recons, targets, high_extractor),
        'feature_distance': feature_distance(recons, targets, high_extractor),
    }
    report = MetricReport(metrics, dict(metadata, count=len(recons)), declared=IMAGE_METRICS)
    logger.info(f'Image evaluation:\n{report}')
    return report


def cider_null(candidates, reference_sets, config, seed=0):
    """Mean corpus CIDEr of `config.n_permutations` shuffled candidate/reference pairings.

    Document frequencies only depend on the reference sets, so they are the same for every shuffle.
    """
    def score(shuffled, references):
        return float(corpus_cider(shuffled, references, n=config.cider_n).mean())
    return permutation_null(score, list(candidates), list(reference_sets), config.n_permutations, seed)


def identification_null(recons, targets, extractor, n_permutations=200, seed=0):
    """Two-way identification percentages of shuffled reconstruction/target pairings, centered on 50."""
    def score(shuffled, paired):
        return two_way_identification(_np.stack(shuffled), _np.stack(paired), extractor)
    return permutation_null(score, list(recons), list(targets), n_permutations, seed)
