import logging

import numpy as _np

from ._base import MetricError

logger = logging.getLogger(__name__)


def permutation_null(score_fn, candidates, references, n_permutations=200, seed=0):
    """Distribution of a corpus score under shuffled candidate/reference pairings.

    Args:
        score_fn (callable): takes (candidates, references) lists and returns a scalar score.
        candidates (list): candidates, paired with `references` by position.
        references (list): references.
        n_permutations (int, default=200): number of shuffles.
        seed (int, default=0): shuffle generator seed.

    Returns:
        (ndarray) the `n_permutations` null scores.

    """
    if len(candidates) != len(references):
        raise MetricError(f'{len(candidates)} candidates for {len(references)} references.')
    if len(candidates) < 2:
        raise MetricError('Permutation null needs at least 2 pairs.')
    rng = _np.random.default_rng(seed)
    null = _np.empty(n_permutations)
    for k in range(n_permutations):
        order = rng.permutation(len(candidates))
        null[k] = score_fn([candidates[i] for i in order], references)
    logger.debug(f'Permutation null computed: mean {null.mean()}, 97.5th percentile {_np.percentile(null, 97.5)}.')
    return null


def bootstrap_ci(values, n_resamples=1000, confidence=0.95, seed=0):
    """Percentile bootstrap confidence interval of the mean of `values`.

    Returns:
        (tuple) mean, lower bound and upper bound.

    """
    values = _np.asarray(values, dtype='float64')
    if values.ndim != 1 or len(values) < 2:
        raise MetricError(f'Bootstrap needs a 1 dimension array of at least 2 values, not {values.shape}.')
    if not 0 < confidence < 1:
        raise ValueError(f'confidence must be in ]0, 1[, not {confidence}.')
    rng = _np.random.default_rng(seed)
    means = values[rng.integers(0, len(values), size=(n_resamples, len(values)))].mean(axis=1)
    tail = 100 * (1 - confidence) / 2
    return float(values.mean()), float(_np.percentile(means, tail)), float(_np.percentile(means, 100 - tail))
