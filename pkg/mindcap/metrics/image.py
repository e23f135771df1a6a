"""Image metrics: pixel correlation, SSIM, two-way identification and feature distance."""
import abc
import logging
import warnings

import numpy as _np
from scipy import signal as _signal

from .. import _utils
from ._base import MetricError

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def _check_pair(image_a, image_b):
    if not isinstance(image_a, _np.ndarray) or not isinstance(image_b, _np.ndarray):
        raise TypeError(f'images must be ndarray, not {type(image_a)} and {type(image_b)}.')
    if image_a.shape != image_b.shape:
        raise MetricError(f'Image shapes mismatch: {image_a.shape} and {image_b.shape}.')


def pixcorr(image_a, image_b):
    """Pearson correlation of flattened pixels, 0 with a warning if an image is constant."""
    _check_pair(image_a, image_b)
    a = image_a.astype('float64').ravel()
    b = image_b.astype('float64').ravel()
    a = a - a.mean()
    b = b - b.mean()
    norm = _np.sqrt((a * a).sum() * (b * b).sum())
    if norm == 0:
        message = 'Constant image in pixcorr, correlation set to 0.'
        logger.warning(message)
        warnings.warn(message, UserWarning)
        return 0.
    return float(_np.clip((a * b).sum() / norm, -1., 1.))


def to_grayscale(image):
    if image.ndim == 3 and image.shape[-1] == 3:
        return image.astype('float64') @ _np.array(LUMA_WEIGHTS)
    if image.ndim == 2:
        return image.astype('float64')
    raise MetricError(f'Image must be (H, W) or (H, W, 3), not {image.shape}.')


def gaussian_window(size=11, sigma=1.5):
    coords = _np.arange(size, dtype='float64') - (size - 1) / 2
    kernel = _np.exp(-coords ** 2 / (2 * sigma ** 2))
    kernel /= kernel.sum()
    return _np.outer(kernel, kernel)


def ssim(image_a, image_b, window_size=11, sigma=1.5, data_range=1.):
    """Mean structural similarity over valid Gaussian windows.

    Color images are converted to grayscale with luma weights (0.299, 0.587, 0.114).

    Args:
        image_a, image_b (ndarray): (H, W) or (H, W, 3) images of same shape.
        window_size (int, default=11): Gaussian window side.
        sigma (float, default=1.5): Gaussian window std.
        data_range (float, default=1.): dynamic range L of pixel values.

    Returns:
        (float) SSIM in [-1, 1].

    """
    _check_pair(image_a, image_b)
    a, b = to_grayscale(image_a), to_grayscale(image_b)
    if a.shape[0] < window_size or a.shape[1] < window_size:
        raise MetricError(f'Image {a.shape} is smaller than the {window_size}x{window_size} window.')
    window = gaussian_window(window_size, sigma)
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2

    def filt(x):
        return _signal.correlate2d(x, window, mode='valid')

    mu_a, mu_b = filt(a), filt(b)
    sigma_a = filt(a * a) - mu_a * mu_a
    sigma_b = filt(b * b) - mu_b * mu_b
    sigma_ab = filt(a * b) - mu_a * mu_b
    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * sigma_ab + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (sigma_a + sigma_b + c2))
    return float(ssim_map.mean())


class FeatureExtractor(abc.ABC):
    """Deterministic image to feature vector map abstract class.

    Subclass it and define a _compute method taking a (n, ...) images array and returning
    a (n, features) array.

    """

    def __call__(self, images):
        if not isinstance(images, _np.ndarray):
            raise TypeError(f'FeatureExtractor should take ndarray as input images, not {type(images)}.')
        if images.dtype.kind not in ('u', 'i', 'f'):
            raise ValueError(f'FeatureExtractor should take numerical ndarray as input images, not {images.dtype}.')
        if images.ndim < 2:
            raise ValueError(f'FeatureExtractor expects a batch of images, not a {images.ndim} dimension array.')
        features = self._compute(images)
        if features.ndim != 2 or features.shape[0] != images.shape[0]:
            raise ValueError(f'FeatureExtractor {self.__class__} does not return one feature vector per image.')
        return features

    @abc.abstractmethod
    def _compute(self, images):
        pass


class PixelExtractor(FeatureExtractor):
    """Flattened pixels."""

    def _compute(self, images):
        return images.reshape(len(images), -1).astype('float64')

    def __str__(self):
        return 'Pixels'


class RandomProjectionExtractor(FeatureExtractor):
    """Fixed Gaussian random projection of flattened pixels, the low-level identification extractor.

    Args:
        input_size (int): flattened image size.
        features (int, default=128): output dimension.
        seed (int, default=0): projection seed.

    """

    def __init__(self, input_size, features=128, seed=0):
        self.projection = _np.random.default_rng(seed).standard_normal((input_size, features)) / _np.sqrt(features)

    def _compute(self, images):
        flat = images.reshape(len(images), -1).astype('float64')
        if flat.shape[1] != self.projection.shape[0]:
            raise ValueError(f'Images of size {flat.shape[1]} do not match projection input size {self.projection.shape[0]}.')
        return flat @ self.projection

    def __str__(self):
        return f'Random projection ({self.projection.shape[1]})'


def correlation_distance_matrix(features_a, features_b):
    """1 - Pearson correlation between every row of `features_a` and every row of `features_b`.

    Zero-variance rows have correlation 0 with everything.
    """
    _utils.check_memory(8 * len(features_a) * len(features_b) * 3, MetricError, 'Correlation distance matrix')
    a = features_a - features_a.mean(axis=1, keepdims=True)
    b = features_b - features_b.mean(axis=1, keepdims=True)
    norm_a = _np.linalg.norm(a, axis=1)
    norm_b = _np.linalg.norm(b, axis=1)
    with _np.errstate(invalid='ignore', divide='ignore'):
        corr = (a @ b.T) / _np.outer(norm_a, norm_b)
    corr[~_np.isfinite(corr)] = 0.
    return 1. - corr


def _paired_features(recons, targets, extractor):
    if len(recons) != len(targets):
        raise MetricError(f'{len(recons)} reconstructions for {len(targets)} targets.')
    return extractor(_np.asarray(recons)).astype('float64'), extractor(_np.asarray(targets)).astype('float64')


def two_way_identification(recons, targets, extractor):
    """Percentage of distractors a reconstruction is farther from than from its own target.

    For each i and each j != i, the comparison is correct when dist(f(r_i), f(g_i)) < dist(f(r_i), f(g_j)),
    ties count one half. Distances are correlation distances.

    Args:
        recons (ndarray): (n, ...) reconstructions.
        targets (ndarray): (n, ...) paired targets.
        extractor (FeatureExtractor): deterministic image to vector map.

    Returns:
        (float) percentage in [0, 100], chance is 50.

    """
    if len(recons) < 2:
        raise MetricError(f'Two-way identification needs at least 2 pairs, not {len(recons)}.')
    features_r, features_g = _paired_features(recons, targets, extractor)
    distances = correlation_distance_matrix(features_r, features_g)
    own = _np.diag(distances)[:, None]
    others = ~_np.eye(len(distances), dtype=bool)
    correct = (own < distances).astype('float64') + 0.5 * (own == distances)
    return float(100. * correct[others].mean())


def feature_distance(recons, targets, extractor):
    """Mean correlation distance between paired reconstruction and target features, lower is better."""
    features_r, features_g = _paired_features(recons, targets, extractor)
    return float(_np.mean([correlation_distance_matrix(r[None], g[None])[0, 0] for r, g in zip(features_r, features_g)]))
