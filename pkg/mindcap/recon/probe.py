from ..metrics.image import FeatureExtractor
from .ridge import DEFAULT_GRID, fit_ridge


class ImageFeatureProbe(FeatureExtractor):
    """Frozen ridge probe from image pixels to ground-truth image features.

    The high-level identification extractor: it only sees what a linear read-out of the
    pixels says about the color, object and context attributes.

    Args:
        images (ndarray): (n, H, W, 3) training images.
        features (ndarray): (n, d_v) paired image features.
        ridge_lambda (float, default=None): regularization, cross-validated if None.

    """

    def __init__(self, images, features, ridge_lambda=None, grid=DEFAULT_GRID, folds=5, seed=0):
        self.ridge = fit_ridge(images.reshape(len(images), -1), features, ridge_lambda=ridge_lambda, grid=grid, folds=folds, seed=seed)

    def _compute(self, images):
        return self.ridge.predict(images.reshape(len(images), -1))

    def __str__(self):
        return f'Image feature probe (λ={self.ridge.ridge_lambda})'
