import numpy as _np

from ._base import Preprocess
from ..data import transforms as _transforms


class Standardizer(Preprocess):
    """Z-scores trials with fixed training statistics.

    Args:
        statistics (TrainStatistics): statistics of the training split.

    """

    def __init__(self, statistics):
        if not isinstance(statistics, _transforms.TrainStatistics):
            raise TypeError(f'statistics must be a TrainStatistics instance, not {type(statistics)}.')
        self.statistics = statistics

    def __call__(self, voxels):
        return self.statistics.apply(voxels)


class Aligner(Preprocess):
    """Zero-pads trials at the tail up to `v_align` voxels."""

    def __init__(self, v_align, patch_size):
        self.v_align = v_align
        self.patch_size = patch_size

    def __call__(self, voxels):
        _transforms._check_alignment(voxels.shape[1], self.v_align, self.patch_size)
        return _transforms.pad_voxels(voxels, self.v_align)


class NoiseInjector(Preprocess):
    """Adds Gaussian noise scaled by each raw trial base std.

    Each call draws from a generator seeded once at construction, so that a chain
    applied on the same batches in the same order is reproducible.
    """

    def __init__(self, coeff, base_std_mode='abs_mean', seed=0):
        if coeff < 0:
            raise ValueError(f'coeff must be positive, not {coeff}.')
        self.coeff = coeff
        self.base_std_mode = base_std_mode
        self._rng = _np.random.default_rng(seed)

    def __call__(self, voxels):
        if self.coeff == 0:
            return voxels
        scale = self.coeff * _transforms.noise_base_std(voxels, self.base_std_mode)[:, None]
        return (voxels + self._rng.normal(0, 1, size=voxels.shape) * scale).astype(voxels.dtype)

    def __str__(self):
        return f'NoiseInjector({self.coeff})'
